#pragma once

// Monte Carlo fluid particles: Born-weighted label sampling, referee pairing
// at meetings, and frequency statistics over repeated trials.

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavefield/engine.hpp"

namespace wavefield {

struct FluidParticle {
  SystemId system;
  ExternalMemory label;
  double position = 0.0;
  std::uint64_t rng_seed = 0;
};

struct PairingReport {
  std::map<std::pair<int, int>, long long> counts;
  long long total = 0;
};

enum class Sampling {
  automatic,   // stratified below kStratifiedLimit particles, i.i.d. otherwise
  stratified,  // exact largest-remainder label counts, shuffled
  iid,
};

inline constexpr std::size_t kStratifiedLimit = 100;

/// Generator keyed by (seed, trial, particle).
std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t particle);
/// Uniform double in [0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng);

/// Largest-remainder apportionment of `total` units over `weights` (which
/// need not be normalized); ties go to the earlier entry.
std::vector<long long> apportion(const std::vector<double>& weights, long long total);

std::vector<FluidParticle> sample_particles(const std::vector<Packet>& packets, const SystemId& system,
                                            const Grid& grid, std::size_t n, std::uint64_t seed,
                                            Sampling mode = Sampling::automatic);
std::vector<FluidParticle> sample_particles(const ScenarioState& state, const SystemId& system, std::size_t n,
                                            std::uint64_t seed, Sampling mode = Sampling::automatic);

/// Pairs particles of two systems in proportion to `joint` (keyed by own
/// basis indexes). Row and column sums equal the label counts of `a` and `b`.
PairingReport pair_particles(const std::vector<FluidParticle>& a, const std::vector<FluidParticle>& b,
                             const std::map<std::pair<int, int>, double>& joint);

struct EnsembleResult {
  std::string observer;
  std::vector<SystemId> systems;
  long long trials = 0;
  std::uint64_t seed = 0;
  std::map<std::string, long long> counts;
  std::map<std::string, double> frequencies;
  std::map<std::string, double> expected;
  std::map<std::string, double> z_scores;
};

/// "A=0,B=1" for the given systems.
std::string outcome_key(const std::vector<SystemId>& systems, const BasisLabels& labels);

/// Builds the scenario once, then draws one fluid particle of `observer` per
/// trial and tallies its labels restricted to `systems`.
EnsembleResult ensemble_statistics(const std::function<ScenarioState()>& build, const SystemId& observer,
                                   const std::vector<SystemId>& systems, long long trials, std::uint64_t seed,
                                   int jobs = 1);
/// Same on an already built state.
EnsembleResult ensemble_statistics(const ScenarioState& state, const SystemId& observer,
                                   const std::vector<SystemId>& systems, long long trials, std::uint64_t seed,
                                   int jobs = 1);

nlohmann::json statistics_json(const std::string& scenario, const EnsembleResult& result);

}  // namespace wavefield
