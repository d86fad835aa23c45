#pragma once

// Scenario registry, flat key-value configuration, the conventional
// tensor-product replay used to check each scenario, and the run driver
// that writes snapshots, boundary trajectories and the summary.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavefield/engine.hpp"
#include "wavefield/ensemble.hpp"
#include "wavefield/hilbert.hpp"

namespace wavefield {

/// Bad command line, unknown scenario or invalid configuration.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unreadable input or unwritable output.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitAssertion = 2, kExitIo = 3 };

/// Flat `key = value` settings; `#` starts a comment.
class ScenarioConfig {
 public:
  ScenarioConfig() = default;

  static ScenarioConfig parse(std::istream& in, const std::string& source = "<config>");
  static ScenarioConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  /// "re" or "re,im".
  cplx complex(const std::string& key, cplx fallback) const;

  /// Same settings with every key of `defaults` filled in where missing.
  ScenarioConfig with_defaults(const std::map<std::string, std::string>& defaults) const;
  /// Canonical `key = value` listing, sorted by key.
  std::string echo() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Keys accepted by every scenario.
const std::vector<std::string>& common_config_keys();

/// Conventional replay of a scenario script. Each system carries a vector
/// clock; an event is in a system's past when its clock is dominated by the
/// system's clock.
class ScriptOracle {
 public:
  void add_system(const SystemId& id, const Ket& initial);
  void interact(const std::string& op_id, const Operator& u, const std::vector<SystemId>& participants);
  /// Merges clocks without changing any state.
  void synchronize(const std::vector<SystemId>& participants);

  /// State of the systems in `id`'s past cone after every event in its past.
  Ket state_seen_by(const SystemId& id) const;
  std::vector<ProductTerm> expected_terms(const SystemId& id) const;
  /// Global state after every event.
  Ket global_state() const;

 private:
  using Clock = std::map<SystemId, long long>;
  struct Event {
    std::string op_id;
    Operator unitary;
    std::vector<SystemId> participants;
    Clock clock;
  };

  Ket evolve(const std::vector<SystemId>& systems, const Clock* horizon) const;

  std::vector<SystemId> order_;
  std::map<SystemId, Ket> initial_;
  std::map<SystemId, Clock> clocks_;
  std::vector<Event> events_;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Largest coefficient mismatch between the packets of `id` and the oracle
/// expansion (missing or extra terms count with their full magnitude).
double oracle_mismatch(const ScenarioState& state, const ScriptOracle& oracle, const SystemId& id);

/// Checks that the world-lines keep their initial order at every sample.
bool streamlines_ordered(const std::vector<WorldLine>& lines);

struct RunResult {
  std::string scenario;
  int exit_code = kExitOk;
  std::vector<CheckResult> checks;
  nlohmann::json summary;
  std::string snapshots_csv;
  std::string boundary_csv;

  bool passed() const;
  const CheckResult* find(const std::string& name) const;
};

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::map<std::string, std::string> defaults;
  std::function<RunResult(const ScenarioConfig&)> run;
};

const std::vector<ScenarioInfo>& scenario_registry();
const ScenarioInfo& find_scenario(const std::string& name);

/// Runs a registered scenario with `config` on top of its defaults. Writes
/// snapshots.csv, boundary.csv, summary.json and config.txt when `out` is set.
RunResult run_scenario(const std::string& name, const ScenarioConfig& config);

/// Builders shared with the tests.
namespace scenarios {

/// Bell test state after Alice and Bob have met; systems 1, 2, A, B. Uses
/// the grid keys of `config` on top of the Bell defaults.
ScenarioState build_bell(bool parallel_settings, const ScenarioConfig& config = {});

/// Bob's measurement unitary for the unaligned setting.
CMatrix bell_case2_unitary();
/// Singlet preparation on (1, 2) from |00>.
CMatrix singlet_unitary();
/// |10> -> (|10> + |01>)/sqrt2, |01> -> (|01> - |10>)/sqrt2, vacuum and
/// double occupation unchanged.
CMatrix beam_splitter_unitary();
/// On (target, control): U_t on the target, then Ry(eps) on the control
/// conditioned on the target.
CMatrix weak_interaction_unitary(double epsilon, const CMatrix& u_target);
/// Trace distance between the target's reduced state after the weak
/// interaction and measurement of the control, and U_t|0>.
double weak_entanglement_distance(double epsilon, const CMatrix& u_target);

}  // namespace scenarios

}  // namespace wavefield
