#include "wavefield/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace wavefield {
namespace {

// Cumulative |shape|^2 per cell, used to draw positions.
struct PositionSampler {
  std::vector<double> cumulative;
  const Grid* grid = nullptr;

  PositionSampler(const GridFunction& shape, const Grid& g) : grid(&g) {
    cumulative.resize(shape.values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < shape.values.size(); ++i) {
      acc += std::norm(shape.values[i]);
      cumulative[i] = acc;
    }
  }

  double draw(double u) const {
    const double target = u * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    const auto cell = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                                        static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    const double below = cell == 0 ? 0.0 : cumulative[cell - 1];
    const double width = cumulative[cell] - below;
    const double frac = width > 0.0 ? (target - below) / width : 0.5;
    return grid->x(cell) + std::clamp(frac, 0.0, 1.0) * grid->dx();
  }
};

std::size_t draw_index(const std::vector<double>& cdf, double u) {
  const double target = u * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<double> cumulative_probabilities(const std::vector<Packet>& packets) {
  std::vector<double> cdf;
  double acc = 0.0;
  for (const auto& p : packets) {
    acc += std::norm(p.coefficient);
    cdf.push_back(acc);
  }
  return cdf;
}

}  // namespace

std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t particle) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(trial), hi(trial), lo(particle), hi(particle)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<long long> apportion(const std::vector<double>& weights, long long total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0) || total < 0) throw std::invalid_argument("apportion: weights must have positive sum");
  std::vector<long long> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  long long assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(total) * weights[i] / sum;
    // guard against quotas like 2.9999999999999996 that are integers in exact arithmetic
    const double rounded = std::round(quota);
    const double q = std::abs(quota - rounded) < 1e-9 ? rounded : quota;
    counts[i] = static_cast<long long>(std::floor(q));
    assigned += counts[i];
    remainders.emplace_back(q - std::floor(q), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned) ++counts[remainders[r].second];
  return counts;
}

std::vector<FluidParticle> sample_particles(const std::vector<Packet>& packets, const SystemId& system,
                                            const Grid& grid, std::size_t n, std::uint64_t seed, Sampling mode) {
  if (n == 0) throw std::invalid_argument("sample_particles: n must be at least 1");
  if (packets.empty()) throw std::invalid_argument("sample_particles: wave-field has no packets");
  if (mode == Sampling::automatic) mode = n < kStratifiedLimit ? Sampling::stratified : Sampling::iid;

  std::vector<PositionSampler> positions;
  positions.reserve(packets.size());
  for (const auto& p : packets) positions.emplace_back(p.shape, grid);

  std::vector<std::size_t> choice(n);
  if (mode == Sampling::stratified) {
    std::vector<double> weights;
    for (const auto& p : packets) weights.push_back(std::norm(p.coefficient));
    const auto counts = apportion(weights, static_cast<long long>(n));
    std::size_t k = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (long long c = 0; c < counts[i]; ++c) choice[k++] = i;
    }
    auto rng = keyed_rng(seed, 0, n);
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
      std::swap(choice[i], choice[std::min(j, i)]);
    }
  } else {
    const auto cdf = cumulative_probabilities(packets);
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = keyed_rng(seed, 0, i);
      choice[i] = draw_index(cdf, uniform01(rng));
    }
  }

  std::vector<FluidParticle> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = keyed_rng(seed, 1, i);
    FluidParticle fp;
    fp.system = system;
    fp.label = packets[choice[i]].index;
    fp.rng_seed = rng();
    fp.position = positions[choice[i]].draw(uniform01(rng));
    out.push_back(std::move(fp));
  }
  return out;
}

std::vector<FluidParticle> sample_particles(const ScenarioState& state, const SystemId& system, std::size_t n,
                                            std::uint64_t seed, Sampling mode) {
  return sample_particles(state.packets(system), system, state.grid(), n, seed, mode);
}

PairingReport pair_particles(const std::vector<FluidParticle>& a, const std::vector<FluidParticle>& b,
                             const std::map<std::pair<int, int>, double>& joint) {
  if (a.size() != b.size()) throw std::invalid_argument("pair_particles: lists must have equal length");
  if (joint.empty()) throw std::invalid_argument("pair_particles: empty joint distribution");
  std::map<int, long long> rows, cols;
  for (const auto& p : a) ++rows[p.label.own_basis_index];
  for (const auto& p : b) ++cols[p.label.own_basis_index];
  const auto n = static_cast<long long>(a.size());

  std::map<int, double> row_mass, col_mass;
  for (const auto& [key, p] : joint) {
    row_mass[key.first] += p;
    col_mass[key.second] += p;
  }
  const auto check = [&](const std::map<int, long long>& have, const std::map<int, double>& want) {
    for (const auto& [idx, c] : have) {
      auto it = want.find(idx);
      const double expected = it == want.end() ? 0.0 : it->second * static_cast<double>(n);
      if (std::abs(static_cast<double>(c) - expected) >= 1.0) {
        throw std::invalid_argument("pair_particles: label counts are inconsistent with the joint distribution");
      }
    }
  };
  check(rows, row_mass);
  check(cols, col_mass);

  PairingReport report;
  report.total = n;
  std::map<int, long long> row_left = rows, col_left = cols;
  struct Cell {
    std::pair<int, int> key;
    double remainder;
  };
  std::vector<Cell> cells;
  for (const auto& [key, p] : joint) {
    const double quota = p * static_cast<double>(n);
    const double rounded = std::round(quota);
    const double q = std::abs(quota - rounded) < 1e-9 ? rounded : quota;
    const long long base = std::min({static_cast<long long>(std::floor(q)), row_left[key.first], col_left[key.second]});
    if (base > 0) report.counts[key] = base;
    row_left[key.first] -= base;
    col_left[key.second] -= base;
    cells.push_back({key, q - static_cast<double>(base)});
  }
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.remainder > y.remainder; });
  for (const auto& cell : cells) {
    if (cell.remainder > 0.0 && row_left[cell.key.first] > 0 && col_left[cell.key.second] > 0) {
      ++report.counts[cell.key];
      --row_left[cell.key.first];
      --col_left[cell.key.second];
    }
  }
  // capacity left over after capped floors goes to any supported cell
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& cell : cells) {
      if (joint.at(cell.key) > 0.0 && row_left[cell.key.first] > 0 && col_left[cell.key.second] > 0) {
        ++report.counts[cell.key];
        --row_left[cell.key.first];
        --col_left[cell.key.second];
        progress = true;
      }
    }
  }
  const auto unpaired = [](const std::map<int, long long>& m) {
    return std::any_of(m.begin(), m.end(), [](const auto& kv) { return kv.second != 0; });
  };
  if (unpaired(row_left) || unpaired(col_left)) throw std::invalid_argument("pair_particles: infeasible marginals");
  return report;
}

std::string outcome_key(const std::vector<SystemId>& systems, const BasisLabels& labels) {
  std::ostringstream out;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    if (i > 0) out << ',';
    out << systems[i].name() << '=' << labels.at(systems[i]);
  }
  return out.str();
}

EnsembleResult ensemble_statistics(const ScenarioState& state, const SystemId& observer,
                                   const std::vector<SystemId>& systems, long long trials, std::uint64_t seed,
                                   int jobs) {
  if (trials < 1) throw std::invalid_argument("ensemble_statistics: trials must be at least 1");
  if (jobs < 1) throw std::invalid_argument("ensemble_statistics: jobs must be at least 1");
  const auto packets = state.packets(observer);
  if (packets.empty()) throw std::invalid_argument("ensemble_statistics: observer has no packets");

  EnsembleResult result;
  result.observer = observer.name();
  result.systems = systems;
  result.trials = trials;
  result.seed = seed;

  std::vector<std::string> keys;
  double total = 0.0;
  for (const auto& p : packets) total += std::norm(p.coefficient);
  for (const auto& p : packets) {
    keys.push_back(outcome_key(systems, p.index.full_labels(observer)));
    result.expected[keys.back()] += std::norm(p.coefficient) / total;
  }
  const auto cdf = cumulative_probabilities(packets);

  const auto worker = [&](long long begin, long long end, std::vector<long long>& tally) {
    for (long long t = begin; t < end; ++t) {
      auto rng = keyed_rng(seed, static_cast<std::uint64_t>(t), 0);
      ++tally[draw_index(cdf, uniform01(rng))];
    }
  };
  const auto n_jobs = static_cast<long long>(std::min<long long>(jobs, trials));
  std::vector<std::vector<long long>> tallies(static_cast<std::size_t>(n_jobs), std::vector<long long>(packets.size(), 0));
  std::vector<std::thread> threads;
  for (long long j = 0; j < n_jobs; ++j) {
    const long long begin = trials * j / n_jobs;
    const long long end = trials * (j + 1) / n_jobs;
    const auto idx = static_cast<std::size_t>(j);
    threads.emplace_back(worker, begin, end, std::ref(tallies[idx]));
  }
  for (auto& th : threads) th.join();

  for (std::size_t k = 0; k < packets.size(); ++k) {
    long long c = 0;
    for (const auto& tally : tallies) c += tally[k];
    result.counts[keys[k]] += c;
  }
  for (const auto& [key, p] : result.expected) {
    const long long c = result.counts[key];
    const double f = static_cast<double>(c) / static_cast<double>(trials);
    result.frequencies[key] = f;
    const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    result.z_scores[key] = sd > 0.0 ? (f - p) / sd : (f == p ? 0.0 : std::numeric_limits<double>::infinity());
  }
  return result;
}

EnsembleResult ensemble_statistics(const std::function<ScenarioState()>& build, const SystemId& observer,
                                   const std::vector<SystemId>& systems, long long trials, std::uint64_t seed,
                                   int jobs) {
  const ScenarioState state = build();
  return ensemble_statistics(state, observer, systems, trials, seed, jobs);
}

nlohmann::json statistics_json(const std::string& scenario, const EnsembleResult& result) {
  nlohmann::json doc;
  doc["scenario"] = scenario;
  doc["trials"] = result.trials;
  doc["seed"] = result.seed;
  doc["observer"] = result.observer;
  std::vector<std::string> systems;
  for (const auto& s : result.systems) systems.push_back(s.name());
  doc["systems"] = systems;
  doc["counts"] = result.counts;
  doc["frequencies"] = result.frequencies;
  doc["expected"] = result.expected;
  doc["z_scores"] = result.z_scores;
  return doc;
}

}  // namespace wavefield
