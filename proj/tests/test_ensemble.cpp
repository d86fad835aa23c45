#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "wavefield/ensemble.hpp"

using namespace wavefield;

namespace {

Grid small_grid() { return Grid{-64.0, 64.0, 1024, 0.01}; }

ScenarioState entangled_pair(double a0, double a1) {
  ScenarioState s(small_grid());
  s.add_system("1", Ket::qubit("1", a0, a1), GridFunction::gaussian(s.grid(), -10.0, 2.0, 6.0));
  s.add_system("2", Ket::basis("2", 0), GridFunction::gaussian(s.grid(), 10.0, 2.0, -6.0));
  s.meet("1", "2", Operator::on_qubits(gates::cnot()), "U");
  s.advance_until_idle(5000);
  return s;
}

std::map<int, long long> own_counts(const std::vector<FluidParticle>& ps) {
  std::map<int, long long> out;
  for (const auto& p : ps) ++out[p.label.own_basis_index];
  return out;
}

}  // namespace

TEST(Apportion, LargestRemainder) {
  EXPECT_EQ(apportion({0.5, 0.5}, 8), (std::vector<long long>{4, 4}));
  EXPECT_EQ(apportion({1.0, 1.0, 3.0, 3.0}, 8), (std::vector<long long>{1, 1, 3, 3}));
  EXPECT_EQ(apportion({1.0, 1.0, 1.0}, 2), (std::vector<long long>{1, 1, 0}));
  EXPECT_EQ(apportion({0.36, 0.64}, 10), (std::vector<long long>{4, 6}));
  const auto big = apportion({0.1, 0.2, 0.3, 0.4}, 997);
  EXPECT_EQ(std::accumulate(big.begin(), big.end(), 0LL), 997);
}

TEST(KeyedRng, DependsOnEveryKey) {
  auto draw = [](std::uint64_t s, std::uint64_t t, std::uint64_t p) {
    auto g = keyed_rng(s, t, p);
    return g();
  };
  EXPECT_EQ(draw(1, 2, 3), draw(1, 2, 3));
  EXPECT_NE(draw(1, 2, 3), draw(1, 2, 4));
  EXPECT_NE(draw(1, 2, 3), draw(1, 3, 3));
  EXPECT_NE(draw(1, 2, 3), draw(2, 2, 3));
  auto g = keyed_rng(5, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(g);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(SampleParticles, StratifiedCountsAreExact) {
  const ScenarioState s = entangled_pair(std::sqrt(0.5), std::sqrt(0.5));
  const auto ps = sample_particles(s, "1", 8, 7);
  const auto c = own_counts(ps);
  EXPECT_EQ(c.at(0), 4);
  EXPECT_EQ(c.at(1), 4);
  for (const auto& p : ps) {
    EXPECT_EQ(p.label.partner_labels.at("2"), p.label.own_basis_index);
    EXPECT_GT(p.position, s.grid().x_min);
    EXPECT_LT(p.position, s.grid().x_max);
  }
}

TEST(SampleParticles, DeterministicForSeed) {
  const ScenarioState s = entangled_pair(0.6, 0.8);
  const auto a = sample_particles(s, "1", 500, 11);
  const auto b = sample_particles(s, "1", 500, 11);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].position, b[k].position);
    EXPECT_EQ(a[k].label.own_basis_index, b[k].label.own_basis_index);
  }
}

TEST(SampleParticles, IidFrequenciesWithinBinomialBand) {
  const ScenarioState s = entangled_pair(0.6, 0.8);
  const std::size_t n = 20000;
  const auto c = own_counts(sample_particles(s, "1", n, 3, Sampling::iid));
  const double f = static_cast<double>(c.at(1)) / static_cast<double>(n);
  EXPECT_LT(std::abs(f - 0.64), 3.0 * std::sqrt(0.64 * 0.36 / static_cast<double>(n)));
}

TEST(PairParticles, JointCountsFollowTable) {
  const ScenarioState s = entangled_pair(std::sqrt(0.5), std::sqrt(0.5));
  const auto a = sample_particles(s, "1", 8, 1);
  const auto b = sample_particles(s, "2", 8, 2);
  const PairingReport r = pair_particles(a, b, correlation_table(s, "1", "2"));
  EXPECT_EQ(r.total, 8);
  EXPECT_EQ(r.counts.at({0, 0}), 4);
  EXPECT_EQ(r.counts.at({1, 1}), 4);
  EXPECT_FALSE(r.counts.contains({0, 1}) && r.counts.at({0, 1}) != 0);
}

TEST(PairParticles, UnequalTableSplitsOneOneThreeThree) {
  std::vector<FluidParticle> a(8);
  std::vector<FluidParticle> b(8);
  for (int k = 0; k < 8; ++k) {
    a[k].label.own_basis_index = k < 4 ? 0 : 1;
    b[k].label.own_basis_index = (k < 1 || (k >= 4 && k < 7)) ? 0 : 1;
  }
  // Marginals 4/4 on both sides with joint weights 1:3:3:1.
  const std::map<std::pair<int, int>, double> joint = {{{0, 0}, 1.0 / 8}, {{0, 1}, 3.0 / 8}, {{1, 0}, 3.0 / 8},
                                                       {{1, 1}, 1.0 / 8}};
  const PairingReport r = pair_particles(a, b, joint);
  EXPECT_EQ(r.counts.at({0, 0}), 1);
  EXPECT_EQ(r.counts.at({0, 1}), 3);
  EXPECT_EQ(r.counts.at({1, 0}), 3);
  EXPECT_EQ(r.counts.at({1, 1}), 1);
}

TEST(OutcomeKey, ListsSystemsInOrder) {
  EXPECT_EQ(outcome_key({"A", "B"}, {{"A", 0}, {"B", 1}, {"1", 1}}), "A=0,B=1");
}

TEST(EnsembleStatistics, FrequenciesAndJobsInvariance) {
  const ScenarioState s = entangled_pair(0.6, 0.8);
  const auto r1 = ensemble_statistics(s, "2", {"1"}, 4000, 9, 1);
  const auto r4 = ensemble_statistics(s, "2", {"1"}, 4000, 9, 4);
  EXPECT_EQ(r1.counts, r4.counts);
  EXPECT_EQ(r1.trials, 4000);
  EXPECT_NEAR(r1.expected.at("1=1"), 0.64, 1e-10);
  for (const auto& [key, z] : r1.z_scores) EXPECT_LT(std::abs(z), 4.0) << key;
  const auto doc = statistics_json("pair", r1);
  EXPECT_EQ(doc.dump(), statistics_json("pair", r4).dump());
}
