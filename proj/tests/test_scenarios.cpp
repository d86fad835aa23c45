#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "wavefield/scenarios.hpp"

using namespace wavefield;

namespace {

ScenarioConfig parse(const std::string& text) {
  std::istringstream in(text);
  return ScenarioConfig::parse(in);
}

}  // namespace

TEST(ScenarioConfig, ParsesCommentsAndWhitespace) {
  const auto cfg = parse("# header\n  seed = 7  # trailing\n\na1=0.6\nb1 = 0,0.8\n");
  EXPECT_EQ(cfg.integer("seed", 0), 7);
  EXPECT_DOUBLE_EQ(cfg.number("a1", 0.0), 0.6);
  EXPECT_EQ(cfg.complex("b1", 0.0), (cplx{0.0, 0.8}));
  EXPECT_EQ(cfg.text("missing", "x"), "x");
  EXPECT_EQ(cfg.echo(), "a1 = 0.6\nb1 = 0,0.8\nseed = 7\n");
}

TEST(ScenarioConfig, RejectsMalformedInput) {
  EXPECT_THROW(parse("seed 7\n"), UsageError);
  EXPECT_THROW(parse("seed = 1\nseed = 2\n"), UsageError);
  EXPECT_THROW(parse("bad key = 1\n"), UsageError);
  EXPECT_THROW(parse("seed = seven\n").integer("seed", 0), UsageError);
  EXPECT_THROW(parse("dt = nan\n").number("dt", 0.0), UsageError);
}

TEST(ScenarioConfig, MissingFileIsIoError) {
  EXPECT_THROW(ScenarioConfig::load("/nonexistent/config.txt"), IoError);
}

TEST(ScenarioConfig, DefaultsFillOnlyMissingKeys) {
  const auto cfg = parse("seed = 3\n").with_defaults({{"seed", "1"}, {"trials", "10"}});
  EXPECT_EQ(cfg.integer("seed", 0), 3);
  EXPECT_EQ(cfg.integer("trials", 0), 10);
}

TEST(Registry, HasEveryScenarioOnce) {
  const auto& reg = scenario_registry();
  EXPECT_EQ(reg.size(), 10U);
  std::set<std::string> names;
  for (const auto& s : reg) names.insert(s.name);
  EXPECT_EQ(names.size(), reg.size());
  for (const char* n : {"two_spin_crossing", "three_spin_chain", "von_neumann", "bell_case1", "bell_case2",
                        "student_demo", "beam_splitter_einstein", "stern_gerlach", "weak_entanglement",
                        "tunneling"}) {
    EXPECT_TRUE(names.contains(n)) << n;
  }
  EXPECT_THROW(find_scenario("nope"), UsageError);
}

TEST(RunScenario, RejectsUnknownKeysAndUnnormalizedAmplitudes) {
  EXPECT_THROW(run_scenario("two_spin_crossing", parse("color = red\n")), UsageError);
  EXPECT_THROW(run_scenario("von_neumann", parse("a1 = 1\nb1 = 1\n")), UsageError);
  EXPECT_THROW(run_scenario("two_spin_crossing", parse("n = 1000\n")), UsageError);
  EXPECT_THROW(run_scenario("two_spin_crossing", parse("unitary = toffoli\n")), UsageError);
}

TEST(RunScenario, TwoSpinPassesAndWritesOutputs) {
  const auto dir = std::filesystem::temp_directory_path() / "wavefield_test_two_spin";
  std::filesystem::remove_all(dir);
  ScenarioConfig cfg;
  cfg.set("out", dir.string());
  const RunResult r = run_scenario("two_spin_crossing", cfg);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.exit_code, kExitOk);
  ASSERT_NE(r.find("oracle_equivalence"), nullptr);
  EXPECT_TRUE(r.find("oracle_equivalence")->passed);
  for (const char* f : {"snapshots.csv", "boundary.csv", "summary.json", "config.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "boundary.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,x12,crossed_fraction_left,crossed_fraction_right,link");
  std::filesystem::remove_all(dir);
}

TEST(ScriptOracle, PastConeFollowsVectorClocks) {
  ScriptOracle o;
  o.add_system("1", Ket::qubit("1", 0.6, 0.8));
  o.add_system("2", Ket::basis("2", 0));
  o.add_system("3", Ket::basis("3", 0));
  o.interact("U12", Operator::on_qubits(gates::cnot()), {"1", "2"});
  o.interact("V13", Operator::on_qubits(gates::cnot()), {"1", "3"});

  // 2 has not heard of V13: its view is the two-system state.
  const Ket seen2 = o.state_seen_by("2");
  EXPECT_EQ(seen2.labels().size(), 2U);
  EXPECT_NEAR(std::abs(seen2.amplitude({{"1", 1}, {"2", 1}}) - 0.8), 0.0, 1e-12);
  const Ket seen3 = o.state_seen_by("3");
  EXPECT_EQ(seen3.labels().size(), 3U);
  EXPECT_NEAR(std::abs(seen3.amplitude({{"1", 1}, {"2", 1}, {"3", 1}}) - 0.8), 0.0, 1e-12);
  EXPECT_EQ(o.expected_terms("2").size(), 2U);

  o.synchronize({"2", "3"});
  EXPECT_EQ(o.state_seen_by("2").labels().size(), 3U);
  EXPECT_EQ(o.global_state().labels().size(), 3U);
}

TEST(ScriptOracle, UntouchedSystemSeesOnlyItself) {
  ScriptOracle o;
  o.add_system("1", Ket::basis("1", 1));
  o.add_system("2", Ket::basis("2", 0));
  const Ket s = o.state_seen_by("2");
  EXPECT_EQ(s.labels(), std::vector<SystemId>{"2"});
}

TEST(Builders, BellUnitariesAreUnitary) {
  for (const CMatrix& u : {scenarios::bell_case2_unitary(), scenarios::singlet_unitary(),
                           scenarios::beam_splitter_unitary()}) {
    EXPECT_LT((u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols())).norm(), 1e-12);
  }
}

TEST(Builders, SingletFromGroundState) {
  CVector zero = CVector::Zero(4);
  zero(0) = 1.0;
  const CVector s = scenarios::singlet_unitary() * zero;
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(s(1)), r, 1e-12);
  EXPECT_NEAR(std::abs(s(2)), r, 1e-12);
  EXPECT_NEAR(std::abs(s(1) + s(2)), 0.0, 1e-12);
}

TEST(Builders, WeakEntanglementIsQuadraticInCoupling) {
  const CMatrix u = gates::hadamard();
  const double d1 = scenarios::weak_entanglement_distance(0.01, u);
  const double d2 = scenarios::weak_entanglement_distance(0.001, u);
  EXPECT_GT(d1, 0.0);
  EXPECT_NEAR(std::log(d1 / d2) / std::log(10.0), 2.0, 0.05);
  EXPECT_NEAR(scenarios::weak_entanglement_distance(0.0, u), 0.0, 1e-14);
}

TEST(Helpers, StreamlineOrderCheck) {
  WorldLine a{{0.0, 1.0}, {0.0, 1.0}, {}};
  WorldLine b{{0.0, 1.0}, {1.0, 2.0}, {}};
  WorldLine c{{0.0, 1.0}, {2.0, 0.5}, {}};
  EXPECT_TRUE(streamlines_ordered({a, b}));
  EXPECT_FALSE(streamlines_ordered({a, b, c}));
}
