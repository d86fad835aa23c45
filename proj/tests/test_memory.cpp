#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "wavefield/boundary.hpp"
#include "wavefield/memory.hpp"

using namespace wavefield;

namespace {

Operator cnot() { return Operator::on_qubits(gates::cnot()); }

double isometry_defect(const CMatrix& t) {
  return (t.adjoint() * t - CMatrix::Identity(t.cols(), t.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(InternalMemory, FreshHoldsOnlyItsOwnState) {
  const auto m = InternalMemory::fresh("1", Ket::qubit("1", 0.6, 0.8));
  EXPECT_EQ(m.systems(), std::vector<SystemId>{"1"});
  EXPECT_TRUE(m.ops().empty());
  EXPECT_THROW(InternalMemory::fresh("1", Ket::basis("2", 0)), std::invalid_argument);
}

TEST(InternalMemory, RecordInteractionSynchronizesBoth) {
  const auto m1 = InternalMemory::fresh("1", Ket::qubit("1", 0.6, 0.8));
  const auto m2 = InternalMemory::fresh("2", Ket::basis("2", 0));
  const auto after = record_interaction(m1, m2, cnot(), {"U12", {"1", "2"}});
  EXPECT_TRUE(after.contains_system("1"));
  EXPECT_TRUE(after.contains_system("2"));
  EXPECT_TRUE(after.contains_op("U12"));
  const Ket s = derive_state(after);
  EXPECT_NEAR(std::abs(s.amplitude({{"1", 0}, {"2", 0}}) - 0.6), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(s.amplitude({{"1", 1}, {"2", 1}}) - 0.8), 0.0, 1e-12);
}

TEST(InternalMemory, CausalParentsFollowWorldLines) {
  const auto m1 = InternalMemory::fresh("1", Ket::basis("1", 0));
  const auto m2 = InternalMemory::fresh("2", Ket::basis("2", 0));
  const auto m3 = InternalMemory::fresh("3", Ket::basis("3", 0));
  const auto a = record_interaction(m1, m2, cnot(), {"U12", {"1", "2"}});
  const auto b = record_interaction(a, m3, cnot(), {"V13", {"1", "3"}});
  EXPECT_TRUE(b.is_ancestor("U12", "V13"));
  EXPECT_EQ(b.linearization(), (std::vector<std::string>{"U12", "V13"}));
  EXPECT_EQ(b.tips("1"), std::set<std::string>{"V13"});
  EXPECT_EQ(b.tips("2"), std::set<std::string>{"U12"});
}

TEST(InternalMemory, SynchronizeIsCommutativeAndIdempotent) {
  const auto m1 = InternalMemory::fresh("1", Ket::basis("1", 0));
  const auto m2 = InternalMemory::fresh("2", Ket::basis("2", 0));
  const auto m3 = InternalMemory::fresh("3", Ket::basis("3", 0));
  const auto a = record_interaction(m1, m2, cnot(), {"U12", {"1", "2"}});
  EXPECT_EQ(synchronize(a, m3), synchronize(m3, a));
  EXPECT_EQ(synchronize(a, a), a);
}

TEST(InternalMemory, ConflictingHistoriesAreRejected) {
  const auto m1 = InternalMemory::fresh("1", Ket::basis("1", 0));
  const auto m2 = InternalMemory::fresh("2", Ket::basis("2", 0));
  const auto a = record_interaction(m1, m2, cnot(), {"U12", {"1", "2"}});
  const auto b = record_interaction(m1, m2, Operator::on_qubits(gates::cz()), {"U12", {"1", "2"}});
  EXPECT_THROW(synchronize(a, b), std::invalid_argument);
}

TEST(InternalMemory, JsonRoundTrip) {
  const auto m1 = InternalMemory::fresh("1", Ket::qubit("1", 0.6, cplx{0.0, 0.8}));
  const auto m2 = InternalMemory::fresh("2", Ket::basis("2", 0));
  std::mt19937_64 rng(3);
  const auto a = record_interaction(m1, m2, Operator::on_qubits(gates::random_unitary(4, rng)), {"U", {"2", "1"}});
  const nlohmann::json doc = to_json(a);
  const InternalMemory back = memory_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(to_json(back), doc);
  EXPECT_EQ(back, a);
}

TEST(ExternalMemories, VonNeumannPointerIndexes) {
  const auto m1 = InternalMemory::fresh("1", Ket::qubit("1", 0.6, 0.8));
  const auto m2 = InternalMemory::fresh("2", Ket::basis("2", 0));
  const auto after = record_interaction(m1, m2, cnot(), {"U12", {"1", "2"}});
  const auto ext = external_memories(after, "2");
  ASSERT_EQ(ext.size(), 2U);
  EXPECT_EQ(ext[0].own_basis_index, 0);
  EXPECT_EQ(ext[0].partner_labels.at("1"), 0);
  EXPECT_NEAR(std::abs(ext[1].coefficient - 0.8), 0.0, 1e-12);
}

TEST(MemoryTransfer, IsIsometryAndMapsStates) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const CVector a = gates::random_state(2, rng);
    const CVector b = gates::random_state(2, rng);
    const auto m1 = InternalMemory::fresh("1", Ket(a, {2}, {"1"}));
    const auto m2 = InternalMemory::fresh("2", Ket(b, {2}, {"2"}));
    const auto after = record_interaction(m1, m2, Operator::on_qubits(gates::random_unitary(4, rng)), {"U", {"1", "2"}});
    const MemoryTransfer t = memory_transfer(m1, after);
    ASSERT_EQ(t.matrix.rows(), 4);
    ASSERT_EQ(t.matrix.cols(), 2);
    EXPECT_LT(isometry_defect(t.matrix), 1e-12);
    // T applied to the pre-interaction state gives the post-interaction state.
    const CVector mapped = t.matrix * a;
    const Ket s = derive_state(after);
    for (std::size_t k = 0; k < t.out_labels.size(); ++k) {
      EXPECT_NEAR(std::abs(mapped(static_cast<Eigen::Index>(k)) - s.amplitude(t.out_labels[k])), 0.0, 1e-12);
    }
  }
}

TEST(MemoryTransfer, SyncedShapesForPriorHistory) {
  // 1 has already met 3; meeting the fresh 2 maps 4 columns to 8 rows for 1
  // and 2 columns to 8 rows for 2.
  std::mt19937_64 rng(23);
  const auto m1 = InternalMemory::fresh("1", Ket::basis("1", 0));
  const auto m2 = InternalMemory::fresh("2", Ket::basis("2", 0));
  const auto m3 = InternalMemory::fresh("3", Ket::basis("3", 0));
  const auto m13 = record_interaction(m1, m3, Operator::on_qubits(gates::random_unitary(4, rng)), {"V", {"1", "3"}});
  const auto [t1, t2] =
      transfer_matrices_synced(m13, m2, Operator::on_qubits(gates::random_unitary(4, rng)), "1", "2", "U");
  EXPECT_EQ(t1.matrix.rows(), 8);
  EXPECT_EQ(t1.matrix.cols(), 4);
  EXPECT_EQ(t2.matrix.rows(), 8);
  EXPECT_EQ(t2.matrix.cols(), 2);
  EXPECT_LT(isometry_defect(t1.matrix), 1e-12);
  EXPECT_LT(isometry_defect(t2.matrix), 1e-12);
}

TEST(AllLabels, LexicographicEnumeration) {
  const auto labels = all_labels({"a", "b"}, {2, 3});
  ASSERT_EQ(labels.size(), 6U);
  EXPECT_EQ(labels[1], (BasisLabels{{"a", 0}, {"b", 1}}));
  EXPECT_EQ(labels[3], (BasisLabels{{"a", 1}, {"b", 0}}));
}
