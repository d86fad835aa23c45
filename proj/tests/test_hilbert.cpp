#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "wavefield/hilbert.hpp"

using namespace wavefield;

namespace {

constexpr double kTol = 1e-12;

CVector vec(std::initializer_list<cplx> values) {
  CVector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (const auto& x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST(Ket, QubitRejectsUnnormalizedAmplitudes) {
  EXPECT_THROW(Ket::qubit("1", 1.0, 1.0), std::invalid_argument);
  EXPECT_NO_THROW(Ket::qubit("1", 0.6, 0.8));
}

TEST(Ket, TensorOrdersFirstLabelMostSignificant) {
  const Ket a = Ket::qubit("1", 0.6, 0.8);
  const Ket b = Ket::qubit("2", cplx{0.0, 1.0}, 0.0);
  const Ket ab = tensor(a, b);
  // Hand expansion: (0.6|0> + 0.8|1>) (x) i|0>.
  const CVector want = vec({cplx{0.0, 0.6}, 0.0, cplx{0.0, 0.8}, 0.0});
  EXPECT_LT((ab.amplitudes() - want).norm(), kTol);
  EXPECT_EQ(ab.labels().front(), SystemId("1"));
  EXPECT_NEAR(std::abs(ab.amplitude({{"1", 1}, {"2", 0}}) - cplx{0.0, 0.8}), 0.0, kTol);
}

TEST(Ket, TensorRejectsSharedLabels) {
  const Ket a = Ket::basis("1", 0);
  EXPECT_THROW(tensor(a, a), std::invalid_argument);
}

TEST(Ket, ReorderedPermutesAmplitudes) {
  const Ket s = tensor(Ket::basis("1", 1), Ket::basis("2", 0));
  const std::vector<SystemId> order = {"2", "1"};
  const Ket r = s.reordered(order);
  EXPECT_EQ(r.labels(), order);
  EXPECT_NEAR(std::abs(r.amplitudes()(1) - 1.0), 0.0, kTol);  // |0>_2 |1>_1
}

TEST(Apply, CnotOnReversedTargetsMatchesHandResult) {
  const Ket s = tensor(Ket::basis("1", 0), Ket::basis("2", 1));
  // Control is system 2, target system 1: |0>|1> -> |1>|1>.
  const Ket out = apply(Operator::on_qubits(gates::cnot()), s, {"2", "1"});
  EXPECT_NEAR(std::abs(out.amplitude({{"1", 1}, {"2", 1}})), 1.0, kTol);
}

TEST(Apply, SingletPreparation) {
  const CMatrix u = gates::kron(gates::pauli_z(), gates::pauli_x()) * gates::cnot() *
                    gates::kron(gates::hadamard(), gates::identity(2));
  const Ket out = apply(Operator::on_qubits(u), tensor(Ket::basis("1", 0), Ket::basis("2", 0)), {"1", "2"});
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(out.amplitude({{"1", 0}, {"2", 1}}) - r), 0.0, kTol);
  EXPECT_NEAR(std::abs(out.amplitude({{"1", 1}, {"2", 0}}) + r), 0.0, kTol);
}

TEST(Apply, UnnormalizedResultRejected) {
  // A non-unitary matrix that breaks the norm fails the output ket's check.
  CMatrix m = CMatrix::Identity(2, 2);
  m(0, 0) = 2.0;
  EXPECT_THROW(apply(Operator::on_qubits(m), Ket::basis("1", 0), {"1"}), std::invalid_argument);
}

TEST(ExpandProductTerms, DropsZeroTermsAndSortsLabels) {
  const Ket s = tensor(Ket::qubit("b", 1.0, 0.0), Ket::qubit("a", 0.6, 0.8));
  const auto terms = expand_product_terms(s);
  ASSERT_EQ(terms.size(), 2U);
  EXPECT_EQ(terms[0].basis_labels, (BasisLabels{{"a", 0}, {"b", 0}}));
  EXPECT_NEAR(std::abs(terms[1].coefficient - 0.8), 0.0, kTol);
}

TEST(ExpandProductTerms, SquaredCoefficientsSumToOne) {
  std::mt19937_64 rng(5);
  const CVector v = gates::random_state(8, rng);
  const Ket s(v, {2, 2, 2}, {"x", "y", "z"});
  double total = 0.0;
  for (const auto& t : expand_product_terms(s)) total += std::norm(t.coefficient);
  EXPECT_NEAR(total, 1.0, kTol);
}

TEST(ToBasis, PhiBasisCoordinates) {
  CMatrix phi(2, 2);
  phi << 0.5, std::sqrt(3.0) / 2.0, std::sqrt(3.0) / 2.0, -0.5;
  const Ket s = Ket::basis("2", 0);
  const Ket c = to_basis(s, {{"2", Operator::on_qubits(phi)}});
  // <phi+|0> = 1/2, <phi-|0> = sqrt3/2.
  EXPECT_NEAR(std::abs(c.amplitudes()(0) - 0.5), 0.0, kTol);
  EXPECT_NEAR(std::abs(c.amplitudes()(1) - std::sqrt(3.0) / 2.0), 0.0, kTol);
}

TEST(ReducedDensity, BellStateIsMaximallyMixed) {
  const double r = 1.0 / std::sqrt(2.0);
  const Ket s(vec({r, 0.0, 0.0, r}), {2, 2}, {"1", "2"});
  const CMatrix rho = reduced_density(s, {"1"});
  EXPECT_LT((rho - 0.5 * CMatrix::Identity(2, 2)).norm(), kTol);
}

TEST(TraceDistance, OrthogonalPureStatesAreOneApart) {
  CMatrix a = CMatrix::Zero(2, 2);
  CMatrix b = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  b(1, 1) = 1.0;
  EXPECT_NEAR(trace_distance(a, b), 1.0, kTol);
  EXPECT_NEAR(trace_distance(a, a), 0.0, kTol);
}

TEST(BornProbabilities, MatchSquaredOverlaps) {
  const Ket s = Ket::qubit("1", 0.6, 0.8);
  const auto p = born_probabilities(s, "1", Operator::on_qubits(gates::identity(2)));
  EXPECT_NEAR(p[0], 0.36, kTol);
  EXPECT_NEAR(p[1], 0.64, kTol);
}

TEST(Gates, RandomUnitariesAreUnitary) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const CMatrix u = gates::random_unitary(4, rng);
    EXPECT_LT((u.adjoint() * u - CMatrix::Identity(4, 4)).norm(), 1e-12);
  }
}

TEST(Gates, ControlledRotationActsOnlyOnOneBranch) {
  const CMatrix c = gates::controlled(gates::rotation_y(0.3));
  EXPECT_NEAR(std::abs(c(0, 0) - 1.0), 0.0, kTol);
  EXPECT_NEAR(std::abs(c(3, 2) - std::sin(0.3)), 0.0, kTol);
}
