#pragma once

// Finite-dimensional tensor-product quantum mechanics. Every result produced
// by the local wave-field machinery is checked against these routines.

#include <complex>
#include <compare>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wavefield {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kTermThreshold = 1e-12;

class SystemId {
 public:
  SystemId() = default;
  SystemId(std::string name) : name_(std::move(name)) {}  // NOLINT: implicit by intent
  SystemId(const char* name) : name_(name) {}             // NOLINT

  const std::string& name() const { return name_; }
  auto operator<=>(const SystemId&) const = default;

 private:
  std::string name_;
};

/// Basis index per subsystem, keyed (and therefore ordered) by SystemId.
using BasisLabels = std::map<SystemId, int>;

/// Pure state on an ordered list of labelled subsystems. The first label is
/// the most significant digit of the amplitude index.
class Ket {
 public:
  Ket() = default;
  Ket(CVector amplitudes, std::vector<int> dims, std::vector<SystemId> labels);

  static Ket basis(const SystemId& system, int index, int dim = 2);
  static Ket qubit(const SystemId& system, cplx a, cplx b);

  const CVector& amplitudes() const { return amplitudes_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<SystemId>& labels() const { return labels_; }
  std::size_t size() const { return static_cast<std::size_t>(amplitudes_.size()); }

  /// Position of `system` in the label list; throws on unknown systems.
  std::size_t position(const SystemId& system) const;
  bool contains(const SystemId& system) const;
  int dim_of(const SystemId& system) const { return dims_[position(system)]; }

  /// Same state with subsystems permuted into `order` (a permutation of labels()).
  Ket reordered(std::span<const SystemId> order) const;
  /// Same state with labels sorted lexicographically.
  Ket canonical() const;

  cplx amplitude(const BasisLabels& labels) const;

  /// Exact equality of labels, dims and amplitudes.
  bool operator==(const Ket& other) const {
    return dims_ == other.dims_ && labels_ == other.labels_ && amplitudes_ == other.amplitudes_;
  }

 private:
  CVector amplitudes_;
  std::vector<int> dims_;
  std::vector<SystemId> labels_;
};

class Operator {
 public:
  Operator() = default;
  Operator(CMatrix matrix, std::vector<int> dims, std::vector<SystemId> labels = {});
  /// Square matrix on qubits only; dims are inferred.
  static Operator on_qubits(CMatrix matrix, std::vector<SystemId> labels = {});

  const CMatrix& matrix() const { return matrix_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<SystemId>& labels() const { return labels_; }
  Operator with_labels(std::vector<SystemId> labels) const;

  bool is_unitary(double tol = kNormTolerance) const;
  Operator adjoint() const;

  bool operator==(const Operator& other) const;

 private:
  CMatrix matrix_;
  std::vector<int> dims_;
  std::vector<SystemId> labels_;
};

struct ProductTerm {
  cplx coefficient;
  BasisLabels basis_labels;
};

/// Per-system measurement/expansion bases. Columns are basis kets.
using BasisMap = std::map<SystemId, Operator>;

Ket tensor(const Ket& a, const Ket& b);
Ket apply(const Operator& op, const Ket& state, std::span<const SystemId> targets);
Ket apply(const Operator& op, const Ket& state, std::initializer_list<SystemId> targets);

/// Nonzero terms (|c| > threshold) in the product basis of the state's own
/// labels, sorted by basis labels.
std::vector<ProductTerm> expand_product_terms(const Ket& state, double threshold = kTermThreshold);
/// Coordinates of the state in the product basis given by `bases` (binary
/// basis for systems not listed).
Ket to_basis(const Ket& state, const BasisMap& bases);
Ket from_terms(const std::vector<ProductTerm>& terms, const std::vector<int>& dims,
               const std::vector<SystemId>& labels);

CMatrix reduced_density(const Ket& state, std::span<const SystemId> keep);
CMatrix reduced_density(const Ket& state, std::initializer_list<SystemId> keep);
std::vector<double> born_probabilities(const Ket& state, const SystemId& system, const Operator& basis);

double trace_distance(const CMatrix& rho, const CMatrix& sigma);

namespace gates {
CMatrix identity(int dim);
CMatrix pauli_x();
CMatrix pauli_z();
CMatrix hadamard();
CMatrix cnot();
CMatrix cz();
CMatrix kron(const CMatrix& a, const CMatrix& b);
/// |0><0| (x) I + |1><1| (x) u
CMatrix controlled(const CMatrix& u);
/// Real rotation taking |0> to cos(t)|0> + sin(t)|1>.
CMatrix rotation_y(double half_angle);
/// Haar-random unitary via QR of a complex Ginibre matrix.
CMatrix random_unitary(int dim, std::mt19937_64& rng);
CVector random_state(int dim, std::mt19937_64& rng);
}  // namespace gates

}  // namespace wavefield
