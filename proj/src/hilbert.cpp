#include "wavefield/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wavefield {
namespace {

std::size_t product(const std::vector<int>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

std::vector<std::size_t> strides_of(const std::vector<int>& dims) {
  std::vector<std::size_t> strides(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * static_cast<std::size_t>(dims[i]);
  }
  return strides;
}

void check_normalized(const CVector& v) {
  if (std::abs(v.squaredNorm() - 1.0) > 1e-10) {
    throw std::invalid_argument("state is not normalized (norm^2 = " + std::to_string(v.squaredNorm()) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------- Ket

Ket::Ket(CVector amplitudes, std::vector<int> dims, std::vector<SystemId> labels)
    : amplitudes_(std::move(amplitudes)), dims_(std::move(dims)), labels_(std::move(labels)) {
  if (dims_.size() != labels_.size()) {
    throw std::invalid_argument("Ket: dims and labels differ in length");
  }
  for (int d : dims_) {
    if (d < 2) throw std::invalid_argument("Ket: subsystem dimension must be >= 2");
  }
  if (static_cast<std::size_t>(amplitudes_.size()) != product(dims_)) {
    throw std::invalid_argument("Ket: amplitude count does not match dims");
  }
  std::vector<SystemId> sorted = labels_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("Ket: duplicate SystemId");
  }
  if (!labels_.empty()) check_normalized(amplitudes_);
}

Ket Ket::basis(const SystemId& system, int index, int dim) {
  if (index < 0 || index >= dim) throw std::out_of_range("Ket::basis: index out of range");
  CVector v = CVector::Zero(dim);
  v(index) = 1.0;
  return Ket(std::move(v), {dim}, {system});
}

Ket Ket::qubit(const SystemId& system, cplx a, cplx b) {
  CVector v(2);
  v << a, b;
  return Ket(std::move(v), {2}, {system});
}

std::size_t Ket::position(const SystemId& system) const {
  auto it = std::find(labels_.begin(), labels_.end(), system);
  if (it == labels_.end()) throw std::invalid_argument("unknown SystemId '" + system.name() + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

bool Ket::contains(const SystemId& system) const {
  return std::find(labels_.begin(), labels_.end(), system) != labels_.end();
}

Ket Ket::reordered(std::span<const SystemId> order) const {
  if (order.size() != labels_.size()) throw std::invalid_argument("reordered: not a permutation");
  std::vector<std::size_t> perm(order.size());  // new position -> old position
  std::vector<int> new_dims(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    perm[i] = position(order[i]);
    new_dims[i] = dims_[perm[i]];
  }
  const auto old_strides = strides_of(dims_);
  const auto new_strides = strides_of(new_dims);
  CVector out(amplitudes_.size());
  for (std::size_t idx = 0; idx < size(); ++idx) {
    std::size_t new_idx = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::size_t digit = (idx / old_strides[perm[i]]) % static_cast<std::size_t>(dims_[perm[i]]);
      new_idx += digit * new_strides[i];
    }
    out(static_cast<Eigen::Index>(new_idx)) = amplitudes_(static_cast<Eigen::Index>(idx));
  }
  return Ket(std::move(out), std::move(new_dims), {order.begin(), order.end()});
}

Ket Ket::canonical() const {
  std::vector<SystemId> sorted = labels_;
  std::sort(sorted.begin(), sorted.end());
  return reordered(sorted);
}

cplx Ket::amplitude(const BasisLabels& labels) const {
  if (labels.size() != labels_.size()) throw std::invalid_argument("amplitude: label count mismatch");
  const auto strides = strides_of(dims_);
  std::size_t idx = 0;
  for (const auto& [system, value] : labels) {
    const std::size_t p = position(system);
    if (value < 0 || value >= dims_[p]) throw std::out_of_range("amplitude: basis index out of range");
    idx += static_cast<std::size_t>(value) * strides[p];
  }
  return amplitudes_(static_cast<Eigen::Index>(idx));
}

// ---------------------------------------------------------------- Operator

Operator::Operator(CMatrix matrix, std::vector<int> dims, std::vector<SystemId> labels)
    : matrix_(std::move(matrix)), dims_(std::move(dims)), labels_(std::move(labels)) {
  if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("Operator: matrix must be square");
  if (static_cast<std::size_t>(matrix_.rows()) != product(dims_)) {
    throw std::invalid_argument("Operator: matrix size does not match dims");
  }
  if (!labels_.empty() && labels_.size() != dims_.size()) {
    throw std::invalid_argument("Operator: labels and dims differ in length");
  }
}

Operator Operator::on_qubits(CMatrix matrix, std::vector<SystemId> labels) {
  int n = 0;
  for (Eigen::Index size = matrix.rows(); size > 1; size /= 2) ++n;
  if ((Eigen::Index{1} << n) != matrix.rows()) throw std::invalid_argument("on_qubits: size is not a power of two");
  return Operator(std::move(matrix), std::vector<int>(static_cast<std::size_t>(n), 2), std::move(labels));
}

Operator Operator::with_labels(std::vector<SystemId> labels) const { return Operator(matrix_, dims_, std::move(labels)); }

bool Operator::is_unitary(double tol) const {
  const CMatrix residual = matrix_.adjoint() * matrix_ - CMatrix::Identity(matrix_.rows(), matrix_.cols());
  return residual.cwiseAbs().maxCoeff() <= tol;
}

Operator Operator::adjoint() const { return Operator(matrix_.adjoint(), dims_, labels_); }

bool Operator::operator==(const Operator& other) const {
  return dims_ == other.dims_ && labels_ == other.labels_ && matrix_.rows() == other.matrix_.rows() &&
         matrix_ == other.matrix_;
}

// ---------------------------------------------------------------- operations

Ket tensor(const Ket& a, const Ket& b) {
  for (const auto& label : b.labels()) {
    if (a.contains(label)) throw std::invalid_argument("tensor: overlapping SystemId '" + label.name() + "'");
  }
  CVector out(a.amplitudes().size() * b.amplitudes().size());
  for (Eigen::Index i = 0; i < a.amplitudes().size(); ++i) {
    out.segment(i * b.amplitudes().size(), b.amplitudes().size()) = a.amplitudes()(i) * b.amplitudes();
  }
  std::vector<int> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  std::vector<SystemId> labels = a.labels();
  labels.insert(labels.end(), b.labels().begin(), b.labels().end());
  return Ket(std::move(out), std::move(dims), std::move(labels));
}

Ket apply(const Operator& op, const Ket& state, std::span<const SystemId> targets) {
  if (targets.size() != op.dims().size()) throw std::invalid_argument("apply: target count does not match operator");
  std::vector<std::size_t> pos(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    pos[i] = state.position(targets[i]);
    if (state.dims()[pos[i]] != op.dims()[i]) throw std::invalid_argument("apply: dimension mismatch");
    for (std::size_t j = 0; j < i; ++j) {
      if (pos[j] == pos[i]) throw std::invalid_argument("apply: repeated target");
    }
  }
  const auto strides = strides_of(state.dims());
  const auto op_strides = strides_of(op.dims());
  const auto op_dim = static_cast<std::size_t>(op.matrix().rows());

  // offset[t] = contribution of target sub-index t to the full index
  std::vector<std::size_t> offset(op_dim, 0);
  for (std::size_t t = 0; t < op_dim; ++t) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const std::size_t digit = (t / op_strides[i]) % static_cast<std::size_t>(op.dims()[i]);
      offset[t] += digit * strides[pos[i]];
    }
  }
  const CVector& in = state.amplitudes();
  CVector out = CVector::Zero(in.size());
  for (std::size_t idx = 0; idx < state.size(); ++idx) {
    if (offset.size() > 1) {
      // visit each "rest" configuration once: only when all target digits are zero
      bool base = true;
      for (std::size_t i = 0; i < targets.size() && base; ++i) {
        base = ((idx / strides[pos[i]]) % static_cast<std::size_t>(state.dims()[pos[i]])) == 0;
      }
      if (!base) continue;
    }
    for (std::size_t r = 0; r < op_dim; ++r) {
      cplx acc = 0.0;
      for (std::size_t c = 0; c < op_dim; ++c) {
        acc += op.matrix()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) *
               in(static_cast<Eigen::Index>(idx + offset[c]));
      }
      out(static_cast<Eigen::Index>(idx + offset[r])) = acc;
    }
  }
  return Ket(std::move(out), state.dims(), state.labels());
}

Ket apply(const Operator& op, const Ket& state, std::initializer_list<SystemId> targets) {
  return apply(op, state, std::span<const SystemId>(targets.begin(), targets.size()));
}

std::vector<ProductTerm> expand_product_terms(const Ket& state, double threshold) {
  const Ket sorted = state.canonical();
  const auto strides = strides_of(sorted.dims());
  std::vector<ProductTerm> terms;
  // canonical ordering makes index order coincide with lexicographic label order
  for (std::size_t idx = 0; idx < sorted.size(); ++idx) {
    const cplx c = sorted.amplitudes()(static_cast<Eigen::Index>(idx));
    if (std::abs(c) <= threshold) continue;
    ProductTerm term{c, {}};
    for (std::size_t i = 0; i < sorted.labels().size(); ++i) {
      term.basis_labels[sorted.labels()[i]] =
          static_cast<int>((idx / strides[i]) % static_cast<std::size_t>(sorted.dims()[i]));
    }
    terms.push_back(std::move(term));
  }
  return terms;
}

Ket to_basis(const Ket& state, const BasisMap& bases) {
  Ket out = state;
  for (const auto& [system, basis] : bases) {
    if (!out.contains(system)) continue;
    if (!basis.is_unitary(1e-10)) throw std::invalid_argument("to_basis: basis for '" + system.name() + "' is not unitary");
    out = apply(basis.adjoint(), out, {system});
  }
  return out;
}

Ket from_terms(const std::vector<ProductTerm>& terms, const std::vector<int>& dims,
               const std::vector<SystemId>& labels) {
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(product(dims)));
  const auto strides = strides_of(dims);
  for (const auto& term : terms) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      idx += static_cast<std::size_t>(term.basis_labels.at(labels[i])) * strides[i];
    }
    amps(static_cast<Eigen::Index>(idx)) += term.coefficient;
  }
  return Ket(std::move(amps), dims, labels);
}

CMatrix reduced_density(const Ket& state, std::span<const SystemId> keep) {
  if (keep.empty()) throw std::invalid_argument("reduced_density: empty keep set");
  std::vector<SystemId> order(keep.begin(), keep.end());
  std::size_t keep_dim = 1;
  for (const auto& s : keep) keep_dim *= static_cast<std::size_t>(state.dim_of(s));
  for (const auto& label : state.labels()) {
    if (std::find(keep.begin(), keep.end(), label) == keep.end()) order.push_back(label);
  }
  const Ket arranged = state.reordered(order);
  const auto rest_dim = static_cast<Eigen::Index>(arranged.size() / keep_dim);
  // row-major reshape: M(k, r) = psi(k * rest_dim + r)
  CMatrix m(static_cast<Eigen::Index>(keep_dim), rest_dim);
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    for (Eigen::Index r = 0; r < rest_dim; ++r) m(k, r) = arranged.amplitudes()(k * rest_dim + r);
  }
  return m * m.adjoint();
}

CMatrix reduced_density(const Ket& state, std::initializer_list<SystemId> keep) {
  return reduced_density(state, std::span<const SystemId>(keep.begin(), keep.size()));
}

std::vector<double> born_probabilities(const Ket& state, const SystemId& system, const Operator& basis) {
  if (!basis.is_unitary(1e-10)) throw std::invalid_argument("born_probabilities: basis is not unitary");
  const CMatrix rho = reduced_density(state, {system});
  if (rho.rows() != basis.matrix().rows()) throw std::invalid_argument("born_probabilities: dimension mismatch");
  std::vector<double> p(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index k = 0; k < rho.rows(); ++k) {
    const CVector b = basis.matrix().col(k);
    p[static_cast<std::size_t>(k)] = std::max(0.0, (b.adjoint() * rho * b)(0).real());
  }
  return p;
}

double trace_distance(const CMatrix& rho, const CMatrix& sigma) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(rho - sigma);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

// ---------------------------------------------------------------- gates

namespace gates {

CMatrix identity(int dim) { return CMatrix::Identity(dim, dim); }

CMatrix pauli_x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMatrix pauli_z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

CMatrix hadamard() {
  CMatrix m(2, 2);
  const double r = 1.0 / std::sqrt(2.0);
  m << r, r, r, -r;
  return m;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix controlled(const CMatrix& u) {
  CMatrix out = CMatrix::Zero(2 * u.rows(), 2 * u.cols());
  out.topLeftCorner(u.rows(), u.cols()) = CMatrix::Identity(u.rows(), u.cols());
  out.bottomRightCorner(u.rows(), u.cols()) = u;
  return out;
}

CMatrix cnot() { return controlled(pauli_x()); }

CMatrix cz() { return controlled(pauli_z()); }

CMatrix rotation_y(double half_angle) {
  CMatrix m(2, 2);
  m << std::cos(half_angle), -std::sin(half_angle), std::sin(half_angle), std::cos(half_angle);
  return m;
}

CMatrix random_unitary(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CMatrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = cplx(normal(rng), normal(rng));
  }
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j) {
    const cplx d = r(j, j);
    q.col(j) *= (std::abs(d) > 0.0 ? d / std::abs(d) : cplx(1.0));
  }
  return q;
}

CVector random_state(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = cplx(normal(rng), normal(rng));
  return v / v.norm();
}

}  // namespace gates
}  // namespace wavefield
