#include "wavefield/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wavefield {
namespace {

constexpr double kNormDriftLimit = 1e-8;
constexpr double kBisectionMass = 1e-10;

double mass(std::span<const double> rho, const Grid& grid) {
  double acc = 0.0;
  for (double r : rho) acc += r;
  return acc * grid.dx();
}

std::vector<double> average(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (a[i] + b[i]);
  return out;
}

std::vector<double> sum(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

// Boundary velocity field built from the summed densities and currents.
class VelocityField {
 public:
  VelocityField(const std::vector<double>& rho, const std::vector<double>& j, const Grid& grid)
      : rho_(rho, grid), j_(j, grid), peak_(*std::max_element(rho.begin(), rho.end())) {}

  double operator()(double x) const {
    const double r = rho_.value(x);
    if (!(r > kNodeThreshold * peak_)) throw std::runtime_error("boundary undefined: both densities vanish at x12");
    return j_.value(x) / r;
  }

 private:
  SpectralField rho_;
  SpectralField j_;
  double peak_;
};

double rk2(double x, const VelocityField& start, const VelocityField& mid, const Grid& grid) {
  const double xh = x + 0.5 * grid.dt * start(x);
  double out = x + grid.dt * mid(xh);
  if (out < grid.x_min || out >= grid.x_max) throw std::runtime_error("boundary left the grid");
  return out;
}

void add_scaled(GridFunction& target, const GridFunction& source, cplx scale) {
  for (std::size_t i = 0; i < target.values.size(); ++i) target.values[i] += scale * source.values[i];
}

// Cell-wise re-partition of one system. `crossed(x)` selects cells that carry
// out-branch fields.
template <class Crossed>
void repartition(PiecewiseField& wf, const Transfer& t, const Grid& grid, Crossed crossed) {
  const auto n_in = t.in_labels.size();
  const auto n_out = t.out_labels.size();
  std::vector<GridFunction*> in(n_in), out(n_out);
  for (std::size_t i = 0; i < n_in; ++i) {
    auto it = wf.pre.try_emplace(t.in_labels[i], GridFunction::zeros(grid)).first;
    in[i] = &it->second;
  }
  for (std::size_t k = 0; k < n_out; ++k) {
    auto it = wf.post.try_emplace(t.out_labels[k], GridFunction::zeros(grid)).first;
    out[k] = &it->second;
  }
  CVector a(static_cast<Eigen::Index>(n_in));
  CVector b(static_cast<Eigen::Index>(n_out));
  for (std::size_t c = 0; c < grid.n; ++c) {
    if (crossed(grid.x(c))) {
      bool any = false;
      for (std::size_t i = 0; i < n_in; ++i) {
        a(static_cast<Eigen::Index>(i)) = in[i]->values[c];
        any = any || in[i]->values[c] != cplx{};
      }
      if (!any) continue;
      b.noalias() = t.matrix * a;
      for (std::size_t k = 0; k < n_out; ++k) out[k]->values[c] += b(static_cast<Eigen::Index>(k));
      for (std::size_t i = 0; i < n_in; ++i) in[i]->values[c] = 0.0;
    } else {
      bool any = false;
      for (std::size_t k = 0; k < n_out; ++k) {
        b(static_cast<Eigen::Index>(k)) = out[k]->values[c];
        any = any || out[k]->values[c] != cplx{};
      }
      if (!any) continue;
      a.noalias() = t.matrix.adjoint() * b;
      for (std::size_t i = 0; i < n_in; ++i) in[i]->values[c] += a(static_cast<Eigen::Index>(i));
      for (std::size_t k = 0; k < n_out; ++k) out[k]->values[c] = 0.0;
    }
  }
}

GridFunction mirrored(const GridFunction& g, double about, const Grid& grid) {
  const double shift = 2.0 * (about - grid.x_min) / grid.dx();
  const auto offset = static_cast<long long>(std::llround(shift));
  const auto n = static_cast<long long>(grid.n);
  GridFunction out = GridFunction::zeros(grid);
  for (long long i = 0; i < n; ++i) {
    const long long j = (((offset - i) % n) + n) % n;
    out.values[static_cast<std::size_t>(i)] = g.values[static_cast<std::size_t>(j)];
  }
  return out;
}

bool matches(const BasisLabels& labels, const BasisLabels& when) {
  return std::all_of(when.begin(), when.end(), [&](const auto& kv) {
    auto it = labels.find(kv.first);
    return it != labels.end() && it->second == kv.second;
  });
}

}  // namespace

// ---------------------------------------------------------------- WaveField

cplx branch_coefficient(const GridFunction& branch, const GridFunction& reference, const Grid& grid) {
  const double norm = std::sqrt(branch.norm_squared(grid));
  const cplx overlap = inner(reference, branch, grid);
  if (std::abs(overlap) <= 1e-300) return norm;
  return norm * overlap / std::abs(overlap);
}

double PiecewiseField::norm_squared(const Grid& grid) const {
  double acc = 0.0;
  for (const auto& [labels, g] : pre) acc += g.norm_squared(grid);
  for (const auto& [labels, g] : post) acc += g.norm_squared(grid);
  return acc;
}

GridFunction WaveField::branch(std::size_t i) const {
  GridFunction g{std::vector<cplx>(reference.values.size())};
  for (const auto& c : components) add_scaled(g, c.shape, c.weights(static_cast<Eigen::Index>(i)));
  return g;
}

std::map<BasisLabels, GridFunction> WaveField::branches() const {
  std::map<BasisLabels, GridFunction> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.emplace(labels[i], branch(i));
  return out;
}

double WaveField::norm_squared(const Grid& grid) const {
  double acc = 0.0;
  for (std::size_t r = 0; r < components.size(); ++r) {
    for (std::size_t s = 0; s < components.size(); ++s) {
      const cplx w = components[r].weights.dot(components[s].weights);  // conjugates the first argument
      acc += (w * inner(components[r].shape, components[s].shape, grid)).real();
    }
  }
  return acc;
}

FluidSample WaveField::fluid(const Grid& grid) const {
  FluidSample out{std::vector<double>(grid.n, 0.0), std::vector<double>(grid.n, 0.0)};
  std::vector<GridFunction> derivs;
  derivs.reserve(components.size());
  for (const auto& c : components) derivs.push_back(derivative(c.shape, grid));
  const double coef = grid.hbar / grid.mass;
  for (std::size_t r = 0; r < components.size(); ++r) {
    for (std::size_t s = 0; s < components.size(); ++s) {
      const cplx w = components[r].weights.dot(components[s].weights);
      const auto& gr = components[r].shape.values;
      const auto& gs = components[s].shape.values;
      const auto& ds = derivs[s].values;
      for (std::size_t i = 0; i < grid.n; ++i) {
        out.density[i] += (w * std::conj(gr[i]) * gs[i]).real();
        out.current[i] += coef * (w * std::conj(gr[i]) * ds[i]).imag();
      }
    }
  }
  return out;
}

void WaveField::transform(const Transfer& t, const InternalMemory& after, const Grid& grid) {
  if (t.in_labels != labels) throw std::invalid_argument("transform: transfer columns do not match the branches");
  for (auto& c : components) c.weights = t.matrix * c.weights;
  labels = t.out_labels;
  memory = after;
  std::vector<Eigen::Index> keep;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (std::sqrt(branch(k).norm_squared(grid)) > kTermThreshold) keep.push_back(static_cast<Eigen::Index>(k));
  }
  if (keep.size() == labels.size()) return;
  std::vector<BasisLabels> kept;
  for (auto k : keep) kept.push_back(labels[static_cast<std::size_t>(k)]);
  labels = std::move(kept);
  for (auto& c : components) c.weights = CVector(c.weights(keep));
}

PiecewiseField render(const WaveField& wf, const LinkSide* side, const Grid& grid) {
  PiecewiseField out;
  auto phi = wf.branches();
  if (side == nullptr) {
    out.pre = std::move(phi);
    return out;
  }
  const Transfer& t = *side->transfer;
  if (t.in_labels != wf.labels) throw std::invalid_argument("render: transfer columns do not match the branches");
  const auto crossed = [&](double x) { return side->crossed_right ? x > side->x12 : x <= side->x12; };
  for (std::size_t k = 0; k < t.out_labels.size(); ++k) {
    GridFunction g = GridFunction::zeros(grid);
    for (std::size_t i = 0; i < t.in_labels.size(); ++i) {
      const cplx tk = t.matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
      if (tk != cplx{}) add_scaled(g, phi.at(t.in_labels[i]), tk);
    }
    for (std::size_t c = 0; c < grid.n; ++c) {
      if (!crossed(grid.x(c))) g.values[c] = 0.0;
    }
    out.post.emplace(t.out_labels[k], std::move(g));
  }
  for (auto& [labels, g] : phi) {
    for (std::size_t c = 0; c < grid.n; ++c) {
      if (crossed(grid.x(c))) g.values[c] = 0.0;
    }
  }
  out.pre = std::move(phi);
  return out;
}

std::vector<Packet> make_packets(const WaveField& wf, const PiecewiseField& field, const Grid& grid) {
  std::vector<Packet> out;
  const auto emit = [&](const std::map<BasisLabels, GridFunction>& branches, Region region) {
    for (const auto& [labels, g] : branches) {
      const cplx c = branch_coefficient(g, wf.reference, grid);
      if (!(std::abs(c) > kTermThreshold)) continue;
      Packet p;
      p.region = region;
      p.coefficient = c;
      p.index.coefficient = c;
      p.index.own_basis_index = labels.at(wf.system);
      p.index.partner_labels = labels;
      p.index.partner_labels.erase(wf.system);
      p.shape = g;
      for (auto& v : p.shape.values) v /= c;
      for (const auto& m : wf.mirrors) {
        if (matches(labels, m.when)) p.shape = mirrored(p.shape, m.about, grid);
      }
      out.push_back(std::move(p));
    }
  };
  emit(field.pre, Region::pre);
  emit(field.post, Region::post);
  return out;
}

// ---------------------------------------------------------------- boundary position

double find_initial_boundary(std::span<const double> rho1, std::span<const double> rho2, const Grid& grid) {
  if (rho1.size() != grid.n || rho2.size() != grid.n) throw std::invalid_argument("density length does not match grid");
  if (std::abs(mass(rho1, grid) - 1.0) > 1e-8 || std::abs(mass(rho2, grid) - 1.0) > 1e-8) {
    throw std::invalid_argument("find_initial_boundary: densities must be normalized");
  }
  const SpectralField f1(rho1, grid);
  const SpectralField f2(rho2, grid);
  const auto g = [&](double x) { return f1.cumulative(x) + f2.cumulative(x) - 1.0; };
  double lo = grid.x_min;
  double hi = grid.x_max - grid.dx();
  double glo = g(lo);
  const double ghi = g(hi);
  if (glo > 0.0 || ghi < 0.0) throw std::invalid_argument("find_initial_boundary: no sign change on the grid");
  double root = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    root = 0.5 * (lo + hi);
    const double gm = g(root);
    if (std::abs(gm) < kBisectionMass || hi - lo < 1e-13) break;
    if ((gm < 0.0) == (glo < 0.0)) {
      lo = root;
      glo = gm;
    } else {
      hi = root;
    }
  }
  // Mass of 1 right of the root against mass of 2 left of it.
  const double mismatch = (f1.total() - f1.cumulative(root)) - f2.cumulative(root);
  if (std::abs(mismatch) > 1e-7) throw std::logic_error("find_initial_boundary: flux conditions disagree");
  return root;
}

double step_boundary(double x12, const GridFunction& psi1, const GridFunction& psi2, const Grid& grid) {
  const FluidSample a = fluid_sample(psi1, grid);
  const FluidSample b = fluid_sample(psi2, grid);
  const VelocityField v(sum(a.density, b.density), sum(a.current, b.current), grid);
  return rk2(x12, v, v, grid);
}

double step_boundary(double x12, const FluidSample& left0, const FluidSample& right0, const FluidSample& left1,
                     const FluidSample& right1, const Grid& grid) {
  const VelocityField start(sum(left0.density, right0.density), sum(left0.current, right0.current), grid);
  const VelocityField mid(average(sum(left0.density, right0.density), sum(left1.density, right1.density)),
                          average(sum(left0.current, right0.current), sum(left1.current, right1.current)), grid);
  return rk2(x12, start, mid, grid);
}

// ---------------------------------------------------------------- transfer matrices

std::pair<CMatrix, CMatrix> transfer_matrices(const Operator& u, const CVector& state_left,
                                              const CVector& state_right) {
  if (u.dims().size() != 2) throw std::invalid_argument("transfer_matrices: operator must act on two systems");
  if (!u.is_unitary()) throw std::invalid_argument("transfer_matrices: operator is not unitary");
  const int dl = u.dims()[0];
  const int dr = u.dims()[1];
  if (state_left.size() != dl || state_right.size() != dr) {
    throw std::invalid_argument("transfer_matrices: partner state dimension mismatch");
  }
  if (std::abs(state_left.squaredNorm() - 1.0) > 1e-10 || std::abs(state_right.squaredNorm() - 1.0) > 1e-10) {
    throw std::invalid_argument("transfer_matrices: partner state is not normalized");
  }
  const CMatrix& m = u.matrix();
  CMatrix t_left = CMatrix::Zero(dl * dr, dl);
  CMatrix t_right = CMatrix::Zero(dl * dr, dr);
  for (int i = 0; i < dl; ++i) {
    for (int j = 0; j < dr; ++j) {
      t_left.col(i) += m.col(i * dr + j) * state_right(j);
      t_right.col(j) += m.col(i * dr + j) * state_left(i);
    }
  }
  return {t_left, t_right};
}

std::pair<MemoryTransfer, MemoryTransfer> transfer_matrices_synced(const InternalMemory& left_mem,
                                                                   const InternalMemory& right_mem,
                                                                   const Operator& u, const SystemId& left,
                                                                   const SystemId& right, const std::string& op_id) {
  const InternalMemory after = record_interaction(left_mem, right_mem, u, {op_id, {left, right}});
  return {memory_transfer(left_mem, after), memory_transfer(right_mem, after)};
}

Transfer restrict_transfer(const MemoryTransfer& full, const std::vector<BasisLabels>& labels) {
  if (labels.empty()) throw std::invalid_argument("restrict_transfer: no in-branches");
  std::vector<Eigen::Index> cols;
  for (const auto& l : labels) {
    auto it = std::find(full.in_labels.begin(), full.in_labels.end(), l);
    if (it == full.in_labels.end()) throw std::invalid_argument("restrict_transfer: branch label not in the transfer");
    cols.push_back(static_cast<Eigen::Index>(it - full.in_labels.begin()));
  }
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < full.matrix.rows(); ++r) {
    const bool reached = std::any_of(cols.begin(), cols.end(),
                                     [&](Eigen::Index c) { return std::abs(full.matrix(r, c)) > kTermThreshold; });
    if (reached) rows.push_back(r);
  }
  Transfer t;
  t.matrix = full.matrix(rows, cols);
  t.in_labels = labels;
  for (auto r : rows) t.out_labels.push_back(full.out_labels[static_cast<std::size_t>(r)]);
  return t;
}

// ---------------------------------------------------------------- piecewise fields

std::map<BasisLabels, GridFunction> unfolded(const PiecewiseField& field, const Transfer& t, const Grid& grid) {
  std::map<BasisLabels, GridFunction> out;
  for (std::size_t i = 0; i < t.in_labels.size(); ++i) {
    auto it = field.pre.find(t.in_labels[i]);
    GridFunction phi = it != field.pre.end() ? it->second : GridFunction::zeros(grid);
    for (std::size_t k = 0; k < t.out_labels.size(); ++k) {
      auto jt = field.post.find(t.out_labels[k]);
      if (jt == field.post.end()) continue;
      add_scaled(phi, jt->second, std::conj(t.matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i))));
    }
    out.emplace(t.in_labels[i], std::move(phi));
  }
  return out;
}

// ---------------------------------------------------------------- transfer

void apply_boundary_transfer(PiecewiseField& left, PiecewiseField* right, const BoundaryLink& link, const Grid& grid) {
  if (link.right_system.has_value() != (right != nullptr)) {
    throw std::invalid_argument("apply_boundary_transfer: wave-fields do not match the link");
  }
  const double before_left = left.norm_squared(grid);
  const double before_right = right != nullptr ? right->norm_squared(grid) : 0.0;
  const double x12 = link.x12;
  repartition(left, link.t_left, grid, [x12](double x) { return x > x12; });
  if (right != nullptr) repartition(*right, link.t_right, grid, [x12](double x) { return x <= x12; });
  const double drift_left = std::abs(left.norm_squared(grid) - before_left);
  const double drift_right = right != nullptr ? std::abs(right->norm_squared(grid) - before_right) : 0.0;
  if (drift_left > kNormDriftLimit || drift_right > kNormDriftLimit) {
    throw std::runtime_error("boundary transfer changed the wave-field norm");
  }
}

}  // namespace wavefield
