#include "wavefield/solver.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace wavefield {
namespace {

// In-place complex FFT plans for one size. Executed through the new-array
// interface, so one pair serves every buffer of that length.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  explicit FftPlans(std::size_t n) {
    std::vector<cplx> scratch(n);
    auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
    const int size = static_cast<int>(n);
    forward = fftw_plan_dft_1d(size, data, data, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    backward = fftw_plan_dft_1d(size, data, data, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  ~FftPlans() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  void fwd(std::vector<cplx>& v) const {
    auto* p = reinterpret_cast<fftw_complex*>(v.data());
    fftw_execute_dft(forward, p, p);
  }
  void bwd(std::vector<cplx>& v) const {
    auto* p = reinterpret_cast<fftw_complex*>(v.data());
    fftw_execute_dft(backward, p, p);
  }
};

std::shared_ptr<const FftPlans> plans_for(std::size_t n) {
  static std::mutex mutex;  // the FFTW planner is not thread-safe
  static std::map<std::size_t, std::shared_ptr<const FftPlans>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const FftPlans>(n);
  return slot;
}

void require_finite(const GridFunction& psi) {
  if (!psi.all_finite()) throw std::invalid_argument("grid function has non-finite entries");
}

void require_size(const GridFunction& psi, const Grid& grid) {
  if (psi.values.size() != grid.n) throw std::invalid_argument("grid function length does not match grid");
}

}  // namespace

// ---------------------------------------------------------------- Grid

double Grid::wavenumber(std::size_t i) const {
  const auto m = static_cast<long long>(i);
  const auto half = static_cast<long long>(n / 2);
  const long long signed_mode = m < half ? m : m - static_cast<long long>(n);
  return 2.0 * std::numbers::pi * static_cast<double>(signed_mode) / length();
}

void Grid::validate() const {
  if (n < 64 || (n & (n - 1)) != 0) throw std::invalid_argument("grid: n must be a power of two >= 64");
  if (!(x_max > x_min)) throw std::invalid_argument("grid: x_max must exceed x_min");
  if (!(dt > 0.0) || !(mass > 0.0) || !(hbar > 0.0)) throw std::invalid_argument("grid: dt, mass and hbar must be positive");
}

// ---------------------------------------------------------------- GridFunction

GridFunction GridFunction::gaussian(const Grid& grid, double x0, double sigma, double k0) {
  GridFunction g = zeros(grid);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double x = grid.x(i);
    const double envelope = std::exp(-(x - x0) * (x - x0) / (4.0 * sigma * sigma));
    g.values[i] = envelope * std::polar(1.0, k0 * (x - x0));
  }
  const double norm = std::sqrt(g.norm_squared(grid));
  for (auto& v : g.values) v /= norm;
  return g;
}

GridFunction GridFunction::plane_wave(const Grid& grid, int mode) {
  GridFunction g = zeros(grid);
  const double k = 2.0 * std::numbers::pi * mode / grid.length();
  const double amp = 1.0 / std::sqrt(grid.length());
  for (std::size_t i = 0; i < grid.n; ++i) g.values[i] = std::polar(amp, k * (grid.x(i) - grid.x_min));
  return g;
}

double GridFunction::norm_squared(const Grid& grid) const {
  double acc = 0.0;
  for (const auto& v : values) acc += std::norm(v);
  return acc * grid.dx();
}

std::vector<double> GridFunction::density() const {
  std::vector<double> rho(values.size());
  std::transform(values.begin(), values.end(), rho.begin(), [](cplx v) { return std::norm(v); });
  return rho;
}

bool GridFunction::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

cplx inner(const GridFunction& a, const GridFunction& b, const Grid& grid) {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) acc += std::conj(a.values[i]) * b.values[i];
  return acc * grid.dx();
}

// ---------------------------------------------------------------- Propagator

struct Propagator::Impl {
  Grid grid;
  std::shared_ptr<const FftPlans> plans;
  std::vector<cplx> kinetic;    // full step (no potential) or half step, scaled by 1/n
  std::vector<cplx> potential;  // empty when V == 0
};

Propagator::Propagator(const Grid& grid, std::vector<double> potential) : impl_(std::make_unique<Impl>()) {
  grid.validate();
  if (!potential.empty() && potential.size() != grid.n) throw std::invalid_argument("potential length does not match grid");
  impl_->grid = grid;
  impl_->plans = plans_for(grid.n);
  const bool any_potential = std::any_of(potential.begin(), potential.end(), [](double v) { return v != 0.0; });
  const double fraction = any_potential ? 0.5 : 1.0;
  const double scale = 1.0 / static_cast<double>(grid.n);
  impl_->kinetic.resize(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double k = grid.wavenumber(i);
    const double phase = -fraction * grid.hbar * k * k * grid.dt / (2.0 * grid.mass);
    impl_->kinetic[i] = std::polar(scale, phase);
  }
  if (any_potential) {
    impl_->potential.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) impl_->potential[i] = std::polar(1.0, -potential[i] * grid.dt / grid.hbar);
  }
}

Propagator::~Propagator() = default;
Propagator::Propagator(Propagator&&) noexcept = default;
Propagator& Propagator::operator=(Propagator&&) noexcept = default;

const Grid& Propagator::grid() const { return impl_->grid; }
bool Propagator::has_potential() const { return !impl_->potential.empty(); }

void Propagator::step(GridFunction& psi) const {
  require_size(psi, impl_->grid);
  auto& v = psi.values;
  const auto kick = [&] {
    impl_->plans->fwd(v);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= impl_->kinetic[i];
    impl_->plans->bwd(v);
  };
  kick();
  if (!impl_->potential.empty()) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= impl_->potential[i];
    kick();
  }
}

GridFunction step(const GridFunction& psi, std::span<const double> potential, const Grid& grid) {
  require_finite(psi);
  Propagator prop(grid, std::vector<double>(potential.begin(), potential.end()));
  GridFunction out = psi;
  prop.step(out);
  return out;
}

// ---------------------------------------------------------------- fields

GridFunction derivative(const GridFunction& psi, const Grid& grid) {
  require_size(psi, grid);
  const auto plans = plans_for(grid.n);
  GridFunction d = psi;
  plans->fwd(d.values);
  const double scale = 1.0 / static_cast<double>(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    // the Nyquist bin has no consistent sign; drop it
    const double k = (i == grid.n / 2) ? 0.0 : grid.wavenumber(i);
    d.values[i] *= cplx(0.0, k * scale);
  }
  plans->bwd(d.values);
  return d;
}

std::vector<double> current(const GridFunction& psi, const Grid& grid) {
  require_finite(psi);
  const GridFunction d = derivative(psi, grid);
  std::vector<double> j(grid.n);
  const double coef = grid.hbar / grid.mass;
  for (std::size_t i = 0; i < grid.n; ++i) j[i] = coef * (std::conj(psi.values[i]) * d.values[i]).imag();
  return j;
}

FluidSample fluid_sample(const GridFunction& psi, const Grid& grid) { return {psi.density(), current(psi, grid)}; }

MadelungFields madelung(const GridFunction& psi, const Grid& grid) {
  require_finite(psi);
  MadelungFields f;
  f.density = psi.density();
  const auto n = grid.n;
  const double peak = *std::max_element(f.density.begin(), f.density.end());
  const std::size_t anchor = static_cast<std::size_t>(std::max_element(f.density.begin(), f.density.end()) - f.density.begin());

  f.principal.assign(n, 0.0);
  f.principal[anchor] = grid.hbar * std::arg(psi.values[anchor]);
  for (std::size_t i = anchor + 1; i < n; ++i) {
    f.principal[i] = f.principal[i - 1] + grid.hbar * std::arg(psi.values[i] * std::conj(psi.values[i - 1]));
  }
  for (std::size_t i = anchor; i-- > 0;) {
    f.principal[i] = f.principal[i + 1] - grid.hbar * std::arg(psi.values[i + 1] * std::conj(psi.values[i]));
  }

  // phase gradient hbar*Im(psi* psi')/|psi|^2, free of unwrapping artefacts
  const auto j = current(psi, grid);
  f.velocity.assign(n, 0.0);
  f.defined.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (f.density[i] > kNodeThreshold * peak) {
      f.defined[i] = true;
      f.velocity[i] = j[i] / f.density[i];
    }
  }
  return f;
}

// ---------------------------------------------------------------- SpectralField

SpectralField::SpectralField(std::span<const double> samples, const Grid& grid)
    : x_min_(grid.x_min), length_(grid.length()), dk_(2.0 * std::numbers::pi / grid.length()) {
  if (samples.size() != grid.n) throw std::invalid_argument("SpectralField: sample count does not match grid");
  std::vector<cplx> buf(samples.begin(), samples.end());
  plans_for(grid.n)->fwd(buf);
  coeffs_.assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(grid.n / 2));
  for (auto& c : coeffs_) c /= static_cast<double>(grid.n);
}

double SpectralField::value(double x) const {
  const double u = x - x_min_;
  const cplx w = std::polar(1.0, dk_ * u);
  cplx power = w;
  double acc = coeffs_[0].real();
  for (std::size_t m = 1; m < coeffs_.size(); ++m) {
    acc += 2.0 * (coeffs_[m] * power).real();
    power *= w;
  }
  return acc;
}

double SpectralField::cumulative(double x) const {
  const double u = x - x_min_;
  const cplx w = std::polar(1.0, dk_ * u);
  cplx power = w;
  double acc = coeffs_[0].real() * u;
  for (std::size_t m = 1; m < coeffs_.size(); ++m) {
    const double k = dk_ * static_cast<double>(m);
    acc += 2.0 * (coeffs_[m] * (power - 1.0) / cplx(0.0, k)).real();
    power *= w;
  }
  return acc;
}

double SpectralField::total() const { return coeffs_.empty() ? 0.0 : coeffs_[0].real() * length_; }

// ---------------------------------------------------------------- streamlines

StreamlineTracker::StreamlineTracker(const Grid& grid, std::span<const double> seeds, double t0, FluidSample initial,
                                     ExternalMemory label)
    : grid_(grid), t_(t0), prev_(std::move(initial)) {
  if (prev_.density.size() != grid.n || prev_.current.size() != grid.n) {
    throw std::invalid_argument("StreamlineTracker: sample size does not match grid");
  }
  next_ = prev_;
  max_density_ = *std::max_element(prev_.density.begin(), prev_.density.end());
  for (double x0 : seeds) {
    if (x0 < grid.x_min || x0 >= grid.x_max) throw std::invalid_argument("streamline seed outside the grid");
    const double u = (x0 - grid.x_min) / grid.dx();
    const auto i = static_cast<std::size_t>(u) % grid.n;
    const double w = u - std::floor(u);
    const double rho = (1.0 - w) * prev_.density[i] + w * prev_.density[(i + 1) % grid.n];
    if (!(rho > kNodeThreshold * max_density_)) throw std::invalid_argument("streamline seed at a node");
    lines_.push_back(WorldLine{{t0}, {x0}, label});
  }
}

double StreamlineTracker::velocity(double x, double frac) const {
  const double u = (x - grid_.x_min) / grid_.dx();
  const double fl = std::floor(u);
  const double w = u - fl;
  const auto n = static_cast<long long>(grid_.n);
  const auto i0 = static_cast<std::size_t>(((static_cast<long long>(fl) % n) + n) % n);
  const std::size_t i1 = (i0 + 1) % grid_.n;
  const auto lerp_t = [&](const std::vector<double>& a, const std::vector<double>& b, std::size_t i) {
    return (1.0 - frac) * a[i] + frac * b[i];
  };
  const double rho = (1.0 - w) * lerp_t(prev_.density, next_.density, i0) + w * lerp_t(prev_.density, next_.density, i1);
  const double j = (1.0 - w) * lerp_t(prev_.current, next_.current, i0) + w * lerp_t(prev_.current, next_.current, i1);
  if (!(rho > kNodeThreshold * max_density_)) return 0.0;
  return j / rho;
}

void StreamlineTracker::advance(double t1, FluidSample next) {
  if (!(t1 > t_)) throw std::invalid_argument("StreamlineTracker: times must be strictly increasing");
  next_ = std::move(next);
  max_density_ = std::max(*std::max_element(prev_.density.begin(), prev_.density.end()),
                          *std::max_element(next_.density.begin(), next_.density.end()));
  const double h = t1 - t_;
  for (auto& line : lines_) {
    const double x = line.positions.back();
    const double k1 = velocity(x, 0.0);
    const double k2 = velocity(x + 0.5 * h * k1, 0.5);
    const double k3 = velocity(x + 0.5 * h * k2, 0.5);
    const double k4 = velocity(x + h * k3, 1.0);
    double x1 = x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    if (x1 < grid_.x_min) x1 += grid_.length();
    if (x1 >= grid_.x_max) x1 -= grid_.length();
    line.times.push_back(t1);
    line.positions.push_back(x1);
  }
  prev_ = std::move(next_);
  t_ = t1;
}

std::vector<WorldLine> streamlines(std::span<const GridFunction> history, std::span<const double> times,
                                   std::span<const double> seeds, const Grid& grid) {
  if (history.size() != times.size() || history.empty()) {
    throw std::invalid_argument("streamlines: history and times must be nonempty and of equal length");
  }
  StreamlineTracker tracker(grid, seeds, times[0], fluid_sample(history[0], grid));
  for (std::size_t s = 1; s < history.size(); ++s) tracker.advance(times[s], fluid_sample(history[s], grid));
  return tracker.lines();
}

// ---------------------------------------------------------------- analytic

namespace analytic {

double free_gaussian_width(double sigma0, double t, double mass, double hbar) {
  const double r = hbar * t / (2.0 * mass * sigma0 * sigma0);
  return sigma0 * std::sqrt(1.0 + r * r);
}

double barrier_transmission(double k, double height, double width, double mass, double hbar) {
  if (k <= 0.0) return 0.0;
  const double energy = hbar * hbar * k * k / (2.0 * mass);
  const double diff = height - energy;
  if (std::abs(diff) < 1e-14 * std::max(1.0, height)) {
    return 1.0 / (1.0 + mass * width * width * height / (2.0 * hbar * hbar));
  }
  if (diff > 0.0) {
    const double kappa = std::sqrt(2.0 * mass * diff) / hbar;
    const double s = std::sinh(kappa * width);
    return 1.0 / (1.0 + height * height * s * s / (4.0 * energy * diff));
  }
  const double q = std::sqrt(-2.0 * mass * diff) / hbar;
  const double s = std::sin(q * width);
  return 1.0 / (1.0 + height * height * s * s / (4.0 * energy * -diff));
}

double packet_transmission(double k0, double sigma_x, double height, double width, double mass, double hbar) {
  // |phi(k)|^2 is Gaussian with standard deviation 1 / (2 sigma_x)
  const double sigma_k = 1.0 / (2.0 * sigma_x);
  const int intervals = 4000;
  const double lo = k0 - 10.0 * sigma_k;
  const double hi = k0 + 10.0 * sigma_k;
  const double h = (hi - lo) / intervals;
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double k = lo + i * h;
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double g = std::exp(-(k - k0) * (k - k0) / (2.0 * sigma_k * sigma_k));
    num += w * g * barrier_transmission(k, height, width, mass, hbar);
    den += w * g;
  }
  return num / den;
}

}  // namespace analytic
}  // namespace wavefield
