#pragma once

// Single-particle 1D Schrodinger evolution on a periodic grid (spectral
// split-step), probability current, Madelung fields and fluid streamlines.

#include <memory>
#include <span>
#include <vector>

#include "wavefield/hilbert.hpp"
#include "wavefield/memory.hpp"

namespace wavefield {

/// Relative density below which a point counts as a node.
inline constexpr double kNodeThreshold = 1e-12;

struct Grid {
  double x_min = -64.0;
  double x_max = 64.0;
  std::size_t n = 1024;
  double dt = 0.005;
  double mass = 1.0;
  double hbar = 1.0;

  double length() const { return x_max - x_min; }
  double dx() const { return length() / static_cast<double>(n); }
  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
  /// Angular wavenumber of FFT bin i (standard FFT ordering).
  double wavenumber(std::size_t i) const;
  /// Throws std::invalid_argument unless n is a power of two >= 64 and all
  /// scalars are positive.
  void validate() const;
  bool operator==(const Grid&) const = default;
};

struct GridFunction {
  std::vector<cplx> values;

  static GridFunction zeros(const Grid& grid) { return {std::vector<cplx>(grid.n, cplx{})}; }
  /// Normalized Gaussian with density standard deviation `sigma` and mean
  /// wavenumber `k0`.
  static GridFunction gaussian(const Grid& grid, double x0, double sigma, double k0);
  static GridFunction plane_wave(const Grid& grid, int mode);

  /// Integral of |psi|^2.
  double norm_squared(const Grid& grid) const;
  std::vector<double> density() const;
  bool all_finite() const;
};

/// <a|b> on the grid.
cplx inner(const GridFunction& a, const GridFunction& b, const Grid& grid);

struct MadelungFields {
  std::vector<double> density;
  /// Principal function S (units of action), unwrapped outward from the
  /// global density maximum.
  std::vector<double> principal;
  std::vector<double> velocity;
  /// false where the density is at or below the node threshold; velocity is
  /// set to zero there.
  std::vector<bool> defined;
};

/// Reusable split-step propagator for a fixed grid and potential.
class Propagator {
 public:
  Propagator(const Grid& grid, std::vector<double> potential = {});
  ~Propagator();
  Propagator(Propagator&&) noexcept;
  Propagator& operator=(Propagator&&) noexcept;
  Propagator(const Propagator&) = delete;
  Propagator& operator=(const Propagator&) = delete;

  /// One kinetic-potential-kinetic step in place.
  void step(GridFunction& psi) const;
  const Grid& grid() const;
  bool has_potential() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

GridFunction step(const GridFunction& psi, std::span<const double> potential, const Grid& grid);
std::vector<double> current(const GridFunction& psi, const Grid& grid);
/// Spectral first derivative.
GridFunction derivative(const GridFunction& psi, const Grid& grid);
MadelungFields madelung(const GridFunction& psi, const Grid& grid);

/// Trigonometric interpolant of a real periodic sample set.
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(std::span<const double> samples, const Grid& grid);
  double value(double x) const;
  /// Integral from x_min to x.
  double cumulative(double x) const;
  double total() const;

 private:
  std::vector<cplx> coeffs_;
  double x_min_ = 0.0;
  double length_ = 1.0;
  double dk_ = 1.0;
};

/// Density and current of a fluid at one time.
struct FluidSample {
  std::vector<double> density;
  std::vector<double> current;
};
FluidSample fluid_sample(const GridFunction& psi, const Grid& grid);

struct WorldLine {
  std::vector<double> times;
  std::vector<double> positions;
  ExternalMemory label;
};

/// Integrates dx/dt = j/rho with RK4 between consecutive samples, using linear
/// interpolation of j and rho in x and t. Samples are fed in time order.
class StreamlineTracker {
 public:
  StreamlineTracker(const Grid& grid, std::span<const double> seeds, double t0, FluidSample initial,
                    ExternalMemory label = {});
  void advance(double t1, FluidSample next);
  const std::vector<WorldLine>& lines() const { return lines_; }

 private:
  double velocity(double x, double frac) const;

  Grid grid_;
  double t_ = 0.0;
  FluidSample prev_;
  FluidSample next_;
  double max_density_ = 0.0;
  std::vector<WorldLine> lines_;
};

std::vector<WorldLine> streamlines(std::span<const GridFunction> history, std::span<const double> times,
                                   std::span<const double> seeds, const Grid& grid);

namespace analytic {
/// Density standard deviation of a free Gaussian at time t.
double free_gaussian_width(double sigma0, double t, double mass = 1.0, double hbar = 1.0);
/// Plane-wave transmission probability through a rectangular barrier.
double barrier_transmission(double k, double height, double width, double mass = 1.0, double hbar = 1.0);
/// Transmission averaged over a Gaussian packet's momentum distribution.
double packet_transmission(double k0, double sigma_x, double height, double width, double mass = 1.0,
                           double hbar = 1.0);
}  // namespace analytic

}  // namespace wavefield
