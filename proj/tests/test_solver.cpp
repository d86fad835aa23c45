#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "wavefield/solver.hpp"

using namespace wavefield;

namespace {

double mean_x(const GridFunction& psi, const Grid& g) {
  double m = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) m += std::norm(psi.values[i]) * g.x(i) * g.dx();
  return m;
}

double width(const GridFunction& psi, const Grid& g) {
  const double m = mean_x(psi, g);
  double v = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) v += std::norm(psi.values[i]) * (g.x(i) - m) * (g.x(i) - m) * g.dx();
  return std::sqrt(v);
}

// Plane-wave matching across a rectangular barrier on [0, w] with 2x2
// transfer matrices of (A, B) in A e^{ikx} + B e^{-ikx}.
double matched_transmission(double k, double v0, double w) {
  using C = std::complex<double>;
  const double energy = 0.5 * k * k;
  const C q = std::sqrt(C{2.0 * (energy - v0), 0.0});
  auto m = [](C kk, double x) {
    Eigen::Matrix2cd r;
    const C e = std::exp(C{0.0, 1.0} * kk * x);
    r << e, 1.0 / e, C{0.0, 1.0} * kk * e, -C{0.0, 1.0} * kk / e;
    return r;
  };
  const Eigen::Matrix2cd p = m(k, w).inverse() * m(q, w) * m(q, 0.0).inverse() * m(k, 0.0);
  const C r = -p(1, 0) / p(1, 1);
  const C t = p(0, 0) + p(0, 1) * r;
  return std::norm(t);
}

}  // namespace

TEST(Grid, ValidateRejectsBadSizes) {
  Grid g;
  g.n = 100;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g.n = 32;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g.n = 1024;
  g.dt = -1.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(Propagator, FreeGaussianWidthWithinTenthPercent) {
  Grid g{-128.0, 128.0, 2048, 0.005};
  GridFunction psi = GridFunction::gaussian(g, 0.0, 2.0, 1.0);
  const Propagator p(g);
  for (int s = 0; s < 1000; ++s) p.step(psi);
  const double t = 1000 * g.dt;
  const double sigma0 = 2.0;
  const double expected = sigma0 * std::sqrt(1.0 + std::pow(t / (2.0 * sigma0 * sigma0), 2));
  EXPECT_LT(std::abs(width(psi, g) / expected - 1.0), 1e-3);
  EXPECT_NEAR(analytic::free_gaussian_width(sigma0, t), expected, 1e-12);
  EXPECT_NEAR(mean_x(psi, g), t, 1e-6);
}

TEST(Propagator, NormDriftBelowTolerance) {
  Grid g{-64.0, 64.0, 1024, 0.005};
  std::vector<double> v(g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) v[i] = std::abs(g.x(i)) < 1.0 ? 1.0 : 0.0;
  GridFunction psi = GridFunction::gaussian(g, -20.0, 3.0, 1.5);
  const Propagator p(g, v);
  for (int s = 0; s < 10000; ++s) p.step(psi);
  EXPECT_LT(std::abs(psi.norm_squared(g) - 1.0), 1e-8);
  EXPECT_TRUE(psi.all_finite());
}

TEST(Propagator, StepFunctionMatchesPropagator) {
  Grid g{-32.0, 32.0, 256, 0.01};
  GridFunction a = GridFunction::gaussian(g, 0.0, 2.0, 0.5);
  GridFunction b = a;
  const Propagator p(g);
  p.step(a);
  b = step(b, {}, g);
  for (std::size_t i = 0; i < g.n; ++i) EXPECT_NEAR(std::abs(a.values[i] - b.values[i]), 0.0, 1e-14);
}

TEST(Madelung, PlaneWaveVelocityIsHbarKOverM) {
  Grid g{-32.0, 32.0, 256, 0.01};
  const GridFunction psi = GridFunction::plane_wave(g, 5);
  const auto m = madelung(psi, g);
  const double k = 2.0 * std::numbers::pi * 5.0 / g.length();
  for (std::size_t i = 0; i < g.n; i += 17) {
    ASSERT_TRUE(m.defined[i]);
    EXPECT_NEAR(m.velocity[i], k, 1e-10);
  }
  const auto j = current(psi, g);
  EXPECT_NEAR(j[3], k / g.length(), 1e-10);
}

TEST(Madelung, NodesAreUndefined) {
  Grid g{-32.0, 32.0, 256, 0.01};
  GridFunction psi = GridFunction::zeros(g);
  for (std::size_t i = 0; i < g.n; ++i) psi.values[i] = std::sin(2.0 * std::numbers::pi * (g.x(i) - g.x_min) / g.length());
  const auto m = madelung(psi, g);
  EXPECT_FALSE(m.defined[0]);
  EXPECT_EQ(m.velocity[0], 0.0);
  EXPECT_TRUE(m.defined[g.n / 4]);
}

TEST(SpectralField, CumulativeOfGaussianMatchesErf) {
  Grid g{-32.0, 32.0, 512, 0.01};
  const auto rho = GridFunction::gaussian(g, 1.0, 2.0, 0.0).density();
  const SpectralField f(rho, g);
  EXPECT_NEAR(f.total(), 1.0, 1e-12);
  for (double x : {-3.0, 0.37, 1.0, 4.2}) {
    const double want = 0.5 * (1.0 + std::erf((x - 1.0) / (2.0 * std::sqrt(2.0))));
    EXPECT_NEAR(f.cumulative(x), want, 1e-10) << x;
    const double dens = std::exp(-(x - 1.0) * (x - 1.0) / 8.0) / (2.0 * std::sqrt(2.0 * std::numbers::pi));
    EXPECT_NEAR(f.value(x), dens, 1e-10) << x;
  }
}

TEST(Analytic, BarrierTransmissionMatchesWaveMatching) {
  for (double k : {0.3, 0.9, 1.2, 1.414, 1.6, 2.5}) {
    EXPECT_NEAR(analytic::barrier_transmission(k, 1.0, 1.0), matched_transmission(k, 1.0, 1.0), 1e-10) << k;
  }
}

TEST(Analytic, PacketTransmissionMatchesSimulation) {
  Grid g{-204.8, 204.8, 4096, 0.01};
  std::vector<double> v(g.n, 0.0);
  const double dx = g.dx();
  for (std::size_t i = 0; i < g.n; ++i) {
    const double lo = std::max(g.x(i) - 0.5 * dx, 0.0);
    const double hi = std::min(g.x(i) + 0.5 * dx, 1.0);
    v[i] = hi > lo ? (hi - lo) / dx : 0.0;
  }
  GridFunction psi = GridFunction::gaussian(g, -60.0, 10.0, 1.2);
  const Propagator p(g, v);
  for (int s = 0; s < 10000; ++s) p.step(psi);
  double transmitted = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    if (g.x(i) > 1.0) transmitted += std::norm(psi.values[i]) * dx;
  }
  EXPECT_LT(std::abs(transmitted / analytic::packet_transmission(1.2, 10.0, 1.0, 1.0) - 1.0), 0.01);
}

TEST(Streamlines, FreeGaussianScalesWithWidth) {
  Grid g{-64.0, 64.0, 1024, 0.01};
  GridFunction psi = GridFunction::gaussian(g, 0.0, 2.0, 0.0);
  const Propagator p(g);
  const std::vector<double> seeds = {-2.0, -0.5, 1.0, 3.0};
  StreamlineTracker tracker(g, seeds, 0.0, fluid_sample(psi, g));
  for (int s = 1; s <= 400; ++s) {
    p.step(psi);
    tracker.advance(s * g.dt, fluid_sample(psi, g));
  }
  const double ratio = analytic::free_gaussian_width(2.0, 4.0) / 2.0;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    EXPECT_NEAR(tracker.lines()[k].positions.back(), seeds[k] * ratio, 1e-3) << k;
  }
}

TEST(Streamlines, BatchMatchesTracker) {
  Grid g{-32.0, 32.0, 256, 0.01};
  std::vector<GridFunction> history;
  std::vector<double> times;
  GridFunction psi = GridFunction::gaussian(g, 0.0, 2.0, 1.0);
  const Propagator p(g);
  for (int s = 0; s <= 50; ++s) {
    history.push_back(psi);
    times.push_back(s * g.dt);
    p.step(psi);
  }
  const std::vector<double> seeds = {-1.0, 1.0};
  const auto lines = streamlines(history, times, seeds, g);
  ASSERT_EQ(lines.size(), 2U);
  EXPECT_LT(lines[0].positions.back(), lines[1].positions.back());
  EXPECT_GT(lines[0].positions.back(), -1.0);
}
