#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pnpf/diagnostics.hpp"
#include "pnpf/scheme2.hpp"
#include "support.hpp"

using namespace pnpf;
using pnpf::testing::random_state;
using pnpf::testing::square_problem;

namespace {

ModelParams two_species() {
  ModelParams p;
  p.z = {1, -1};
  p.nu = {1.0, 1.5};
  p.eps = 0.4;
  p.k = 1.3;
  p.c_t = 2.0;
  return p;
}

}  // namespace

TEST(CnAuxiliaries, HandValues) {
  // c: 2 -> 1 gives 0 - (1/2)(1 - 2) - (1/6)(1 - 2)^2 = 1/3
  EXPECT_NEAR(cn_q(0.0, std::log(2.0)), 1.0 / 3.0, 1e-15);
  // T: 2 -> 1 gives 1 + (1 - 2)/2 + (1 - 2)^2/3 = 5/6
  EXPECT_NEAR(cn_r(0.0, std::log(2.0)), 5.0 / 6.0, 1e-15);
}

TEST(CnAuxiliaries, StationaryReduction) {
  for (double a : {-3.0, -0.2, 0.0, 1.7}) {
    EXPECT_DOUBLE_EQ(cn_q(a, a), a);
    EXPECT_NEAR(cn_r(a, a), std::exp(-a), 1e-15 * std::exp(-a));
  }
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(2, 2));
  const GridFunction e(m, 0.3);
  const GridFunction q = compute_Q(e, e), r = compute_R(e, e);
  for (double v : q.values()) EXPECT_DOUBLE_EQ(v, 0.3);
  for (double v : r.values()) EXPECT_NEAR(v, std::exp(-0.3), 1e-15);
}

TEST(CnAuxiliaries, ScalarInequalitiesOnRandomPairs) {
  std::mt19937_64 rng(314159);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  int bad_q = 0, bad_r = 0, bad_xi = 0;
  for (int k = 0; k < 100000; ++k) {
    const double x = d(rng), y = d(rng);  // old, new
    const double ex = std::exp(x), ey = std::exp(y);
    // (Q + 1)(e^y - e^x) >= y e^y - x e^x
    const double lq = (cn_q(y, x) + 1.0) * (ey - ex), rq = y * ey - x * ex;
    const double sq = std::abs(cn_q(y, x) * (ey - ex)) + std::abs(ey - ex) + std::abs(y * ey) + std::abs(x * ex);
    if (!(lq >= rq - 1e-13 * sq)) ++bad_q;
    const double r = cn_r(y, x);
    if (!(r > 0.0)) ++bad_r;
    // xi_new - xi_old >= R (e^{xi_new} - e^{xi_old})
    const double rr = r * (ey - ex);
    if (!(y - x >= rr - 1e-13 * (std::abs(y - x) + std::abs(rr) + r * (ey + ex)))) ++bad_xi;
  }
  EXPECT_EQ(bad_q, 0);
  EXPECT_EQ(bad_r, 0);
  EXPECT_EQ(bad_xi, 0);
}

TEST(Scheme2System, PotentialJumpDrivesDrift) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(2, 1));
  ModelParams p;
  p.z = {1};
  p.nu = {1.0};
  const Problem pb = square_problem(m, p);
  State prev = uniform_state(m, 1, 1.0, 0.0, 1.0);
  State next = prev;
  // psi^{n+1/2} jumps by 0.3 across the interior edge
  prev.psi[1] = 0.2;
  next.psi[1] = 0.4;
  const Scheme2System sys(pb, prev, 0.1);
  const std::vector<EdgeFunction> f = sys.fluxes(sys.pack(next));
  for (std::size_t e = 0; e < m.num_edges(); ++e) {
    if (m.edge(e).interior()) EXPECT_NEAR(f[0][e], -0.3 / 0.5, 1e-14);
    else EXPECT_EQ(f[0][e], 0.0);
  }
  // Flipping the jump flips the flux.
  prev.psi[1] = -0.2;
  next.psi[1] = -0.4;
  const Scheme2System flipped(pb, prev, 0.1);
  const std::vector<EdgeFunction> g = flipped.fluxes(flipped.pack(next));
  for (std::size_t e = 0; e < m.num_edges(); ++e) EXPECT_NEAR(g[0][e], -f[0][e], 1e-14);
}

TEST(Scheme2System, AnalyticJacobianMatchesFiniteDifferences) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(4, 4));
  std::mt19937_64 rng(4242);
  ModelParams p = two_species();
  p.fixed_charge.assign(m.num_volumes(), 0.0);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  for (double& q : p.fixed_charge) q = d(rng);
  const Problem pb = square_problem(m, p, 0.3, -0.4);
  for (int trial = 0; trial < 5; ++trial) {
    const State prev = random_state(m, 2, rng);
    const Scheme2System sys(pb, prev, 0.05);
    const Vector x = sys.pack(random_state(m, 2, rng));
    EXPECT_LT(pnpf::testing::fd_jacobian_error(sys, x), 1e-6);
  }
}

TEST(StepScheme2, StationaryStateIsAFixedPoint) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(4, 4));
  const ModelParams p = two_species();
  const Problem pb = square_problem(m, p, -0.1, -0.1);
  const State s = uniform_state(m, 2, 0.8, -0.1, 1.0);
  const StepResult r = step_scheme2_once(pb, s, 0.1, NewtonConfig{});
  for (std::size_t i = 0; i < m.num_volumes(); ++i) {
    EXPECT_NEAR(r.state.c[1][i], 0.8, 1e-14);
    EXPECT_NEAR(r.state.psi[i], -0.1, 1e-14);
    EXPECT_NEAR(r.state.T[i], 1.0, 1e-14);
  }
  EXPECT_NEAR(r.report.production, 0.0, 1e-14);
  EXPECT_NEAR(discrete_entropy(r.state, p).total, discrete_entropy(s, p).total, 1e-14);
}

TEST(StepScheme2, RandomStateConservesMassAndGainsEntropy) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(8, 8));
  std::mt19937_64 rng(99);
  const ModelParams p = two_species();
  const Problem pb = square_problem(m, p, 0.0, 0.5);
  Scheme2Stepper stepper(pb, NewtonConfig{});
  State s = random_state(m, 2, rng);
  for (int n = 0; n < 5; ++n) {
    const StepResult r = stepper.step(s, 0.02);
    EXPECT_FALSE(r.report.fallback);
    for (std::size_t l = 0; l < 2; ++l)
      EXPECT_NEAR(integral(r.state.c[l]), integral(s.c[l]), 1e-12 * integral(s.c[l]));
    EXPECT_GE(r.report.production, 0.0);
    const double s0 = discrete_entropy(s, p).total, s1 = discrete_entropy(r.state, p).total;
    EXPECT_GE(s1 - s0, r.report.dt * r.report.production - 1e-8 * std::abs(s0));
    s = r.state;
  }
}

TEST(StepScheme2, NewtonConvergesOnRandomState) {
  const Mesh m = build_uniform_grid(GeometrySpec::unit_square(6, 6));
  std::mt19937_64 rng(5);
  const Problem pb = square_problem(m, two_species(), 0.2, 0.0);
  const State s = random_state(m, 2, rng);
  const StepResult r = step_scheme2_once(pb, s, 0.05, NewtonConfig{});
  EXPECT_LE(r.report.newton_iterations, 15);
  const Scheme2System sys(pb, s, 0.05);
  EXPECT_LE(sys.residual(sys.pack(r.state)).lpNorm<Eigen::Infinity>(), 1e-9);
}
