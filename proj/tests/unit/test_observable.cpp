#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "bdclt/chain.hpp"
#include "bdclt/errors.hpp"
#include "bdclt/observable.hpp"

namespace {

using namespace bdclt;

StationaryMeasure law(const ChainSpec& s, std::size_t m) {
  const auto chain = build_chain(s);
  return normalize(chain, stationary_weights(chain, m));
}

// Dense transition matrix of the chain restricted to 0..M, dropping the step out of M.
Eigen::MatrixXd dense_p(const BirthDeathChain& chain, std::size_t m, bool reflect) {
  const auto n = static_cast<Eigen::Index>(m + 1);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t x = 0; x <= m; ++x) {
    const auto i = static_cast<Eigen::Index>(x);
    if (x + 1 <= m) p(i, i + 1) = chain.p(x);
    if (x > 0) p(i, i - 1) = chain.q(x);
  }
  if (reflect) p(n - 1, n - 2) = 1.0;
  return p;
}

std::vector<double> random_compact(std::mt19937_64& gen, std::size_t length, std::size_t support) {
  std::normal_distribution<double> z;
  std::vector<double> f(length, 0.0);
  for (std::size_t x = 0; x < support; ++x) f[x] = z(gen);
  return f;
}

TEST(Center, ConstantBecomesZero) {
  const auto pi = law(ConstantDrift{1.0 / 3.0}, 100);
  const auto v = center(constant_observable(1.0, 100), pi);
  EXPECT_TRUE(v.centered);
  for (double x : v.values) EXPECT_NEAR(x, 0.0, 1e-15);
  EXPECT_NEAR(v.tail_value, 0.0, 1e-15);
}

TEST(Center, IndicatorOfZero) {
  const auto pi = law(ConstantDrift{1.0 / 3.0}, 100);
  const auto v = center(indicator_observable(0, 100), pi);
  EXPECT_NEAR(v(0), 0.75, 1e-12);
  EXPECT_NEAR(v(1), -0.25, 1e-12);
  EXPECT_NEAR(v(5000), -0.25, 1e-12);
  EXPECT_NEAR(v.mean_pi, 0.25, 1e-12);
}

TEST(Center, Idempotent) {
  const auto pi = law(LampertiDrift{0.25, 0.5}, 2000);
  const auto once = center(table_observable({1.0, -2.0, 0.5, 3.0}), pi);
  const auto twice = center(once, pi);
  for (std::size_t x = 0; x < once.values.size(); ++x) EXPECT_NEAR(once(x), twice(x), 1e-15);
  EXPECT_NEAR(std::abs(cumulative_total(twice, pi)), 0.0, 1e-10 + pi.tail_bound);
}

TEST(Center, RejectsObservableOutsideL2) {
  // V(x) = 2^{x/2} against pi ~ 2^{-x}: V^2 pi does not decay.
  const auto pi = law(ConstantDrift{1.0 / 3.0}, 60);
  std::vector<double> vals(61);
  for (std::size_t x = 0; x <= 60; ++x) vals[x] = std::pow(2.0, 0.5 * double(x));
  EXPECT_THROW(center(table_observable(vals), pi), NotInL2);
}

TEST(Grad, ConstantAndIdentity) {
  const std::vector<double> c(10, 3.0);
  const auto gc = grad(c);
  for (std::size_t x = 0; x + 1 < gc.size(); ++x) EXPECT_EQ(gc[x], 0.0);
  std::vector<double> id(10);
  for (std::size_t x = 0; x < 10; ++x) id[x] = double(x);
  const auto gi = grad(id);
  for (std::size_t x = 0; x + 1 < gi.size(); ++x) EXPECT_EQ(gi[x], 1.0);
}

TEST(Grad, IntegrationByParts) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_compact(gen, 40, 30);
    const auto g = random_compact(gen, 40, 30);
    const auto df = grad(f);
    const auto dg = grad_dual(g);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t x = 0; x < 40; ++x) lhs += df[x] * g[x];
    for (std::size_t x = 1; x < 40; ++x) rhs += f[x] * dg[x];
    rhs -= f[0] * g[0];
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(DirichletForm, ConstantIsZeroAndScalesQuadratically) {
  const auto chain = build_chain(LampertiDrift{0.25, 0.5});
  const auto pi = law(LampertiDrift{0.25, 0.5}, 300);
  EXPECT_NEAR(dirichlet_form(std::vector<double>(301, 2.5), chain, pi), 0.0, 1e-15);
  EXPECT_NEAR(e0_form(std::vector<double>(301, 2.5), pi), 0.0, 1e-15);
  std::mt19937_64 gen(11);
  const auto f = random_compact(gen, 301, 100);
  std::vector<double> g(f);
  for (double& x : g) x *= -3.7;
  EXPECT_NEAR(dirichlet_form(g, chain, pi), 3.7 * 3.7 * dirichlet_form(f, chain, pi),
              1e-12 * dirichlet_form(g, chain, pi));
}

TEST(DirichletForm, MatchesMatrixForm) {
  const auto chain = build_chain(ConstantDrift{1.0 / 3.0});
  const std::size_t m = 60;
  const auto pi = law(ConstantDrift{1.0 / 3.0}, m);
  const Eigen::MatrixXd p = dense_p(chain, m, false);
  std::mt19937_64 gen(3);
  auto check = [&](const std::vector<double>& phi) {
    Eigen::VectorXd f(m + 1), w(m + 1);
    for (std::size_t x = 0; x <= m; ++x) {
      f(Eigen::Index(x)) = phi[x];
      w(Eigen::Index(x)) = pi.pi(x);
    }
    const Eigen::VectorXd lf = f - p * f;
    const double matrix_form = (w.array() * lf.array() * f.array()).sum();
    EXPECT_NEAR(dirichlet_form(phi, chain, pi), matrix_form, 1e-10);
  };
  std::vector<double> ind(m + 1, 0.0);
  ind[0] = 1.0;
  check(ind);
  // By hand: edge (0,1) carries pi(0) p_0 = 1/4.
  EXPECT_NEAR(dirichlet_form(ind, chain, pi), 0.25, 1e-12);
  for (int t = 0; t < 20; ++t) check(random_compact(gen, m + 1, 40));
}

TEST(E0Form, ComparisonConstants) {
  const auto chain = build_chain(LampertiDrift{0.25, 0.5});
  const std::size_t m = 500;
  const auto pi = law(LampertiDrift{0.25, 0.5}, m);
  const auto k = form_constants(chain, m);
  EXPECT_NEAR(k.c1, 0.25, 1e-15);
  EXPECT_EQ(k.c2, 1.0);
  // Loose constants: 1/2 - sup c_x and (1/2 + sup c_x) + 1/2.
  EXPECT_GE(k.c1, 0.5 - 0.25 - 1e-15);
  EXPECT_LE(k.c2, 0.5 + 0.25 + 0.5);
  std::mt19937_64 gen(5);
  for (int t = 0; t < 100; ++t) {
    const auto phi = random_compact(gen, m + 1, 200);
    const double ratio = dirichlet_form(phi, chain, pi) / e0_form(phi, pi);
    EXPECT_GE(ratio, k.c1 - 1e-12);
    EXPECT_LE(ratio, k.c2 + 1e-12);
  }
}

TEST(E0Form, WitnessHasSingleBoundaryTerm) {
  const std::size_t m = 100, n = 30;
  const auto pi = law(LampertiDrift{0.25, 0.5}, m);
  std::vector<double> f(m + 1, 0.0);
  for (std::size_t x = 1; x <= n; ++x) f[x] = 1.0 / std::sqrt(double(n));
  // Gradient lives on edges (0,1) and (n, n+1) only.
  const double expected = (pi.pi(0) + pi.pi(n)) / double(n);
  EXPECT_NEAR(e0_form(f, pi), expected, 1e-15);
}

TEST(EulerLagrange, ZeroObservable) {
  const auto pi = law(LampertiDrift{0.25, 0.5}, 200);
  const auto g = euler_lagrange_gradient(constant_observable(0.0, 200), pi);
  for (double x : g) EXPECT_EQ(x, 0.0);
}

TEST(EulerLagrange, BoundaryCondition) {
  const auto pi = law(LampertiDrift{0.25, 0.5}, 2000);
  const auto v = center(table_observable({2.0, -1.0, 4.0, 0.5, -3.0}), pi);
  const auto g = euler_lagrange_gradient(v, pi);
  EXPECT_EQ(g[0], -v(0));
}

TEST(EulerLagrange, VanishesBeyondCompactSupport) {
  const std::size_t m = 4000;
  const auto pi = law(LampertiDrift{0.25, 0.5}, m);
  // Exactly centered compact V: V(0) pi(0) = -V(1) pi(1).
  Observable v = table_observable({1.0 / pi.pi(0), -1.0 / pi.pi(1)});
  const auto g = euler_lagrange_gradient(v, pi);
  for (std::size_t x = 2; x <= m; ++x) ASSERT_EQ(g[x] * pi.pi(x), 0.0) << x;
}

TEST(EulerLagrange, RejectsUncentered) {
  const auto pi = law(ConstantDrift{0.3}, 100);
  EXPECT_THROW(euler_lagrange_gradient(indicator_observable(0, 100), pi), NotCentered);
}

TEST(EulerLagrange, VariationalOptimality) {
  const std::size_t m = 3000;
  const auto pi = law(LampertiDrift{0.25, 0.5}, m);
  const auto v = center(table_observable({1.0, -0.5, 2.0, 0.0, -1.0, 0.25}), pi);
  const auto phi = integrate_gradient(euler_lagrange_gradient(v, pi));
  const double best = e0_functional(v, phi, pi);
  std::mt19937_64 gen(42);
  for (int t = 0; t < 50; ++t) {
    const auto delta = random_compact(gen, m + 1, 50);
    std::vector<double> trial(phi);
    for (std::size_t x = 0; x <= m; ++x) trial[x] += 1e-4 * delta[x];
    EXPECT_LE(e0_functional(v, trial, pi), best + 1e-8);
  }
}

TEST(PhiStar, ZeroObservableIsFinite) {
  const auto pi = law(ConstantDrift{0.3}, 512);
  const auto sched = doubling_schedule(512);
  const auto r = phi_star(constant_observable(0.0, 512), pi, sched);
  for (double s : r.phi_star_partial) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(r.verdict, DoublingVerdict::Finite);
}

TEST(PhiStar, TwoExpressionsAgree) {
  const std::size_t m = 1024;
  const auto pi = law(LampertiDrift{0.25, 0.5}, m);
  const auto v = center(table_observable({0.3, 1.0, -2.0, 0.7}), pi);
  const auto r = phi_star(v, pi, doubling_schedule(m));
  double via_gradient = 0.0;
  for (std::size_t x = 0; x <= m; ++x) via_gradient += r.gradient[x] * r.gradient[x] * pi.pi(x);
  EXPECT_NEAR(via_gradient, r.phi_star_partial.back(), 1e-10 * via_gradient);
}

TEST(PhiStar, CompactIsFiniteAndNondecreasing) {
  const std::size_t m = 4096;
  const auto pi = law(LampertiDrift{0.25, 0.5}, m);
  const auto v = center(table_observable({1.0, 2.0, -1.0}), pi);
  const auto r = phi_star(v, pi, doubling_schedule(m));
  for (std::size_t i = 1; i < r.phi_star_partial.size(); ++i) {
    EXPECT_GE(r.phi_star_partial[i], r.phi_star_partial[i - 1]);
  }
  EXPECT_EQ(r.verdict, DoublingVerdict::Finite);
  EXPECT_LT(std::abs(r.cumulative_total), 1e-6);
}

TEST(PhiStar, SqrtPiIsDivergentWithUnitSlope) {
  const std::size_t m = 20000;
  const auto pi = law(LampertiDrift{0.25, 0.5}, m);
  const auto v = observable_from_cumulative(sqrt_pi_cumulative(pi), pi);
  const std::vector<std::size_t> sched{1250, 2500, 5000, 10000};
  const auto r = phi_star(v, pi, sched);
  EXPECT_EQ(r.verdict, DoublingVerdict::Divergent);
  for (std::size_t i = 0; i < sched.size(); ++i) {
    EXPECT_NEAR(r.phi_star_partial[i], double(sched[i]) + 1.0, 1e-6 * double(sched[i]));
  }
}

TEST(PhiStar, QuadraticScaling) {
  const std::size_t m = 2048;
  const auto pi = law(LampertiDrift{0.25, 0.5}, m);
  const auto v = center(table_observable({1.0, -3.0, 2.0, 0.5}), pi);
  Observable w = v;
  for (double& x : w.values) x *= 2.5;
  w.tail_value *= 2.5;
  const auto sched = doubling_schedule(m);
  const double a = phi_star(v, pi, sched).phi_star_partial.back();
  const double b = phi_star(w, pi, sched).phi_star_partial.back();
  EXPECT_NEAR(b, 6.25 * a, 1e-10 * b);
}

TEST(ObservableFromCumulative, Telescoping) {
  const auto pi = law(ConstantDrift{0.3}, 50);
  const auto zero = observable_from_cumulative(std::vector<double>(51, 0.0), pi);
  for (double x : zero.values) EXPECT_EQ(x, 0.0);
  std::vector<double> cdf(51);
  double s = 0.0;
  for (std::size_t x = 0; x <= 50; ++x) cdf[x] = (s += pi.pi(x));
  const auto one = observable_from_cumulative(cdf, pi);
  // Differences of a cdf near 1 lose digits once pi(x) is small; check the bulk.
  for (std::size_t x = 0; x <= 10; ++x) EXPECT_NEAR(one(x), 1.0, 1e-10);
}

TEST(Sigma2, ZeroObservable) {
  const auto chain = build_chain(ConstantDrift{0.3});
  EXPECT_EQ(sigma2_resolvent(constant_observable(0.0, 10), chain, 100).sigma2, 0.0);
}

TEST(Sigma2, IndicatorOnGapChain) {
  const auto chain = build_chain(ConstantDrift{1.0 / 3.0});
  const auto pi = law(ConstantDrift{1.0 / 3.0}, 400);
  const auto v = center(indicator_observable(0, 400), pi);
  const auto r = sigma2_resolvent(v, chain, 200);
  EXPECT_LT(r.error_estimate, 1e-4 * r.sigma2);
  EXPECT_NEAR(r.sigma2, 0.375, 1e-9);
  EXPECT_GE(r.sigma2, 0.0);
}

TEST(Sigma2, MatchesDenseSolve) {
  const std::size_t m = 40;
  const auto chain = build_chain(LampertiDrift{0.25, 0.5});
  Eigen::MatrixXd p = dense_p(chain, m, true);
  // Stationary law of the reflected truncation.
  Eigen::VectorXd w(m + 1);
  auto lw = stationary_weights(chain, m).log_weights;
  lw[m] += chain.log_q(m);
  for (std::size_t x = 0; x <= m; ++x) w(Eigen::Index(x)) = std::exp(lw[x]);
  w /= w.sum();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m + 1);
  v(0) = 1.0;
  v(3) = -2.0;
  v.array() -= w.dot(v);
  // Pinned solve: replace row 0 with phi(0) = 0.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m + 1, m + 1) - p;
  Eigen::VectorXd b = v;
  a.row(0).setZero();
  a(0, 0) = 1.0;
  b(0) = 0.0;
  Eigen::VectorXd phi = a.fullPivLu().solve(b);
  const double expected = 2.0 * (w.array() * v.array() * phi.array()).sum() -
                          (w.array() * v.array() * v.array()).sum();
  Observable obs = table_observable({1.0, 0.0, 0.0, -2.0});
  EXPECT_NEAR(sigma2_truncated(obs, chain, m), expected, 1e-10 * std::abs(expected));
}

TEST(Sigma2, QuadraticScalingAndPositivity) {
  const auto chain = build_chain(LampertiDrift{0.25, 0.5});
  const auto v = table_observable({1.0, -0.5, 0.25});
  const auto w = table_observable({-3.0, 1.5, -0.75});
  const double a = sigma2_truncated(v, chain, 3000);
  const double b = sigma2_truncated(w, chain, 3000);
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(b, 9.0 * a, 1e-10 * b);
}

TEST(Sigma2, VerdictsAgreeWithPhiStar) {
  // Finite Phi* gives a doubling-stable sigma2; the sqrt(pi) profile, capped,
  // keeps growing with the cap level.
  const auto chain = build_chain(LampertiDrift{0.25, 0.5});
  const std::size_t m = 8192;
  const auto pi = normalize(chain, stationary_weights(chain, m));
  const auto compact = center(table_observable({1.0, 2.0, -1.0}), pi);
  EXPECT_EQ(phi_star(compact, pi, doubling_schedule(m)).verdict, DoublingVerdict::Finite);
  const auto s = sigma2_resolvent(compact, chain, 2048);
  EXPECT_LT(s.error_estimate, 1e-3 * s.sigma2);

  const auto g = observable_from_cumulative(sqrt_pi_cumulative(pi), pi);
  std::vector<double> sig;
  for (std::size_t cap : {256, 512, 1024, 2048}) {
    Observable capped = g;
    capped.values.resize(cap + 1);
    sig.push_back(sigma2_truncated(capped, chain, 4096));
  }
  for (std::size_t i = 1; i < sig.size(); ++i) EXPECT_GT(sig[i] / sig[i - 1], 1.5);
}

TEST(ClassifyDoubling, Rules) {
  EXPECT_EQ(classify_doubling(std::vector<double>{1.0}), DoublingVerdict::Inconclusive);
  EXPECT_EQ(classify_doubling(std::vector<double>{1.0, 1.0005}), DoublingVerdict::Finite);
  EXPECT_EQ(classify_doubling(std::vector<double>{1.0, 2.0, 4.0, 8.0}), DoublingVerdict::Divergent);
  EXPECT_EQ(classify_doubling(std::vector<double>{1.0, 2.0, 2.5, 3.0}), DoublingVerdict::Inconclusive);
}

}  // namespace
