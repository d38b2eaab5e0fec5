#include "bdclt/observable.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "bdclt/errors.hpp"
#include "bdclt/numeric.hpp"

namespace bdclt {

namespace {

/// Probability mass of the normalized measure beyond its truncation.
double tail_mass(const StationaryMeasure& pi) {
  if (!(pi.tail_bound > 0.0)) return 0.0;
  return std::exp(std::log(pi.tail_bound) - pi.log_z);
}

void require_normalized(const StationaryMeasure& pi) {
  if (!pi.normalized) throw std::invalid_argument("stationary measure must be normalized");
}

}  // namespace

Observable constant_observable(double value, std::size_t truncation) {
  Observable v;
  v.values.assign(truncation + 1, value);
  v.tail_value = value;
  return v;
}

Observable indicator_observable(std::size_t state, std::size_t truncation) {
  Observable v;
  v.values.assign(std::max(truncation, state) + 1, 0.0);
  v.values[state] = 1.0;
  return v;
}

Observable table_observable(std::vector<double> values, double tail_value) {
  if (values.empty()) throw DomainError("observable table must not be empty");
  Observable v;
  v.values = std::move(values);
  v.tail_value = tail_value;
  return v;
}

double l2_norm_sq(const Observable& v, const StationaryMeasure& pi) {
  require_normalized(pi);
  KahanSum acc;
  const std::size_t m = pi.truncation();
  for (std::size_t x = 0; x <= m; ++x) acc += v(x) * v(x) * pi.pi(x);
  acc += v.tail_value * v.tail_value * tail_mass(pi);
  return acc.value();
}

Observable center(const Observable& v, const StationaryMeasure& pi, double l2_growth_tol) {
  require_normalized(pi);
  const std::size_t m = pi.truncation();

  KahanSum half_sq;
  KahanSum full_sq;
  KahanSum mean;
  for (std::size_t x = 0; x <= m; ++x) {
    const double w = pi.pi(x);
    const double sq = v(x) * v(x) * w;
    if (x <= m / 2) half_sq += sq;
    full_sq += sq;
    mean += v(x) * w;
  }
  mean += v.tail_value * tail_mass(pi);
  const double s_full = full_sq.value();
  if (m >= 2 && s_full > 0.0) {
    const double growth = (s_full - half_sq.value()) / s_full;
    if (growth > l2_growth_tol) {
      std::ostringstream os;
      os << "sum V^2 pi grows by " << growth << " (relative) between M=" << m / 2 << " and M=" << m;
      throw NotInL2(os.str());
    }
  }

  Observable out = v;
  const double mu = mean.value();
  for (double& val : out.values) val -= mu;
  out.tail_value -= mu;
  out.mean_pi = mu;
  out.centered = true;
  return out;
}

std::vector<double> grad(std::span<const double> f) {
  std::vector<double> g(f.size());
  for (std::size_t x = 0; x < f.size(); ++x) g[x] = (x + 1 < f.size() ? f[x + 1] : 0.0) - f[x];
  return g;
}

std::vector<double> grad_dual(std::span<const double> f) {
  std::vector<double> g(f.size());
  for (std::size_t x = 0; x < f.size(); ++x) g[x] = (x > 0 ? f[x - 1] : 0.0) - f[x];
  return g;
}

double dirichlet_form(std::span<const double> phi, const BirthDeathChain& chain,
                      const StationaryMeasure& pi) {
  require_normalized(pi);
  const std::size_t n = std::min(phi.size(), pi.log_weights.size());
  KahanSum acc;
  for (std::size_t x = 0; x < n; ++x) {
    const double w = pi.pi(x);
    if (x + 1 < n) {
      const double d = phi[x + 1] - phi[x];
      acc += 0.5 * chain.p(x) * d * d * w;
    }
    if (x > 0) {
      const double d = phi[x - 1] - phi[x];
      acc += 0.5 * chain.q(x) * d * d * w;
    }
  }
  return acc.value();
}

double e0_form(std::span<const double> phi, const StationaryMeasure& pi) {
  require_normalized(pi);
  const std::size_t n = std::min(phi.size(), pi.log_weights.size());
  KahanSum acc;
  for (std::size_t x = 0; x + 1 < n; ++x) {
    const double d = phi[x + 1] - phi[x];
    acc += d * d * pi.pi(x);
  }
  return acc.value();
}

FormConstants form_constants(const BirthDeathChain& chain, std::size_t truncation) {
  FormConstants k{1.0, 0.0};
  for (std::size_t x = 0; x < std::max<std::size_t>(truncation, 1); ++x) {
    k.c1 = std::min(k.c1, chain.p(x));
    k.c2 = std::max(k.c2, chain.p(x));
  }
  return k;
}

double cumulative_total(const Observable& v, const StationaryMeasure& pi) {
  require_normalized(pi);
  KahanSum acc;
  for (std::size_t x = 0; x <= pi.truncation(); ++x) acc += v(x) * pi.pi(x);
  return acc.value();
}

std::vector<double> centered_cumulative(const Observable& v, const StationaryMeasure& pi,
                                        double centering_tol) {
  require_normalized(pi);
  const std::size_t m = pi.truncation();
  std::vector<double> terms(m + 1);
  for (std::size_t x = 0; x <= m; ++x) terms[x] = v(x) * pi.pi(x);
  const double tail_term = v.tail_value * tail_mass(pi);

  std::vector<double> forward(m + 1);
  std::vector<double> forward_abs(m + 1);
  {
    KahanSum s;
    KahanSum a;
    for (std::size_t x = 0; x <= m; ++x) {
      s += terms[x];
      a += std::abs(terms[x]);
      forward[x] = s.value();
      forward_abs[x] = a.value();
    }
  }
  const double total_abs = forward_abs[m] + std::abs(tail_term);
  const double total = forward[m] + tail_term;
  if (std::abs(total) > centering_tol * total_abs) {
    std::ostringstream os;
    os << "observable is not centered: sum V pi = " << total << " (sum |V pi| = " << total_abs << ")";
    throw NotCentered(os.str());
  }

  // C(x) = -sum_{y > x} V(y) pi(y) when that side carries less absolute mass.
  std::vector<double> c(m + 1);
  KahanSum back(tail_term);
  KahanSum back_abs(std::abs(tail_term));
  for (std::size_t x = m + 1; x-- > 0;) {
    const double b_abs = back_abs.value();
    c[x] = b_abs < forward_abs[x] ? -back.value() : forward[x];
    back += terms[x];
    back_abs += std::abs(terms[x]);
  }
  return c;
}

std::vector<double> euler_lagrange_gradient(const Observable& v, const StationaryMeasure& pi) {
  const auto c = centered_cumulative(v, pi);
  std::vector<double> g(c.size());
  for (std::size_t x = 0; x < c.size(); ++x) {
    // log form: pi(x) may underflow where C(x) is already exactly zero
    g[x] = c[x] == 0.0 ? 0.0 : -std::copysign(std::exp(std::log(std::abs(c[x])) - pi.log_pi(x)), c[x]);
  }
  g[0] = -v(0);
  return g;
}

std::vector<double> integrate_gradient(std::span<const double> gradient, double phi0) {
  std::vector<double> phi(gradient.size());
  if (phi.empty()) return phi;
  phi[0] = phi0;
  for (std::size_t x = 1; x < phi.size(); ++x) phi[x] = phi[x - 1] + gradient[x - 1];
  return phi;
}

double e0_functional(const Observable& v, std::span<const double> phi, const StationaryMeasure& pi) {
  KahanSum inner;
  const std::size_t n = std::min(phi.size(), pi.log_weights.size());
  for (std::size_t x = 0; x < n; ++x) inner += v(x) * phi[x] * pi.pi(x);
  return 2.0 * inner.value() - e0_form(phi.first(n), pi);
}

std::string_view to_string(DoublingVerdict verdict) noexcept {
  switch (verdict) {
    case DoublingVerdict::Finite: return "Finite";
    case DoublingVerdict::Divergent: return "Divergent";
    case DoublingVerdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

DoublingVerdict classify_doubling(std::span<const double> values, const DoublingRule& rule) {
  const std::size_t n = values.size();
  if (n < 2) return DoublingVerdict::Inconclusive;
  const double last = values[n - 1];
  const double prev = values[n - 2];
  if (std::abs(last - prev) <= rule.finite_rel_change * std::max(std::abs(last), std::abs(prev))) {
    return DoublingVerdict::Finite;
  }
  if (n >= rule.sustained + 1) {
    bool growing = true;
    for (std::size_t i = n - rule.sustained; i < n; ++i) {
      if (!(values[i - 1] > 0.0 && values[i] / values[i - 1] > rule.divergent_ratio)) {
        growing = false;
        break;
      }
    }
    if (growing) return DoublingVerdict::Divergent;
  }
  return DoublingVerdict::Inconclusive;
}

std::vector<std::size_t> doubling_schedule(std::size_t largest, std::size_t smallest) {
  std::vector<std::size_t> s;
  for (std::size_t m = largest; m >= std::max<std::size_t>(smallest, 1); m /= 2) {
    s.push_back(m);
    if (m == 1) break;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

H1MinusReport phi_star(const Observable& v, const StationaryMeasure& pi,
                       std::span<const std::size_t> schedule, const DoublingRule& rule) {
  if (!std::is_sorted(schedule.begin(), schedule.end()) ||
      (!schedule.empty() && schedule.back() > pi.truncation())) {
    throw std::invalid_argument("phi_star: schedule must be ascending and within the truncation");
  }
  H1MinusReport r;
  r.schedule.assign(schedule.begin(), schedule.end());
  r.gradient = euler_lagrange_gradient(v, pi);
  r.cumulative_total = cumulative_total(v, pi);

  const auto c = centered_cumulative(v, pi);
  KahanSum acc;
  std::size_t next = 0;
  const std::size_t last = schedule.empty() ? 0 : schedule.back();
  for (std::size_t x = 0; x <= last && next < schedule.size(); ++x) {
    if (c[x] != 0.0) acc += std::exp(2.0 * std::log(std::abs(c[x])) - pi.log_pi(x));
    while (next < schedule.size() && schedule[next] == x) {
      r.phi_star_partial.push_back(acc.value());
      ++next;
    }
  }
  r.gradient.resize(last + 1);
  r.verdict = classify_doubling(r.phi_star_partial, rule);
  return r;
}

Observable observable_from_cumulative(std::span<const double> cumulative,
                                      const StationaryMeasure& pi) {
  require_normalized(pi);
  const std::size_t n = std::min(cumulative.size(), pi.log_weights.size());
  Observable v;
  v.values.resize(n);
  double prev = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    v.values[x] = (cumulative[x] - prev) * std::exp(-pi.log_pi(x));
    prev = cumulative[x];
  }
  return v;
}

std::vector<double> sqrt_pi_cumulative(const StationaryMeasure& pi) {
  require_normalized(pi);
  std::vector<double> g(pi.log_weights.size());
  for (std::size_t x = 0; x < g.size(); ++x) g[x] = std::exp(0.5 * pi.log_pi(x));
  return g;
}

namespace {

struct TruncatedPoisson {
  std::vector<double> pi;   // stationary law of the reflected truncation
  std::vector<double> vc;   // V recentered under pi
  std::vector<double> phi;  // pinned solution, <phi>_pi = 0
  double shift = 0.0;
};

TruncatedPoisson solve_truncated(const Observable& v, const BirthDeathChain& chain,
                                 std::size_t m) {
  if (m < 1) throw std::invalid_argument("sigma2: truncation must be at least 1");
  TruncatedPoisson s;
  auto lw = stationary_weights(chain, m).log_weights;
  lw[m] += chain.log_q(m);  // P_M(M, M-1) = 1
  const double log_z = log_sum_exp(lw);
  s.pi.resize(m + 1);
  for (std::size_t x = 0; x <= m; ++x) s.pi[x] = std::exp(lw[x] - log_z);

  KahanSum mean;
  for (std::size_t x = 0; x <= m; ++x) mean += v(x) * s.pi[x];
  s.shift = mean.value();
  s.vc.resize(m + 1);
  for (std::size_t x = 0; x <= m; ++x) s.vc[x] = v(x) - s.shift;

  // Edge conductances w_x = pi(x) P(x, x+1); the pinned system phi(0) = 0 is the
  // weighted Laplacian on 1..M. Elimination tracks the series conductance g_x
  // so the pivots d_x = w_x + g_x are formed without cancellation.
  std::vector<double> w(m + 1, 0.0);
  for (std::size_t x = 0; x < m; ++x) w[x] = std::exp(lw[x] + chain.log_p(x) - log_z);

  std::vector<double> pivot(m + 1);
  std::vector<double> rhs(m + 1);
  double g = w[0];
  double prev_rhs = 0.0;
  for (std::size_t x = 1; x <= m; ++x) {
    if (x > 1) g = w[x - 1] / (1.0 + w[x - 1] / g);  // series w_{x-1}, g without forming w * g
    pivot[x] = w[x] + g;
    if (!(pivot[x] > 0.0) || !std::isfinite(pivot[x])) {
      throw SingularSystem("truncated Poisson system has a non-positive pivot at x = " +
                           std::to_string(x) + " (stationary weights underflow; lower the truncation)");
    }
    // rhs'_x = (b_x + w_{x-1} rhs'_{x-1}) / d_x with rhs'_0 = phi(0) = 0 absorbed.
    rhs[x] = (s.pi[x] * s.vc[x] + (x > 1 ? w[x - 1] * prev_rhs : 0.0)) / pivot[x];
    prev_rhs = rhs[x];
  }
  s.phi.assign(m + 1, 0.0);
  s.phi[m] = rhs[m];
  for (std::size_t x = m; x-- > 1;) s.phi[x] = rhs[x] + (w[x] / pivot[x]) * s.phi[x + 1];

  KahanSum phi_mean;
  for (std::size_t x = 0; x <= m; ++x) phi_mean += s.phi[x] * s.pi[x];
  for (double& f : s.phi) f -= phi_mean.value();
  return s;
}

}  // namespace

std::vector<double> poisson_solution(const Observable& v, const BirthDeathChain& chain,
                                     std::size_t truncation) {
  return solve_truncated(v, chain, truncation).phi;
}

double sigma2_truncated(const Observable& v, const BirthDeathChain& chain, std::size_t truncation,
                        double* recentering_shift) {
  const auto s = solve_truncated(v, chain, truncation);
  KahanSum cross;
  KahanSum sq;
  for (std::size_t x = 0; x <= truncation; ++x) {
    cross += s.vc[x] * s.phi[x] * s.pi[x];
    sq += s.vc[x] * s.vc[x] * s.pi[x];
  }
  if (recentering_shift) *recentering_shift = s.shift;
  return 2.0 * cross.value() - sq.value();
}

Sigma2Result sigma2_resolvent(const Observable& v, const BirthDeathChain& chain,
                              std::size_t truncation) {
  Sigma2Result r;
  r.truncation = truncation;
  r.sigma2 = sigma2_truncated(v, chain, truncation, &r.recentering_shift);
  r.sigma2_doubled = sigma2_truncated(v, chain, 2 * truncation);
  r.error_estimate = std::abs(r.sigma2_doubled - r.sigma2);
  return r;
}

}  // namespace bdclt
