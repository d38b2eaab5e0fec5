#pragma once

// Observables V on the state space and the variational H_{-1} machinery:
// discrete gradients, Dirichlet forms, the Euler-Lagrange maximizer, the
// finiteness certificate Phi* and the asymptotic variance via a truncated
// Poisson solve.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bdclt/chain.hpp"

namespace bdclt {

/// V(x) = values[x] for x <= M, V(x) = tail_value beyond.
struct Observable {
  std::vector<double> values;
  double tail_value = 0.0;
  double mean_pi = 0.0;
  bool centered = false;

  double operator()(std::size_t x) const noexcept {
    return x < values.size() ? values[x] : tail_value;
  }
  std::size_t truncation() const noexcept { return values.size() - 1; }
};

Observable constant_observable(double value, std::size_t truncation);
Observable indicator_observable(std::size_t state, std::size_t truncation);
Observable table_observable(std::vector<double> values, double tail_value = 0.0);

/// Sum of V(x)^2 pi(x) over 0..M plus the tail contribution.
double l2_norm_sq(const Observable& v, const StationaryMeasure& pi);

/// V - <V>_pi (mean taken over the truncated law including the tail mass).
/// Throws NotInL2 when sum V^2 pi grows by more than `l2_growth_tol` (relative)
/// between M/2 and M.
Observable center(const Observable& v, const StationaryMeasure& pi, double l2_growth_tol = 1e-3);

/// grad f(x) = f(x+1) - f(x); f is extended by zero past its last index.
std::vector<double> grad(std::span<const double> f);
/// grad_dual f(x) = f(x-1) - f(x); f(-1) = 0.
std::vector<double> grad_dual(std::span<const double> f);

/// (1/2) sum_x sum_y p(x,y) (phi(y) - phi(x))^2 pi(x) over the chain restricted to 0..M
/// (transitions leaving 0..M are dropped; phi is meant to be compactly supported).
double dirichlet_form(std::span<const double> phi, const BirthDeathChain& chain,
                      const StationaryMeasure& pi);

/// sum_x (grad phi(x))^2 pi(x) over edges inside 0..M.
double e0_form(std::span<const double> phi, const StationaryMeasure& pi);

/// c1 * E0 <= E <= c2 * E0 on 0..M: since E = sum p_x pi(x) (grad phi)^2, c1 = min p_x, c2 = max p_x.
struct FormConstants {
  double c1 = 0.0;
  double c2 = 1.0;
};
FormConstants form_constants(const BirthDeathChain& chain, std::size_t truncation);

/// C(x) = sum_{y<=x} V(y) pi(y) for x = 0..M. Each entry is accumulated
/// (compensated) from whichever end carries less absolute mass; the backward
/// route relies on the total being zero, so V must be centered.
/// Throws NotCentered when |sum V pi| exceeds `centering_tol` times sum |V pi|.
std::vector<double> centered_cumulative(const Observable& v, const StationaryMeasure& pi,
                                        double centering_tol = 1e-9);

/// Forward total sum_{y<=M} V(y) pi(y) (no tail).
double cumulative_total(const Observable& v, const StationaryMeasure& pi);

/// d phi(x) = -C(x) / pi(x), x = 0..M, with d phi(0) = -V(0) exactly.
std::vector<double> euler_lagrange_gradient(const Observable& v, const StationaryMeasure& pi);

/// Recovers phi from its gradient with phi(0) = `phi0`.
std::vector<double> integrate_gradient(std::span<const double> gradient, double phi0 = 0.0);

/// 2 <V, phi>_pi - E0(phi) on 0..M.
double e0_functional(const Observable& v, std::span<const double> phi, const StationaryMeasure& pi);

enum class DoublingVerdict { Finite, Divergent, Inconclusive };
std::string_view to_string(DoublingVerdict verdict) noexcept;

struct DoublingRule {
  double finite_rel_change = 1e-3;  // last two values differ by less -> Finite
  double divergent_ratio = 1.5;     // ratio above this ...
  std::size_t sustained = 3;        // ... over this many consecutive doublings -> Divergent
};

/// Classifies a sequence evaluated on a doubling ladder of truncations.
DoublingVerdict classify_doubling(std::span<const double> values, const DoublingRule& rule = {});

struct H1MinusReport {
  std::vector<std::size_t> schedule;
  std::vector<double> phi_star_partial;
  DoublingVerdict verdict = DoublingVerdict::Inconclusive;
  std::vector<double> gradient;  // d phi on 0..max(schedule)
  double cumulative_total = 0.0;
  std::optional<double> sigma2_resolvent;
};

/// Doubling ladder M_max, M_max/2, ... (ascending), stopping at `smallest`.
std::vector<std::size_t> doubling_schedule(std::size_t largest, std::size_t smallest = 16);

/// Phi*_M = sum_{x<=M} C(x)^2 / pi(x) for every M in `schedule` (ascending, <= truncation).
H1MinusReport phi_star(const Observable& v, const StationaryMeasure& pi,
                       std::span<const std::size_t> schedule, const DoublingRule& rule = {});

/// V(x) = (G(x) - G(x-1)) / pi(x) with G(-1) = 0, so sum_{y<=x} V pi = G(x).
Observable observable_from_cumulative(std::span<const double> cumulative,
                                      const StationaryMeasure& pi);

/// G(x) = pi(x)^{1/2} over the measure's truncation.
std::vector<double> sqrt_pi_cumulative(const StationaryMeasure& pi);

struct Sigma2Result {
  std::size_t truncation = 0;
  double sigma2 = 0.0;          // at M
  double sigma2_doubled = 0.0;  // at 2M
  double error_estimate = 0.0;  // |sigma2_doubled - sigma2|
  double recentering_shift = 0.0;
};

/// sigma^2_M = 2 <V, phi>_{pi_M} - <V, V>_{pi_M} where (I - P_M) phi = V on 0..M and P_M
/// sends M to M-1 with probability one. pi_M is the stationary law of P_M.
double sigma2_truncated(const Observable& v, const BirthDeathChain& chain, std::size_t truncation,
                        double* recentering_shift = nullptr);

/// The potential phi of the pinned truncated Poisson solve (for tests and reports).
std::vector<double> poisson_solution(const Observable& v, const BirthDeathChain& chain,
                                     std::size_t truncation);

Sigma2Result sigma2_resolvent(const Observable& v, const BirthDeathChain& chain,
                              std::size_t truncation);

}  // namespace bdclt
