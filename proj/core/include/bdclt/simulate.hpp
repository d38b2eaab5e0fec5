#pragma once

// Seeded Monte Carlo for additive functionals Y_N = N^{-1/2} sum_{n=0}^{N} V(X_n)
// of a stationary birth-death chain.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bdclt/chain.hpp"
#include "bdclt/observable.hpp"
#include "bdclt/rng.hpp"

namespace bdclt {

struct SimConfig {
  std::uint64_t seed = 1;
  std::size_t replicas = 1000;
  std::size_t steps = 10000;
  std::size_t burn_in = 0;
  std::optional<std::size_t> fixed_start;  // nullopt: draw X_0 from pi
  std::vector<std::size_t> ladder;         // N rungs; empty: doubling ladder ending at `steps`
  std::size_t threads = 0;                 // 0: BD_CLT_THREADS, else hardware concurrency
  std::size_t pilot_steps = 100000;
  double trend_tol = 0.05;
};

/// Throws std::invalid_argument on replicas == 0, steps == 0 or a bad ladder.
void validate(const SimConfig& config);

/// Worker count: `requested` if nonzero, else BD_CLT_THREADS, else hardware concurrency.
std::size_t resolve_thread_count(std::size_t requested);

/// Up-probabilities cached for the states a simulation is likely to visit.
class TransitionTable {
 public:
  TransitionTable(const BirthDeathChain& chain, std::size_t cached_states);
  double up(std::size_t x) const noexcept { return x < up_.size() ? up_[x] : chain_->p(x); }
  /// One step from x; the state 0 always moves to 1.
  std::size_t step(std::size_t x, Rng& rng) const noexcept {
    return rng.uniform01() < up(x) ? x + 1 : x - 1;
  }

 private:
  const BirthDeathChain* chain_;
  std::vector<double> up_;
};

/// Inverse-CDF sampler over the truncated stationary law.
class StationarySampler {
 public:
  explicit StationarySampler(const StationaryMeasure& pi);
  std::size_t operator()(Rng& rng) const;

 private:
  std::vector<double> cdf_;
};

std::size_t sample_stationary_start(const StationaryMeasure& pi, Rng& rng);

/// X_0 = start, ..., X_steps (length steps + 1).
std::vector<std::size_t> sample_path(const BirthDeathChain& chain, std::size_t start,
                                     std::size_t steps, Rng& rng);

/// N^{-1/2} sum_{n=0}^{N} V(X_n).
double partial_sum(const Observable& v, std::span<const std::size_t> trajectory, std::size_t n);

/// Integrated autocorrelation time 1 + 2 sum rho_k, truncated by Geyer's
/// initial positive sequence.
double integrated_autocorrelation_time(std::span<const double> series, std::size_t max_lag = 1000);

/// Kolmogorov-Smirnov sup distance between the empirical CDF of `samples` and N(0,1).
double ks_distance_normal(std::vector<double> samples);

struct VariancePoint {
  std::size_t n = 0;
  double d2 = 0.0;  // mean over replicas of Y_N^2
};

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct CltReport {
  std::size_t replicas = 0;
  std::size_t steps = 0;
  std::vector<VariancePoint> variance_curve;
  double sigma2_mc = 0.0;     // batch means, averaged over replicas
  double sigma2_mc_se = 0.0;  // standard error across replicas
  std::size_t batch_length = 0;
  bool batch_length_capped = false;
  double tau_int = 0.0;
  double ks_distance = 1.0;
  bool degenerate = false;
  bool no_convergence_warning = false;
  SummaryStats replica_sums;  // Y_N at the largest rung
};

CltReport variance_growth(const Observable& v, const BirthDeathChain& chain,
                          const StationaryMeasure& pi, const SimConfig& config);

struct OccupationAudit {
  std::vector<std::size_t> times;
  std::vector<double> chi2;
  std::vector<std::size_t> dof;
  std::vector<double> threshold;  // chi-squared 1% critical value
  bool passed() const;
};

/// Pooled occupation law over replicas at the given times versus pi.
OccupationAudit stationarity_audit(const BirthDeathChain& chain, const StationaryMeasure& pi,
                                   const SimConfig& config, std::span<const std::size_t> times);

}  // namespace bdclt
