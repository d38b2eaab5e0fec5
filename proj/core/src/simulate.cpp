#include "bdclt/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

#include "bdclt/numeric.hpp"

namespace bdclt {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Runs body(r) for r in [0, count) on `threads` workers (strided assignment).
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t r = 0; r < count; ++r) body(r);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t r = t; r < count; r += threads) body(r);
    });
  }
}

std::vector<std::size_t> effective_ladder(const SimConfig& c) {
  if (!c.ladder.empty()) return c.ladder;
  std::vector<std::size_t> l;
  const std::size_t smallest = std::max<std::size_t>(10, c.steps / 1024);
  for (std::size_t n = c.steps; n >= smallest; n /= 2) l.push_back(n);
  if (l.empty()) l.push_back(c.steps);
  std::reverse(l.begin(), l.end());
  return l;
}

SummaryStats summarize(std::span<const double> xs) {
  SummaryStats s;
  if (xs.empty()) return s;
  KahanSum sum;
  for (double x : xs) sum += x;
  s.mean = sum.value() / static_cast<double>(xs.size());
  KahanSum ss;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.sd = xs.size() > 1 ? std::sqrt(ss.value() / static_cast<double>(xs.size() - 1)) : 0.0;
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

/// Wilson-Hilferty approximation of the upper 1% chi-squared quantile.
double chi2_critical_1pct(std::size_t dof) {
  const double k = static_cast<double>(dof);
  const double z = 2.3263478740408408;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3);
}

constexpr std::uint64_t kPilotStream = ~std::uint64_t{0};

}  // namespace

void validate(const SimConfig& config) {
  if (config.replicas < 1) throw std::invalid_argument("simulation: replicas must be >= 1");
  if (config.steps < 1) throw std::invalid_argument("simulation: steps must be >= 1");
  for (std::size_t n : config.ladder) {
    if (n < 1 || n > config.steps) {
      throw std::invalid_argument("simulation: ladder rungs must lie in [1, steps]");
    }
  }
  if (!std::is_sorted(config.ladder.begin(), config.ladder.end())) {
    throw std::invalid_argument("simulation: ladder must be ascending");
  }
}

std::size_t resolve_thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BD_CLT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      // fall through to hardware concurrency
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

TransitionTable::TransitionTable(const BirthDeathChain& chain, std::size_t cached_states)
    : chain_(&chain), up_(cached_states) {
  for (std::size_t x = 0; x < cached_states; ++x) up_[x] = chain.p(x);
}

StationarySampler::StationarySampler(const StationaryMeasure& pi) {
  cdf_.resize(pi.log_weights.size());
  KahanSum acc;
  for (std::size_t x = 0; x < cdf_.size(); ++x) {
    acc += pi.pi(x);
    cdf_[x] = acc.value();
  }
  // renormalize over the truncation
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

std::size_t StationarySampler::operator()(Rng& rng) const {
  const double u = rng.uniform01();
  return static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
}

std::size_t sample_stationary_start(const StationaryMeasure& pi, Rng& rng) {
  return StationarySampler(pi)(rng);
}

std::vector<std::size_t> sample_path(const BirthDeathChain& chain, std::size_t start,
                                     std::size_t steps, Rng& rng) {
  std::vector<std::size_t> path(steps + 1);
  path[0] = start;
  for (std::size_t n = 1; n <= steps; ++n) {
    const std::size_t x = path[n - 1];
    path[n] = rng.uniform01() < chain.p(x) ? x + 1 : x - 1;
  }
  return path;
}

double partial_sum(const Observable& v, std::span<const std::size_t> trajectory, std::size_t n) {
  if (n == 0 || n >= trajectory.size()) {
    throw std::invalid_argument("partial_sum: need 1 <= N <= trajectory length - 1");
  }
  KahanSum acc;
  for (std::size_t k = 0; k <= n; ++k) acc += v(trajectory[k]);
  return acc.value() / std::sqrt(static_cast<double>(n));
}

double integrated_autocorrelation_time(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n < 4) return 1.0;
  KahanSum s;
  for (double x : series) s += x;
  const double mean = s.value() / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    KahanSum acc;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (series[i] - mean) * (series[i + lag] - mean);
    return acc.value() / static_cast<double>(n);
  };
  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) return 1.0;
  max_lag = std::min(max_lag, n / 2);
  // Sum of pairs Gamma_m = gamma_{2m} + gamma_{2m+1} while positive.
  double sum_pairs = 0.0;
  for (std::size_t m = 0; 2 * m + 1 <= max_lag; ++m) {
    const double pair = (m == 0 ? gamma0 : autocov(2 * m)) + autocov(2 * m + 1);
    if (!(pair > 0.0)) break;
    sum_pairs += pair;
  }
  return std::max(1.0, (2.0 * sum_pairs - gamma0) / gamma0);
}

double ks_distance_normal(std::vector<double> samples) {
  if (samples.empty()) return 1.0;
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = normal_cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return std::min(1.0, d);
}

CltReport variance_growth(const Observable& v, const BirthDeathChain& chain,
                          const StationaryMeasure& pi, const SimConfig& config) {
  validate(config);
  const auto ladder = effective_ladder(config);
  const std::size_t rungs = ladder.size();
  const std::size_t replicas = config.replicas;
  const StationarySampler sampler(pi);
  const TransitionTable table(chain, std::max<std::size_t>(pi.truncation() + 1, 1u << 16));

  auto initial_state = [&](Rng& rng) {
    std::size_t x = config.fixed_start ? *config.fixed_start : sampler(rng);
    for (std::size_t i = 0; i < config.burn_in; ++i) x = table.step(x, rng);
    return x;
  };

  CltReport report;
  report.replicas = replicas;
  report.steps = config.steps;

  // Pilot run on a reserved stream fixes the batch length.
  {
    // Paths alternate parity every step, so V(X_n) carries a period-2 component that
    // stops the positive-sequence sum early; consecutive pairs are averaged first and
    // the resulting time is converted back to steps.
    Rng rng = Rng::for_stream(config.seed, kPilotStream);
    std::vector<double> pairs((config.pilot_steps + 1) / 2);
    std::size_t x = initial_state(rng);
    for (double& pair : pairs) {
      const double first = v(x);
      x = table.step(x, rng);
      pair = 0.5 * (first + v(x));
      x = table.step(x, rng);
    }
    report.tau_int = 2.0 * integrated_autocorrelation_time(pairs);
  }
  const std::size_t samples = config.steps + 1;
  const std::size_t max_batch = std::max<std::size_t>(1, samples / 10);
  auto wanted = static_cast<std::size_t>(std::ceil(100.0 * report.tau_int));
  wanted += wanted % 2;  // even batches keep the parity balance
  report.batch_length = std::clamp<std::size_t>(wanted, 1, max_batch);
  report.batch_length_capped = wanted > max_batch;
  const std::size_t b = report.batch_length;
  const std::size_t batches = samples / b;

  std::vector<double> ys(replicas * rungs);
  std::vector<double> bm(replicas);
  parallel_for(replicas, resolve_thread_count(config.threads), [&](std::size_t r) {
    Rng rng = Rng::for_stream(config.seed, r);
    std::size_t x = initial_state(rng);
    KahanSum total;
    KahanSum batch;
    std::vector<double> batch_means;
    batch_means.reserve(batches);
    std::size_t k = 0;
    for (std::size_t n = 0; n <= config.steps; ++n) {
      const double val = v(x);
      total += val;
      if (batch_means.size() < batches) {
        batch += val;
        if ((n + 1) % b == 0) {
          batch_means.push_back(batch.value() / static_cast<double>(b));
          batch = KahanSum();
        }
      }
      while (k < rungs && ladder[k] == n) {
        ys[r * rungs + k] = total.value() / std::sqrt(static_cast<double>(n));
        ++k;
      }
      if (n < config.steps) x = table.step(x, rng);
    }
    if (batch_means.size() >= 2) {
      const auto st = summarize(batch_means);
      bm[r] = static_cast<double>(b) * st.sd * st.sd;
    } else {
      bm[r] = 0.0;
    }
  });

  // Deterministic reduction in replica order.
  for (std::size_t k = 0; k < rungs; ++k) {
    KahanSum acc;
    for (std::size_t r = 0; r < replicas; ++r) acc += ys[r * rungs + k] * ys[r * rungs + k];
    report.variance_curve.push_back({ladder[k], acc.value() / static_cast<double>(replicas)});
  }
  const auto bm_stats = summarize(bm);
  report.sigma2_mc = bm_stats.mean;
  report.sigma2_mc_se = bm_stats.sd / std::sqrt(static_cast<double>(replicas));

  std::vector<double> last(replicas);
  for (std::size_t r = 0; r < replicas; ++r) last[r] = ys[r * rungs + rungs - 1];
  report.replica_sums = summarize(last);
  const double d2 = report.variance_curve.back().d2;
  if (d2 > 0.0) {
    const double sd = std::sqrt(d2);
    for (double& y : last) y /= sd;
    report.ks_distance = ks_distance_normal(std::move(last));
  } else {
    report.degenerate = true;
    report.ks_distance = 1.0;
  }
  if (rungs >= 2) {
    const double prev = report.variance_curve[rungs - 2].d2;
    report.no_convergence_warning =
        prev > 0.0 ? std::abs(d2 / prev - 1.0) > config.trend_tol : d2 > 0.0;
  }
  return report;
}

bool OccupationAudit::passed() const {
  for (std::size_t i = 0; i < chi2.size(); ++i) {
    if (!(chi2[i] <= threshold[i])) return false;
  }
  return true;
}

OccupationAudit stationarity_audit(const BirthDeathChain& chain, const StationaryMeasure& pi,
                                   const SimConfig& config, std::span<const std::size_t> times) {
  validate(config);
  const StationarySampler sampler(pi);
  const TransitionTable table(chain, std::max<std::size_t>(pi.truncation() + 1, 1u << 16));
  const std::size_t horizon = times.empty() ? 0 : *std::max_element(times.begin(), times.end());
  std::vector<std::size_t> states(config.replicas * times.size());

  parallel_for(config.replicas, resolve_thread_count(config.threads), [&](std::size_t r) {
    Rng rng = Rng::for_stream(config.seed, r);
    std::size_t x = sampler(rng);
    for (std::size_t n = 0; n <= horizon; ++n) {
      for (std::size_t t = 0; t < times.size(); ++t) {
        if (times[t] == n) states[r * times.size() + t] = x;
      }
      if (n < horizon) x = table.step(x, rng);
    }
  });

  // Bins: states with expected count >= 5, the rest pooled into one bin.
  const double total = static_cast<double>(config.replicas);
  const auto probs = pi.probabilities();
  std::size_t bins = 0;
  while (bins < probs.size() && probs[bins] * total >= 5.0) ++bins;

  OccupationAudit audit;
  audit.times.assign(times.begin(), times.end());
  for (std::size_t t = 0; t < times.size(); ++t) {
    std::vector<double> counts(bins + 1, 0.0);
    for (std::size_t r = 0; r < config.replicas; ++r) {
      counts[std::min(states[r * times.size() + t], bins)] += 1.0;
    }
    std::vector<double> expected(bins + 1, 0.0);
    double head_mass = 0.0;
    for (std::size_t x = 0; x < bins; ++x) {
      expected[x] = probs[x] * total;
      head_mass += probs[x];
    }
    expected[bins] = std::max(0.0, 1.0 - head_mass) * total;
    std::size_t used = bins + 1;
    if (expected[bins] < 5.0 && bins > 0) {
      // too sparse for its own bin: merge into the last regular bin
      expected[bins - 1] += expected[bins];
      counts[bins - 1] += counts[bins];
      used = bins;
    }
    double chi2 = 0.0;
    for (std::size_t x = 0; x < used; ++x) {
      if (expected[x] > 0.0) chi2 += (counts[x] - expected[x]) * (counts[x] - expected[x]) / expected[x];
    }
    const std::size_t dof = used > 1 ? used - 1 : 1;
    audit.chi2.push_back(chi2);
    audit.dof.push_back(std::max<std::size_t>(dof, 1));
    audit.threshold.push_back(chi2_critical_1pct(std::max<std::size_t>(dof, 1)));
  }
  return audit;
}

}  // namespace bdclt
