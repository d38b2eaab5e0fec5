#include "bdclt/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <type_traits>
#include <utility>

#include "bdclt/errors.hpp"
#include "bdclt/numeric.hpp"
#include "bdclt/spectral.hpp"

namespace bdclt {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool open_unit(double v) { return v > 0.0 && v < 1.0; }

/// Streaming log-sum-exp: compensated sum of exp(v - top), rescaled when top moves.
class StreamingLogSum {
 public:
  void add(double log_v) {
    if (!(log_v > top_)) {
      acc_ += std::exp(log_v - top_);
      return;
    }
    const double scale = std::isfinite(top_) ? std::exp(top_ - log_v) : 0.0;
    acc_ = KahanSum(acc_.value() * scale);
    acc_ += 1.0;
    top_ = log_v;
  }
  double log_value() const { return top_ + std::log(acc_.value()); }

 private:
  double top_ = -kInf;
  KahanSum acc_;
};

/// Walks log pi~ forward from (x, log_w) to `target`, adding the visited weights to `mass`.
double walk_weights(const BirthDeathChain& chain, std::size_t x, double log_w, std::size_t target,
                    StreamingLogSum& mass) {
  for (std::size_t y = x + 1; y <= target; ++y) {
    log_w += chain.log_p(y - 1) - chain.log_q(y);
    mass.add(log_w);
  }
  return log_w;
}

/// Relative growth (S(2M) - S(M)) / S(M) of the partial sums of pi~.
double doubling_growth(const BirthDeathChain& chain, std::size_t base) {
  StreamingLogSum mass;
  mass.add(0.0);
  const double log_w = walk_weights(chain, 0, 0.0, base, mass);
  const double s1 = mass.log_value();
  walk_weights(chain, base, log_w, 2 * base, mass);
  return std::expm1(mass.log_value() - s1);
}

constexpr std::size_t kDivergenceProbeStart = 10000;

}  // namespace

BirthDeathChain::BirthDeathChain(ChainSpec spec) : spec_(std::move(spec)) {
  std::visit(Overloaded{
                 [](const ConstantDrift& s) {
                   if (!open_unit(s.p)) throw DomainError("constant drift: p must lie in (0,1)");
                 },
                 [](const LampertiDrift& s) {
                   if (!(s.alpha > 0.0) || !std::isfinite(s.alpha))
                     throw DomainError("lamperti drift: alpha must be positive");
                   if (!(s.c > 0.0) || !(s.c < 0.5))
                     throw DomainError("lamperti drift: c must lie in (0, 1/2)");
                 },
                 [](const TableDrift& s) {
                   if (s.p.empty()) throw DomainError("table drift: empty probability table");
                   for (std::size_t i = 0; i < s.p.size(); ++i) {
                     if (!open_unit(s.p[i])) {
                       std::ostringstream os;
                       os << "table drift: p_" << i + 1 << " = " << s.p[i] << " outside (0,1)";
                       throw DomainError(os.str());
                     }
                   }
                 },
             },
             spec_);
}

double BirthDeathChain::lamperti_shift(std::size_t x) const noexcept {
  const auto& s = std::get<LampertiDrift>(spec_);
  return s.c * std::pow(static_cast<double>(x), -s.alpha);
}

double BirthDeathChain::p(std::size_t x) const noexcept {
  if (x == 0) return 1.0;
  return std::visit(Overloaded{
                        [](const ConstantDrift& s) { return s.p; },
                        [&](const LampertiDrift&) { return 0.5 - lamperti_shift(x); },
                        [&](const TableDrift& s) { return s.p[std::min(x, s.p.size()) - 1]; },
                    },
                    spec_);
}

double BirthDeathChain::q(std::size_t x) const noexcept {
  if (x == 0) return 0.0;
  return 1.0 - p(x);
}

double BirthDeathChain::log_p(std::size_t x) const noexcept {
  if (x == 0) return 0.0;
  if (std::holds_alternative<LampertiDrift>(spec_)) {
    return -std::numbers::ln2 + std::log1p(-2.0 * lamperti_shift(x));
  }
  return std::log(p(x));
}

double BirthDeathChain::log_q(std::size_t x) const noexcept {
  if (x == 0) return -kInf;
  if (std::holds_alternative<LampertiDrift>(spec_)) {
    return -std::numbers::ln2 + std::log1p(2.0 * lamperti_shift(x));
  }
  return std::log1p(-p(x));
}

BirthDeathChain build_chain(ChainSpec spec) { return BirthDeathChain(std::move(spec)); }

double StationaryMeasure::pi(std::size_t x) const noexcept { return std::exp(log_pi(x)); }

std::vector<double> StationaryMeasure::probabilities() const {
  std::vector<double> out(log_weights.size());
  for (std::size_t x = 0; x < out.size(); ++x) out[x] = pi(x);
  return out;
}

double StationaryMeasure::truncated_mass() const {
  return std::exp(log_sum_exp(log_weights) - log_z);
}

StationaryMeasure stationary_weights(const BirthDeathChain& chain, std::size_t truncation) {
  StationaryMeasure m;
  m.log_weights.resize(truncation + 1);
  m.log_weights[0] = 0.0;
  for (std::size_t x = 1; x <= truncation; ++x) {
    m.log_weights[x] = m.log_weights[x - 1] + (chain.log_p(x - 1) - chain.log_q(x));
  }
  return m;
}

double log_partial_mass(const BirthDeathChain& chain, std::size_t truncation) {
  StreamingLogSum mass;
  mass.add(0.0);
  walk_weights(chain, 0, 0.0, truncation, mass);
  return mass.log_value();
}

double log_tail_bound(const BirthDeathChain& chain, std::size_t truncation,
                      double log_weight_at_truncation) {
  // Explicit terms from truncation+1 up to `start`, then a dominating series from `start`.
  auto explicit_then = [&](std::size_t start, auto&& series_from) {
    StreamingLogSum mass;
    const double log_w = walk_weights(chain, truncation, log_weight_at_truncation,
                                      std::max(start, truncation), mass);
    mass.add(series_from(std::max(start, truncation), log_w));
    return mass.log_value();
  };
  auto geometric = [](double p) {
    // pi~(x+1) = r pi~(x) once p_x and q_{x+1} are both constant.
    const double r = p / (1.0 - p);
    return [r](std::size_t, double log_w) { return log_w + std::log(r) - std::log1p(-r); };
  };

  return std::visit(
      Overloaded{
          [&](const ConstantDrift& s) -> double {
            if (!(s.p < 0.5)) return kInf;
            return explicit_then(1, geometric(s.p));
          },
          [&](const TableDrift& s) -> double {
            if (!(s.p.back() < 0.5)) return kInf;
            return explicit_then(s.p.size(), geometric(s.p.back()));
          },
          [&](const LampertiDrift& s) -> double {
            const double c4 = 4.0 * s.c;
            if (s.alpha < 1.0) {
              // pi~(x) <= pi~(K) exp(-4c sum_{k=K+1}^{x} k^-alpha); integral comparison gives
              // sum_{x>K} pi~(x) <= pi~(K) (K+1)^alpha / (4c - alpha (K+1)^(alpha-1)).
              std::size_t start = std::max<std::size_t>(truncation, 1);
              while (s.alpha * std::pow(static_cast<double>(start + 1), s.alpha - 1.0) > 0.5 * c4) {
                start *= 2;
              }
              return explicit_then(start, [&](std::size_t k, double log_w) {
                const double a = static_cast<double>(k + 1);
                return log_w + s.alpha * std::log(a) -
                       std::log(c4 - s.alpha * std::pow(a, s.alpha - 1.0));
              });
            }
            if (s.alpha == 1.0 && c4 > 1.0) {
              // pi~(x) <= pi~(K) ((K+1)/(x+1))^{4c}.
              return explicit_then(1, [&](std::size_t k, double log_w) {
                return log_w + std::log(static_cast<double>(k + 1)) - std::log(c4 - 1.0);
              });
            }
            return kInf;
          },
      },
      chain.spec());
}

StationaryMeasure normalize(const BirthDeathChain& chain, StationaryMeasure measure,
                            double divergence_rel_growth) {
  const std::size_t m = measure.truncation();
  const double log_partial = log_sum_exp(measure.log_weights);
  const double log_tail = log_tail_bound(chain, m, measure.log_weights[m]);

  if (std::isfinite(log_tail)) {
    measure.log_z = log_add_exp(log_partial, log_tail);
    measure.tail_bound = std::exp(log_tail);
    measure.tail_certified = true;
    measure.normalized = true;
    return measure;
  }

  // No dominating series: fall back to the doubling growth test.
  std::size_t base = std::max(m, kDivergenceProbeStart);
  constexpr std::size_t kMaxProbe = std::size_t{1} << 24;
  for (;;) {
    const double growth = doubling_growth(chain, base);
    if (growth > divergence_rel_growth) {
      std::ostringstream os;
      os << "partial sums of the reversible measure grow by " << growth
         << " (relative) between M=" << base << " and M=" << 2 * base;
      throw DivergentMeasure(os.str(), growth);
    }
    if (growth < 1e-15 || 2 * base >= kMaxProbe) break;
    base *= 2;
  }
  const double log_total = log_partial_mass(chain, 2 * base);
  measure.log_z = log_total;
  measure.tail_bound = std::max(0.0, std::exp(log_total) - std::exp(log_partial));
  measure.tail_certified = false;
  measure.normalized = true;
  return measure;
}

std::size_t auto_truncation(const BirthDeathChain& chain, double rel_tol,
                            std::size_t max_truncation) {
  StreamingLogSum mass;
  mass.add(0.0);
  double log_w = 0.0;
  std::size_t x = 0;
  const double log_tol = std::log(rel_tol);
  for (std::size_t m = 16; m <= max_truncation; m *= 2) {
    log_w = walk_weights(chain, x, log_w, m, mass);
    x = m;
    const double log_tail = log_tail_bound(chain, m, log_w);
    if (!std::isfinite(log_tail)) {
      const double growth = doubling_growth(chain, kDivergenceProbeStart);
      throw DivergentMeasure("no dominating tail series for this chain", growth);
    }
    if (log_tail - mass.log_value() < log_tol) return m;
  }
  throw ToleranceNotReached("auto_truncation: tail bound above tolerance at the maximal truncation");
}

StationaryMeasure stationary_law(const BirthDeathChain& chain, double rel_tol,
                                 std::size_t min_truncation) {
  const std::size_t m = std::max(auto_truncation(chain, rel_tol), min_truncation);
  return normalize(chain, stationary_weights(chain, m));
}

double detailed_balance_residual(const BirthDeathChain& chain, const StationaryMeasure& measure) {
  double worst = 0.0;
  const auto& lw = measure.log_weights;
  for (std::size_t x = 0; x + 1 < lw.size(); ++x) {
    const double up = lw[x] + chain.log_p(x);
    const double down = lw[x + 1] + chain.log_q(x + 1);
    // |a - b| / max(a, b) = 1 - exp(-|log a - log b|)
    worst = std::max(worst, -std::expm1(-std::abs(up - down)));
  }
  return worst;
}

std::string_view to_string(RegimeKind kind) noexcept {
  switch (kind) {
    case RegimeKind::PositiveRecurrentWithGap: return "PositiveRecurrentWithGap";
    case RegimeKind::PositiveRecurrentNoGap: return "PositiveRecurrentNoGap";
    case RegimeKind::NullRecurrent: return "NullRecurrent";
    case RegimeKind::Critical: return "Critical";
    case RegimeKind::Unclassified: return "Unclassified";
  }
  return "Unclassified";
}

ClassifyEvidence classify_evidence(const ChainSpec& spec, std::size_t base_truncation) {
  const BirthDeathChain chain(spec);
  ClassifyEvidence ev;
  ev.base_truncation = base_truncation;
  ev.partial_sum_growth = doubling_growth(chain, base_truncation);
  const auto delta = chen_delta(chain, 2000);
  ev.delta_estimate = delta.value;
  ev.delta_diverging = delta.diverging;
  return ev;
}

Regime classify(const ChainSpec& spec) {
  const BirthDeathChain chain(spec);
  auto unclassified = [&](std::string why) {
    const auto ev = classify_evidence(spec);
    std::ostringstream os;
    os << why << "; partial-sum growth over M=" << ev.base_truncation << "->"
       << 2 * ev.base_truncation << ": " << ev.partial_sum_growth
       << "; chen delta estimate (M=2000): " << ev.delta_estimate
       << (ev.delta_diverging ? " (diverging)" : " (stable)");
    return Regime{RegimeKind::Unclassified, os.str()};
  };
  return std::visit(
      Overloaded{
          [&](const ConstantDrift& s) -> Regime {
            if (s.p < 0.5) return {RegimeKind::PositiveRecurrentWithGap, {}};
            return unclassified("constant drift with p >= 1/2 lies outside the drift-to-the-left cases");
          },
          [&](const LampertiDrift& s) -> Regime {
            if (s.alpha < 1.0) return {RegimeKind::PositiveRecurrentNoGap, {}};
            if (s.alpha > 1.0) return {RegimeKind::NullRecurrent, {}};
            return {RegimeKind::Critical, {}};
          },
          [&](const TableDrift&) -> Regime {
            return unclassified("table chain (tail repeats the last entry)");
          },
      },
      spec);
}

}  // namespace bdclt
