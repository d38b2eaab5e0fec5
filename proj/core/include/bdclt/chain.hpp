#pragma once

// Birth-death chains on {0, 1, 2, ...}: drift families, reversible weights
// and recurrence / spectral-gap classification.

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bdclt {

/// p_x = p for every x >= 1.
struct ConstantDrift {
  double p = 0.0;
};

/// p_x = 1/2 - c x^{-alpha}, q_x = 1/2 + c x^{-alpha}.
struct LampertiDrift {
  double c = 0.0;
  double alpha = 0.0;
};

/// Explicit up-probabilities p_1, p_2, ..., p_L; p_x = p_L for x > L.
struct TableDrift {
  std::vector<double> p;
};

using ChainSpec = std::variant<ConstantDrift, LampertiDrift, TableDrift>;

class BirthDeathChain {
 public:
  /// Throws DomainError when some p_x (x >= 1) falls outside (0, 1).
  explicit BirthDeathChain(ChainSpec spec);

  const ChainSpec& spec() const noexcept { return spec_; }

  /// Up-probability; p(0) == 1.
  double p(std::size_t x) const noexcept;
  /// Down-probability; q(0) == 0 and p(x) + q(x) == 1 for x >= 1.
  double q(std::size_t x) const noexcept;

  // Accurate logarithms (log1p for the Lamperti family).
  double log_p(std::size_t x) const noexcept;
  double log_q(std::size_t x) const noexcept;

 private:
  double lamperti_shift(std::size_t x) const noexcept;

  ChainSpec spec_;
};

BirthDeathChain build_chain(ChainSpec spec);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Reversible weights pi~(x) = prod_{k=1}^{x} p_{k-1}/q_k, stored as logs.
struct StationaryMeasure {
  std::vector<double> log_weights;  // x = 0..M
  double log_z = kInf;              // log normalizer (kInf until normalized)
  bool normalized = false;
  double tail_bound = kInf;  // bound on sum_{x > M} pi~(x)
  bool tail_certified = false;

  std::size_t truncation() const noexcept { return log_weights.size() - 1; }
  double log_pi(std::size_t x) const noexcept { return log_weights[x] - log_z; }
  /// Normalized probability pi(x); requires normalized.
  double pi(std::size_t x) const noexcept;
  std::vector<double> probabilities() const;
  /// Sum of pi(x) over 0..M, i.e. 1 - (tail mass)/Z.
  double truncated_mass() const;
};

StationaryMeasure stationary_weights(const BirthDeathChain& chain, std::size_t truncation);

/// log of a certified upper bound on sum_{x > M} pi~(x), given log pi~(M);
/// kInf when the family admits no dominating series.
double log_tail_bound(const BirthDeathChain& chain, std::size_t truncation,
                      double log_weight_at_truncation);

/// Sets log_z = log(sum_{x<=M} pi~(x) + tail_bound). Throws DivergentMeasure when no
/// dominating series exists and the partial sums grow by more than
/// `divergence_rel_growth` over a doubling of the truncation past 10^4.
StationaryMeasure normalize(const BirthDeathChain& chain, StationaryMeasure measure,
                            double divergence_rel_growth = 1e-3);

/// Smallest doubling-ladder truncation with tail_bound < rel_tol * Z.
std::size_t auto_truncation(const BirthDeathChain& chain, double rel_tol = 1e-12,
                            std::size_t max_truncation = std::size_t{1} << 24);

/// stationary_weights + normalize at auto_truncation (or at least `min_truncation`).
StationaryMeasure stationary_law(const BirthDeathChain& chain, double rel_tol = 1e-12,
                                 std::size_t min_truncation = 1);

/// max_x |pi~(x) p_x - pi~(x+1) q_{x+1}| / max(...) over 0 <= x < M.
double detailed_balance_residual(const BirthDeathChain& chain, const StationaryMeasure& measure);

/// log sum_{x=0}^{M} pi~(x) computed directly from the chain (no storage).
double log_partial_mass(const BirthDeathChain& chain, std::size_t truncation);

enum class RegimeKind {
  PositiveRecurrentWithGap,
  PositiveRecurrentNoGap,
  NullRecurrent,
  Critical,
  Unclassified,
};

struct Regime {
  RegimeKind kind = RegimeKind::Unclassified;
  std::string reason;  // diagnostics, non-empty for Unclassified

  friend bool operator==(const Regime&, const Regime&) = default;
};

std::string_view to_string(RegimeKind kind) noexcept;

/// Numeric evidence gathered for chains outside the three analytic cases.
struct ClassifyEvidence {
  std::size_t base_truncation = 0;
  double partial_sum_growth = 0.0;  // (S(2M) - S(M)) / S(M)
  double delta_estimate = kInf;
  bool delta_diverging = true;
};

Regime classify(const ChainSpec& spec);
ClassifyEvidence classify_evidence(const ChainSpec& spec, std::size_t base_truncation = 10000);

}  // namespace bdclt
