#include "bdclt/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bdclt/errors.hpp"
#include "bdclt/numeric.hpp"

namespace bdclt {

JacobiMatrix jacobi_matrix(const BirthDeathChain& chain, std::size_t size) {
  JacobiMatrix j;
  j.off_diag.resize(size > 0 ? size - 1 : 0);
  for (std::size_t x = 0; x < j.off_diag.size(); ++x) {
    j.off_diag[x] = std::sqrt(chain.p(x) * chain.q(x + 1));
  }
  return j;
}

std::size_t sturm_count(std::span<const double> diag, std::span<const double> off, double shift) {
  const std::size_t n = diag.size();
  if (n == 0) return 0;
  double max_off2 = 1.0;
  for (double b : off) max_off2 = std::max(max_off2, b * b);
  const double pivmin = std::numeric_limits<double>::min() * max_off2;

  std::size_t count = 0;
  double d = diag[0] - shift;
  if (std::abs(d) < pivmin) d = -pivmin;
  if (d < 0.0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    d = (diag[i] - shift) - off[i - 1] * off[i - 1] / d;
    if (std::abs(d) < pivmin) d = -pivmin;
    if (d < 0.0) ++count;
  }
  return count;
}

double tridiagonal_eigenvalue_from_top(std::span<const double> diag, std::span<const double> off,
                                       std::size_t k, double tol) {
  const std::size_t n = diag.size();
  if (k >= n) throw std::out_of_range("tridiagonal_eigenvalue_from_top: k >= size");
  // Gershgorin bracket
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw ToleranceNotReached("Sturm bisection: non-finite Gershgorin bracket (NaN input?)");
  }
  lo -= tol;
  hi += tol;
  const std::size_t index = n - 1 - k;  // ascending index of the wanted eigenvalue
  for (int iter = 0; iter < 400 && hi - lo > tol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(diag, off, mid) >= index + 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (!(hi - lo <= tol)) throw ToleranceNotReached("Sturm bisection did not reach tolerance");
  return 0.5 * (lo + hi);
}

double top_eigenvalue(const JacobiMatrix& jacobi, std::optional<std::size_t> delete_state,
                      double tol) {
  const std::size_t n = jacobi.size();
  const std::vector<double> zeros(n, 0.0);
  const std::span<const double> off(jacobi.off_diag);
  if (!delete_state) return tridiagonal_eigenvalue_from_top(zeros, off, 0, tol);

  const std::size_t s = *delete_state;
  if (s >= n) throw std::out_of_range("top_eigenvalue: deleted state outside the truncation");
  double best = -std::numeric_limits<double>::infinity();
  if (s > 0) {
    best = std::max(best, tridiagonal_eigenvalue_from_top(std::span(zeros).first(s),
                                                          off.first(s - 1), 0, tol));
  }
  if (s + 1 < n) {
    const std::size_t len = n - s - 1;
    best = std::max(best, tridiagonal_eigenvalue_from_top(std::span(zeros).first(len),
                                                          off.subspan(s + 1, len - 1), 0, tol));
  }
  return best;
}

double second_eigenvalue(const JacobiMatrix& jacobi, double tol) {
  const std::vector<double> zeros(jacobi.size(), 0.0);
  return tridiagonal_eigenvalue_from_top(zeros, jacobi.off_diag, 1, tol);
}

ChenDelta chen_delta(const BirthDeathChain& chain, std::size_t truncation, double doubling_tol) {
  ChenDelta out;
  out.truncation = truncation;
  const auto measure = stationary_weights(chain, truncation);
  const auto& lw = measure.log_weights;
  const double log_tail = log_tail_bound(chain, truncation, lw[truncation]);
  if (!std::isfinite(log_tail)) return out;

  // suffix[x] = log sum_{y >= x} pi~(y), including the certified tail beyond M.
  std::vector<double> suffix(truncation + 2);
  suffix[truncation + 1] = log_tail;
  for (std::size_t x = truncation + 1; x-- > 0;) suffix[x] = log_add_exp(lw[x], suffix[x + 1]);

  double prefix = -kInf;  // log sum_{y < x} 1/(pi~(y) p_y)
  double sup = 0.0;
  double sup_half = 0.0;
  for (std::size_t x = 1; x <= truncation; ++x) {
    prefix = log_add_exp(prefix, -lw[x - 1] - chain.log_p(x - 1));
    sup = std::max(sup, std::exp(prefix + suffix[x]));
    if (x <= truncation / 2) sup_half = sup;
  }
  if (truncation < 2) sup_half = sup;
  out.value = sup;
  out.value_half = sup_half;
  out.diverging = sup > (1.0 + doubling_tol) * sup_half;
  return out;
}

double witness_rayleigh(const BirthDeathChain& chain, std::size_t n) {
  KahanSum acc;
  for (std::size_t x = 1; x < n; ++x) acc += std::sqrt(chain.p(x) * chain.q(x + 1));
  return 2.0 * acc.value() / static_cast<double>(n);
}

SpectralReport spectral_report(const BirthDeathChain& chain, std::span<const std::size_t> sizes,
                               std::size_t delete_state) {
  SpectralReport r;
  r.sizes.assign(sizes.begin(), sizes.end());
  r.deleted_state = delete_state;
  for (std::size_t n : r.sizes) {
    const auto j = jacobi_matrix(chain, n);
    r.lambda1.push_back(second_eigenvalue(j));
    r.lambda1_raw.push_back(top_eigenvalue(j, delete_state));
    r.witness.push_back(witness_rayleigh(chain, n - 1));
    const auto delta = chen_delta(chain, n);
    r.delta_running_sup.push_back(delta.value);
  }
  if (!r.sizes.empty()) {
    r.delta_diverging = chen_delta(chain, *std::max_element(r.sizes.begin(), r.sizes.end())).diverging;
  }
  return r;
}

std::string_view to_string(GapVerdict verdict) noexcept {
  switch (verdict) {
    case GapVerdict::GapLikely: return "GapLikely";
    case GapVerdict::NoGapLikely: return "NoGapLikely";
    case GapVerdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

GapVerdict gap_verdict(const SpectralReport& report, const GapThresholds& thresholds) {
  const auto& sizes = report.sizes;
  if (sizes.size() < 3 || report.lambda1_raw.size() != sizes.size()) return GapVerdict::Inconclusive;
  const auto [smallest, largest] = std::minmax_element(sizes.begin(), sizes.end());
  if (static_cast<double>(*largest) < 100.0 * static_cast<double>(*smallest)) {
    return GapVerdict::Inconclusive;
  }
  const double last = report.lambda1_raw.back();
  const double prev = report.lambda1_raw[report.lambda1_raw.size() - 2];
  if (last > 1.0 - thresholds.eps_gap || report.delta_diverging) return GapVerdict::NoGapLikely;
  if (std::abs(last - prev) < thresholds.cauchy_window && last <= 1.0 - 10.0 * thresholds.eps_gap) {
    return GapVerdict::GapLikely;
  }
  return GapVerdict::Inconclusive;
}

}  // namespace bdclt
