#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>

namespace bdclt {

/// Neumaier variant of Kahan compensated summation.
class KahanSum {
 public:
  KahanSum() = default;
  explicit KahanSum(double init) : sum_(init) {}

  KahanSum& operator+=(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// log(exp(a) + exp(b)) without overflow; -inf is the additive identity.
inline double log_add_exp(double a, double b) noexcept {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

/// log(sum_i exp(v_i)), shifted by the maximum and summed with compensation.
inline double log_sum_exp(std::span<const double> log_values) noexcept {
  if (log_values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(log_values.begin(), log_values.end());
  if (!std::isfinite(top)) return top;
  KahanSum acc;
  for (double v : log_values) acc += std::exp(v - top);
  return top + std::log(acc.value());
}

}  // namespace bdclt
