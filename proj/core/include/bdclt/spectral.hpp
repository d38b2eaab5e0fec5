#pragma once

// Spectral side of a birth-death chain: the symmetric tridiagonal conjugate
// A = D P D^{-1} (D = diag(sqrt(pi))), its truncations, Sturm-sequence
// eigenvalues, Chen's delta criterion and the flat witness vectors.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bdclt/chain.hpp"

namespace bdclt {

/// Principal N x N truncation of A; the diagonal is zero (no holding).
struct JacobiMatrix {
  std::vector<double> off_diag;  // off_diag[x] = a(x, x+1) = sqrt(p_x q_{x+1})

  std::size_t size() const noexcept { return off_diag.size() + 1; }
};

JacobiMatrix jacobi_matrix(const BirthDeathChain& chain, std::size_t size);

/// Number of eigenvalues strictly below `shift` of the symmetric tridiagonal
/// matrix with the given diagonal and off-diagonal (Sturm sign count).
std::size_t sturm_count(std::span<const double> diag, std::span<const double> off, double shift);

/// k-th largest eigenvalue (k = 0 is the top) by Sturm bisection to absolute `tol`.
double tridiagonal_eigenvalue_from_top(std::span<const double> diag, std::span<const double> off,
                                       std::size_t k, double tol = 1e-12);

/// Largest eigenvalue; with `delete_state` the row and column of that state are
/// removed first and the maximum over the remaining diagonal blocks is returned.
double top_eigenvalue(const JacobiMatrix& jacobi, std::optional<std::size_t> delete_state = {},
                      double tol = 1e-12);

/// Second largest eigenvalue of the full truncation (estimate of lambda_1).
double second_eigenvalue(const JacobiMatrix& jacobi, double tol = 1e-12);

struct ChenDelta {
  std::size_t truncation = 0;
  double value = kInf;       // running sup over 1 <= x <= M
  double value_half = kInf;  // running sup over 1 <= x <= M/2
  bool diverging = true;     // value > (1 + doubling_tol) * value_half, or no tail bound
};

/// sup_{1<=x<=M} (sum_{y<x} 1/(pi~(y) p_y)) (sum_{y>=x} pi~(y)), evaluated in log space
/// with the tail beyond M taken from the certified dominating series.
ChenDelta chen_delta(const BirthDeathChain& chain, std::size_t truncation,
                     double doubling_tol = 0.01);

/// <A' f_n, f_n> for f_n = n^{-1/2} on states 1..n of the reduced matrix (state 0 removed).
double witness_rayleigh(const BirthDeathChain& chain, std::size_t n);

struct SpectralReport {
  std::vector<std::size_t> sizes;
  std::vector<double> lambda1;      // second eigenvalue of the full N x N truncation
  std::vector<double> lambda1_raw;  // top eigenvalue with `deleted_state` removed
  std::vector<double> witness;      // witness_rayleigh(chain, N - 1)
  std::vector<double> delta_running_sup;
  std::size_t deleted_state = 0;
  bool delta_diverging = true;
};

SpectralReport spectral_report(const BirthDeathChain& chain, std::span<const std::size_t> sizes,
                               std::size_t delete_state = 0);

enum class GapVerdict { GapLikely, NoGapLikely, Inconclusive };

std::string_view to_string(GapVerdict verdict) noexcept;

struct GapThresholds {
  double eps_gap = 5e-3;
  double cauchy_window = 1e-4;
};

GapVerdict gap_verdict(const SpectralReport& report, const GapThresholds& thresholds = {});

}  // namespace bdclt
