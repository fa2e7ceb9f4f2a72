// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "chmy/kernels.hpp"

namespace chmy::kernels {

namespace {

inline __m256d abs_pd(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

// Same operation order as the scalar reference so results are bit-identical.
inline __m256d violation_pd(__m256d v) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  return _mm256_add_pd(_mm256_max_pd(zero, _mm256_sub_pd(v, one)),
                       _mm256_min_pd(zero, _mm256_add_pd(v, one)));
}

inline __m256d power_k_pd(__m256d lam, int k) {
  const __m256d mag = abs_pd(lam);
  __m256d r = lam;
  for (int j = 2; j < k; ++j) r = _mm256_mul_pd(r, mag);
  return r;
}

inline __m256d dpower_k_pd(__m256d v, __m256d lam, int k) {
  const __m256d mag = abs_pd(lam);
  __m256d r = _mm256_set1_pd(static_cast<double>(k - 1));
  for (int j = 2; j < k; ++j) r = _mm256_mul_pd(r, mag);
  const __m256d active = _mm256_cmp_pd(abs_pd(v), _mm256_set1_pd(1.0), _CMP_GT_OQ);
  return _mm256_and_pd(active, r);
}

inline double violation(double v) { return std::max(0.0, v - 1.0) + std::min(0.0, v + 1.0); }

inline double power_k(double lam, int k) {
  const double mag = std::abs(lam);
  double r = lam;
  for (int j = 2; j < k; ++j) r *= mag;
  return r;
}

inline double dpower_k(double v, double lam, int k) {
  const double mag = std::abs(lam);
  double r = static_cast<double>(k - 1);
  for (int j = 2; j < k; ++j) r *= mag;
  return std::abs(v) > 1.0 ? r : 0.0;
}

void spmv(const CsrView& a, const double* x, double* y) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    int p = a.row_ptr[i];
    const int end = a.row_ptr[i + 1];
    __m256d acc = _mm256_setzero_pd();
    for (; p + 4 <= end; p += 4) {
      const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(a.col_idx + p));
      const __m256d xv = _mm256_i32gather_pd(x, idx, 8);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(a.values + p), xv, acc);
    }
    double sum = hsum(acc);
    for (; p < end; ++p) sum += a.values[p] * x[a.col_idx[p]];
    y[i] = sum;
  }
}

void penalty_nodal(std::size_t n, const double* phi, int k, double* lam, double* dlam) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(phi + i);
    const __m256d l = violation_pd(v);
    _mm256_storeu_pd(lam + i, power_k_pd(l, k));
    _mm256_storeu_pd(dlam + i, dpower_k_pd(v, l, k));
  }
  for (; i < n; ++i) {
    const double l = violation(phi[i]);
    lam[i] = power_k(l, k);
    dlam[i] = dpower_k(phi[i], l, k);
  }
}

void lumped_penalty(std::size_t n, const double* phi, const double* d, double s, int k, double* p,
                    double* diag) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(phi + i);
    const __m256d l = violation_pd(v);
    const __m256d w = _mm256_mul_pd(sv, _mm256_loadu_pd(d + i));
    _mm256_storeu_pd(p + i, _mm256_mul_pd(w, power_k_pd(l, k)));
    _mm256_storeu_pd(diag + i, _mm256_mul_pd(w, dpower_k_pd(v, l, k)));
  }
  for (; i < n; ++i) {
    const double l = violation(phi[i]);
    const double w = s * d[i];
    p[i] = w * power_k(l, k);
    diag[i] = w * dpower_k(phi[i], l, k);
  }
}

double max_abs(std::size_t n, const double* x) {
  __m256d m = _mm256_setzero_pd();
  __m256d bad = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    bad = _mm256_or_pd(bad, _mm256_cmp_pd(v, v, _CMP_UNORD_Q));
    m = _mm256_max_pd(m, abs_pd(v));
  }
  double r = hmax(m);
  bool nan = _mm256_movemask_pd(bad) != 0;
  for (; i < n; ++i) {
    nan |= std::isnan(x[i]);
    r = std::max(r, std::abs(x[i]));
  }
  return nan ? std::numeric_limits<double>::quiet_NaN() : r;
}

double max_violation(std::size_t n, const double* phi) {
  __m256d m = _mm256_setzero_pd();
  __m256d bad = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(phi + i);
    bad = _mm256_or_pd(bad, _mm256_cmp_pd(v, v, _CMP_UNORD_Q));
    m = _mm256_max_pd(m, abs_pd(violation_pd(v)));
  }
  double r = hmax(m);
  bool nan = _mm256_movemask_pd(bad) != 0;
  for (; i < n; ++i) {
    nan |= std::isnan(phi[i]);
    r = std::max(r, std::abs(violation(phi[i])));
  }
  return nan ? std::numeric_limits<double>::quiet_NaN() : r;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t{&spmv, &penalty_nodal, &lumped_penalty, &max_abs, &max_violation};
  return &t;
}

}  // namespace chmy::kernels
