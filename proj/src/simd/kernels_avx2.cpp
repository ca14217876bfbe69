// Compiled with -mavx2 -mfma; only called after a runtime CPU check.

#include <immintrin.h>

#include "fsmean/simd/kernels.hpp"

namespace fsmean::simd::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void poly_moments_avx2(const double* u, const double* w, const double* y0, const double* y1, const double* y2,
                       std::size_t n, PolyMoments& out) {
  __m256d s[9];
  __m256d t[3][5];
  for (auto& v : s) v = _mm256_setzero_pd();
  for (auto& row : t)
    for (auto& v : row) v = _mm256_setzero_pd();

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d uu = _mm256_loadu_pd(u + i);
    const __m256d yy[3] = {_mm256_loadu_pd(y0 + i), _mm256_loadu_pd(y1 + i), _mm256_loadu_pd(y2 + i)};
    __m256d p = _mm256_loadu_pd(w + i);
    for (int k = 0; k < 9; ++k) {
      s[k] = _mm256_add_pd(s[k], p);
      if (k < 5)
        for (int c = 0; c < 3; ++c) t[c][k] = _mm256_fmadd_pd(p, yy[c], t[c][k]);
      p = _mm256_mul_pd(p, uu);
    }
  }

  PolyMoments tail;
  poly_moments_scalar(u + i, w + i, y0 + i, y1 + i, y2 + i, n - i, tail);
  for (int k = 0; k < 9; ++k) out.s[k] = hsum(s[k]) + tail.s[k];
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 5; ++k) out.t[c][k] = hsum(t[c][k]) + tail.t[c][k];
}

double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  return hsum(_mm256_add_pd(acc0, acc1)) + sum_sq_diff_scalar(a + i, b + i, n - i);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  return hsum(_mm256_add_pd(acc0, acc1)) + dot_scalar(a + i, b + i, n - i);
}

}  // namespace fsmean::simd::detail
