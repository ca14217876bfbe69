#if defined(__aarch64__)

#include <arm_neon.h>

#include "fsmean/simd/kernels.hpp"

namespace fsmean::simd::detail {

void poly_moments_neon(const double* u, const double* w, const double* y0, const double* y1, const double* y2,
                       std::size_t n, PolyMoments& out) {
  float64x2_t s[9];
  float64x2_t t[3][5];
  for (auto& v : s) v = vdupq_n_f64(0.0);
  for (auto& row : t)
    for (auto& v : row) v = vdupq_n_f64(0.0);

  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t uu = vld1q_f64(u + i);
    const float64x2_t yy[3] = {vld1q_f64(y0 + i), vld1q_f64(y1 + i), vld1q_f64(y2 + i)};
    float64x2_t p = vld1q_f64(w + i);
    for (int k = 0; k < 9; ++k) {
      s[k] = vaddq_f64(s[k], p);
      if (k < 5)
        for (int c = 0; c < 3; ++c) t[c][k] = vfmaq_f64(t[c][k], p, yy[c]);
      p = vmulq_f64(p, uu);
    }
  }

  PolyMoments tail;
  poly_moments_scalar(u + i, w + i, y0 + i, y1 + i, y2 + i, n - i, tail);
  for (int k = 0; k < 9; ++k) out.s[k] = vaddvq_f64(s[k]) + tail.s[k];
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 5; ++k) out.t[c][k] = vaddvq_f64(t[c][k]) + tail.t[c][k];
}

double sum_sq_diff_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  return vaddvq_f64(acc) + sum_sq_diff_scalar(a + i, b + i, n - i);
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  return vaddvq_f64(acc) + dot_scalar(a + i, b + i, n - i);
}

}  // namespace fsmean::simd::detail

#endif
