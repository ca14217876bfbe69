#include "fsmean/simd/kernels.hpp"

namespace fsmean::simd::detail {

void poly_moments_scalar(const double* u, const double* w, const double* y0, const double* y1, const double* y2,
                         std::size_t n, PolyMoments& out) {
  out = PolyMoments{};
  const double* ys[3] = {y0, y1, y2};
  for (std::size_t i = 0; i < n; ++i) {
    double p = w[i];
    for (int k = 0; k < 9; ++k) {
      out.s[k] += p;
      if (k < 5)
        for (int c = 0; c < 3; ++c) out.t[c][k] += p * ys[c][i];
      p *= u[i];
    }
  }
}

double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace fsmean::simd::detail
