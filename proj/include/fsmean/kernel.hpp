#pragma once

#include <cmath>

namespace fsmean {

/// Compactly supported smoothing kernel on [-1, 1].
///
/// Epanechnikov is ¾(1 − u²). SquaredLinear is ¾(1 − u)², kept only for
/// comparison experiments; it is not symmetric.
enum class KernelShape { Epanechnikov, SquaredLinear };

inline double kernel(double u, KernelShape shape = KernelShape::Epanechnikov) {
  if (u < -1.0 || u > 1.0) return 0.0;
  switch (shape) {
    case KernelShape::Epanechnikov: return 0.75 * (1.0 - u * u);
    case KernelShape::SquaredLinear: return 0.75 * (1.0 - u) * (1.0 - u);
  }
  return 0.0;
}

/// K_h(u) = K(u / h) / h.
inline double kernel_h(double u, double h, KernelShape shape = KernelShape::Epanechnikov) {
  return kernel(u / h, shape) / h;
}

}  // namespace fsmean
