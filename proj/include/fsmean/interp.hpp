#pragma once

#include <span>
#include <vector>

namespace fsmean {

/// Cubic spline interpolant through (x_k, y_k), x strictly increasing. End
/// slopes come from the cubics through the first and last four points.
/// Evaluation outside [x_0, x_last] extrapolates with the end cubic.
class CubicInterpolant {
 public:
  CubicInterpolant() = default;
  CubicInterpolant(std::span<const double> x, std::span<const double> y);

  double operator()(double t) const;
  double derivative(double t) const;

 private:
  std::size_t segment(double t) const;
  std::vector<double> x_, y_, m_;  // m_: second derivatives at knots
};

/// Fritsch–Carlson monotone cubic (PCHIP) interpolant; clamps outside the
/// data range. Preserves monotonicity of the data.
class MonotoneInterpolant {
 public:
  MonotoneInterpolant() = default;
  MonotoneInterpolant(std::span<const double> x, std::span<const double> y);

  double operator()(double t) const;

 private:
  std::vector<double> x_, y_, d_;
};

/// Piecewise-linear interpolation; clamps outside the data range.
double interp_linear(std::span<const double> x, std::span<const double> y, double t);

/// Samples `fy` given on `fx` at each point of `at` by cubic interpolation.
std::vector<double> resample(std::span<const double> fx, std::span<const double> fy,
                             std::span<const double> at);

/// n equally spaced points on [a, b], endpoints included.
std::vector<double> linspace(double a, double b, std::size_t n);

/// Trapezoid rule on an arbitrary increasing grid.
double trapezoid(std::span<const double> x, std::span<const double> y);

}  // namespace fsmean
