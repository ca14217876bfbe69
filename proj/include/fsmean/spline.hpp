#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <vector>

namespace fsmean {

/// Clamped cubic B-spline basis with uniform interior knots on [lo, hi].
class BSplineBasis {
 public:
  BSplineBasis(int n_interior = 40, double lo = 0.0, double hi = 1.0);

  int size() const { return static_cast<int>(knots_.size()) - 4; }
  int n_interior() const { return n_interior_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& knots() const { return knots_; }

  /// Values (deriv = 0) or derivatives (deriv = 1, 2) of the four basis
  /// functions that are nonzero at x. Returns the index of the first one.
  /// x is clamped to [lo, hi].
  int eval(double x, int deriv, std::array<double, 4>& out) const;

  /// Gram matrix of second derivatives, ∫ B_i'' B_j''.
  Eigen::MatrixXd penalty() const;

  /// Greville abscissae; the coefficient vector of f(x) = x.
  Eigen::VectorXd greville() const;

  /// Same basis on [lo·f, hi·f].
  BSplineBasis scaled(double factor) const;

 private:
  int find_span(double x) const;

  int n_interior_;
  double lo_, hi_;
  std::vector<double> knots_;
};

/// Cubic spline function f = Σ c_j B_j.
class CubicSpline {
 public:
  CubicSpline() : basis_(1), coef_(Eigen::VectorXd::Zero(basis_.size())) {}
  CubicSpline(BSplineBasis basis, Eigen::VectorXd coef);

  static CubicSpline constant(double value, int n_interior = 1, double lo = 0.0, double hi = 1.0);

  double operator()(double x) const { return derivative(x, 0); }
  double derivative(double x, int order) const;

  /// ∫ (f'')² over the domain.
  double roughness() const;

  const BSplineBasis& basis() const { return basis_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }

  /// g(x) = scale · f(x · factor) on [lo / factor, hi / factor]. Exact.
  CubicSpline reparametrized(double factor, double scale) const;

 private:
  BSplineBasis basis_;
  Eigen::VectorXd coef_;
};

/// Result of a penalized weighted least-squares spline fit.
struct SplineFit {
  CubicSpline spline;
  double weighted_rss = 0.0;
};

/// Minimizes Σ w_k (f(x_k) − y_k)² + λ ∫ (f'')². The penalty null space
/// (linear functions) is solved separately from its complement so that very
/// large λ stays well conditioned. Throws RankDeficient when the data do not
/// determine the fit.
SplineFit fit_penalized_spline(const BSplineBasis& basis, std::span<const double> x,
                               std::span<const double> y, std::span<const double> w, double lambda);

/// Convenience least-squares fit of a smooth function sampled on a fine grid.
CubicSpline spline_from_samples(std::span<const double> x, std::span<const double> y, int n_interior,
                                double lambda = 1e-14);

}  // namespace fsmean
