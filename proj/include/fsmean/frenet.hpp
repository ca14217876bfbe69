#pragma once

#include <span>
#include <vector>

#include "fsmean/so3.hpp"
#include "fsmean/spline.hpp"

namespace fsmean {

inline constexpr double kKappaMin = 1e-6;

/// Curvature and torsion as cubic splines over normalized arclength.
/// Curvature is floored at kKappaMin on evaluation.
struct ThetaFunction {
  CubicSpline kappa;
  CubicSpline tau;

  static ThetaFunction constant(double kappa, double tau);

  double kappa_at(double s) const;
  double tau_at(double s) const { return tau(s); }
  /// Length of the domain [0, L] the splines are defined on.
  double domain_length() const { return kappa.basis().hi(); }
};

/// Frames Q(s) = [T | N | B] on an increasing grid starting at 0.
struct FrenetPath {
  std::vector<double> grid;
  std::vector<Rot3> frames;

  std::size_t size() const { return grid.size(); }
};

/// Points of a curve on a normalized arclength grid; `length` is the
/// original length before normalization.
struct ArclengthCurve {
  std::vector<double> grid;
  std::vector<Vec3> points;
  double length = 1.0;

  std::size_t size() const { return grid.size(); }
};

struct IntegratorOptions {
  /// Substeps follow the global lattice k · max_substep, so integrating
  /// [s, t] and [s, u] ∪ [u, t] visit the same lattice points.
  double max_substep = 1e-3;
};

/// Frenet generator A_θ(s) = hat(κ(s), τ(s), 0).
Skew3 a_theta(const ThetaFunction& theta, double s);

/// One step Q_{s+h} = Q_s exp(h A_θ(s + h/2)). h may be negative.
Rot3 lie_euler_midpoint_step(const Rot3& q, const ThetaFunction& theta, double s, double h);

/// Solves Q' = Q A_θ from Q(grid[0]) = q0, reporting Q at every grid point.
FrenetPath solve_frenet_path(const ThetaFunction& theta, const Rot3& q0, std::span<const double> grid,
                             const IntegratorOptions& opt = {});

/// φ_θ(t, s, Q): the frame at s + t of the solution with value Q at s.
Rot3 flow(const ThetaFunction& theta, double t, double s, const Rot3& q, const IntegratorOptions& opt = {});

/// X(s) = X0 + ∫₀ˢ Q(u) e₁ du by the trapezoid rule on the substep lattice.
ArclengthCurve reconstruct_curve(const ThetaFunction& theta, const Vec3& x0, const Rot3& q0,
                                 std::span<const double> grid, const IntegratorOptions& opt = {});

/// θ̃(s) = L θ(s L): the parameter of the curve scaled by 1/L, reindexed so
/// that a domain [0, L] maps to [0, 1].
ThetaFunction rescale_theta(const ThetaFunction& theta, double length);

/// Both functions sampled on `grid`.
void sample_theta(const ThetaFunction& theta, std::span<const double> grid, std::vector<double>& kappa,
                  std::vector<double>& tau);

}  // namespace fsmean
