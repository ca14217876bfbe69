#pragma once

#include <span>
#include <vector>

#include "fsmean/estimator.hpp"
#include "fsmean/preprocess.hpp"

namespace fsmean {

/// Spherical frames [α | β | γ] on a normalized arclength grid. `length` is
/// the arclength on the unit sphere, so that α' = L β on [0, 1].
struct SphericalFramePath {
  std::vector<double> grid;
  std::vector<Rot3> frames;
  double length = 1.0;

  std::size_t size() const { return grid.size(); }
  /// Same frames viewed as a Frenet path with θ = (L, L k_g(s)).
  FrenetPath as_frenet() const { return {grid, frames}; }
};

/// Geodesic curvature in units of the unit-sphere arclength, indexed by
/// normalized arclength, with the length of the curve it describes.
struct GeodesicCurvature {
  CubicSpline kg;
  double length = 1.0;

  double operator()(double s) const { return kg(s); }
};

/// hat(1, k_g, 0): α' = β, β' = −α + k_g γ, γ' = −k_g β.
Skew3 spherical_a(double kg);

/// α = point/‖point‖, β = α-orthogonal part of the local polynomial
/// derivative, normalized, γ = α × β. Throws InvalidArgument unless every
/// point is within 1e-3 of unit norm and DegenerateSpeed where β vanishes.
SphericalFramePath spherical_frames(const ArclengthCurve& curve, double bandwidth,
                                    KernelShape shape = KernelShape::Epanechnikov);

/// Radius normalized by the mean norm, arclength reparametrization, points
/// projected back onto the unit sphere, then spherical_frames.
SphericalFramePath preprocess_spherical(const EuclideanCurve& curve, const PreprocessOptions& opt = {});

/// Pseudo-observations of the spherical frames, each divided by its curve's
/// length; the k_g slot is spline-fitted with λ_τ. `unit_entry` receives the
/// weighted mean of the α↔β slot, which should be close to 1.
GeodesicCurvature estimate_mean_kg(std::span<const SphericalFramePath> paths, const Hyperparams& hp,
                                   const EstimateOptions& opt = {}, double* unit_entry = nullptr);

/// Frames of the spherical ODE from frame0 at s = 0.
SphericalFramePath solve_spherical_path(const GeodesicCurvature& kg, const Rot3& frame0,
                                        std::span<const double> grid);

/// First column of solve_spherical_path.
ArclengthCurve reconstruct_spherical_curve(const GeodesicCurvature& kg, const Rot3& frame0,
                                           std::span<const double> grid);

}  // namespace fsmean
