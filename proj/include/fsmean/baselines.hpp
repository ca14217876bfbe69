#pragma once

#include <span>
#include <vector>

#include "fsmean/alignment.hpp"
#include "fsmean/estimator.hpp"
#include "fsmean/preprocess.hpp"

namespace fsmean {

/// Rotation R minimizing Σ_j ‖R a_j − b_j‖² (no translation).
Rot3 procrustes_rotation(std::span<const Vec3> a, std::span<const Vec3> b);

/// Pointwise average. With `register_curves`, each curve is first centred at
/// its mean point and rotated onto the first (centred) curve.
ArclengthCurve arithmetic_mean(std::span<const ArclengthCurve> curves, bool register_curves = true);

/// q = ẋ/√‖ẋ‖ on a grid of [0, 1].
struct SrvfFunction {
  std::vector<double> grid;
  std::vector<Vec3> q;

  std::size_t size() const { return grid.size(); }
  /// ∫ ‖q‖², the length of the curve.
  double squared_norm() const;
};

/// Derivative by degree-4 local polynomial regression on the curve's grid;
/// points with speed at most 1e-10 map to zero.
SrvfFunction srvf_transform(const ArclengthCurve& curve, double bandwidth = 0.05);

/// x(t) = x0 + ∫ q‖q‖ by the trapezoid rule.
ArclengthCurve srvf_to_curve(const SrvfFunction& q, const Vec3& x0);

struct SrvfAlignment {
  double distance = 0.0;
  /// (O q1∘γ) √γ' is the aligned copy of q1.
  Warping gamma;
  Rot3 rotation;
  SrvfFunction aligned;
  int iterations = 0;
  bool converged = false;
};

/// min over rotations O and warps γ of ‖q0 − O (q1∘γ) √γ'‖, alternating a
/// Procrustes step with a dynamic-programming warp until the distance changes
/// by less than 1e-6 or 20 rounds. Both SRVFs must share a uniform grid.
SrvfAlignment srvf_distance(const SrvfFunction& q0, const SrvfFunction& q1);

struct SrvfMean {
  ArclengthCurve curve;
  SrvfFunction q;
  int iterations = 0;
  bool converged = false;
};

/// Karcher mean of SRVFs: align to the template, average, repeat until the
/// template moves by less than 1e-4 (L² norm) or 30 rounds. Starts from the
/// first curve; the mean curve starts at the mean first point.
SrvfMean srvf_karcher_mean(std::span<const ArclengthCurve> curves, double bandwidth = 0.05);

/// Pointwise mean of per-curve Frenet-Serret estimates on `grid`.
ThetaSamples individual_fs_mean(std::span<const FrenetPath> paths, const Hyperparams& hp,
                                std::span<const double> grid, const EstimateOptions& opt = {});

/// Pointwise median of per-curve extrinsic estimates, linearly resampled onto
/// `grid`. Points with undefined torsion are left out of the τ median.
ThetaSamples extrinsic_median(std::span<const DerivativeJet> jets, std::span<const double> grid);

/// Pointwise median of det(α, α', α'')/‖α'‖³ over curves on the unit sphere,
/// with derivatives by local polynomial regression.
std::vector<double> extrinsic_kg_median(std::span<const ArclengthCurve> curves, std::span<const double> grid,
                                        double bandwidth = 0.1);

}  // namespace fsmean
