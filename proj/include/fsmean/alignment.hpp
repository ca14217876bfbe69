#pragma once

#include <span>
#include <vector>

#include "fsmean/estimator.hpp"

namespace fsmean {

/// Increasing diffeomorphism of [0, 1] sampled on a uniform grid.
struct Warping {
  std::vector<double> grid;
  std::vector<double> values;

  static Warping identity(std::span<const double> grid);
  /// Throws InvalidArgument unless values(0) = 0, values(1) = 1 and every
  /// increment is at least 1e-9.
  void validate() const;

  std::size_t size() const { return grid.size(); }
  /// Monotone interpolation between grid values.
  double operator()(double s) const;
  /// γ' on the grid by fourth-order differences.
  std::vector<double> derivative() const;
  Warping inverse() const;
  /// (*this)∘inner on the same grid.
  Warping compose(const Warping& inner) const;
  /// max_j |γ(s_j) − other(s_j)|.
  double sup_distance(const Warping& other) const;
};

/// Karcher mean of warps under the square-root-slope representation
/// ψ = √γ', in which composition on the right is an isometry.
Warping karcher_mean_warp(std::span<const Warping> warps, int max_iter = 50, double tol = 1e-10);

/// (κ, τ) sampled on a grid.
struct ThetaSamples {
  std::vector<double> kappa, tau;
};

/// (γ·θ)(s) = θ(γ(s)) γ'(s) on γ's grid, with θ given on the same grid. A
/// right action: γ₂·(γ₁·θ) = (γ₁∘γ₂)·θ.
ThetaSamples warp_action(const ThetaSamples& theta, const Warping& gamma);

/// Sample functions on a common grid, reduced to a mean and K principal
/// components orthonormal in the trapezoid inner product.
struct FpcaModel {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<std::vector<double>> components;
  std::vector<double> eigenvalues;  // all of them, descending
  std::vector<std::vector<double>> scores;

  /// ν + Σ_k ⟨f − ν, φ_k⟩ φ_k.
  std::vector<double> reconstruct(std::span<const double> f) const;
};

/// Functions may be longer than the grid by an integer factor (stacked
/// channels over the same grid); the inner product repeats the grid weights.
FpcaModel fpca(std::span<const std::vector<double>> functions, std::span<const double> grid, int k);

/// Smallest K whose eigenvalues explain `fraction` of the variance, capped.
int choose_components(std::span<const double> eigenvalues, double fraction = 0.9, int cap = 5);

/// argmin_γ ‖target − γ·source‖² over both channels by dynamic programming
/// on the grid lattice with slopes in {1/3, 1/2, 2/3, 1, 3/2, 2, 3}, then
/// one pass of continuous node adjustment.
Warping optimal_warp(const ThetaSamples& target, const ThetaSamples& source, std::span<const double> grid);

/// ‖target − γ·source‖² with γ' taken as the piecewise-linear slope.
double warp_objective(const ThetaSamples& target, const ThetaSamples& source, const Warping& gamma);

/// Channel-wise form: argmin_γ Σ_c ‖target_c − (source_c∘γ)(γ')^power‖².
/// power = 1 is the action above; power = 1/2 is the square-root velocity action.
Warping optimal_warp_channels(std::span<const std::vector<double>> target, std::span<const std::vector<double>> source,
                              std::span<const double> grid, double power = 1.0);
double warp_objective_channels(std::span<const std::vector<double>> target,
                               std::span<const std::vector<double>> source, const Warping& gamma, double power = 1.0);

struct AlignmentOptions {
  /// Number of principal components in the refinement step; negative picks
  /// 90% of variance, at most 5. Zero aligns every curve to the template.
  int k = 0;
  /// Template weights; empty means uniform.
  std::vector<double> weights;
  int max_iter = 20;
  double tol = 1e-3;
};

struct AlignmentResult {
  std::vector<ThetaSamples> aligned;
  /// Cumulative warps: aligned[i] = warps[i]·raw[i]. Centered so that their
  /// Karcher mean is the identity.
  std::vector<Warping> warps;
  ThetaSamples template_mean;
  int iterations = 0;
  bool converged = false;
};

AlignmentResult align_raw_estimates(std::span<const ThetaSamples> raw, std::span<const double> grid,
                                    const AlignmentOptions& opt = {});

struct PhaseEstimate {
  ThetaFunction theta;
  std::vector<Warping> warps;
  AlignmentResult alignment;
};

struct PhaseOptions {
  EstimateOptions estimate;
  AlignmentOptions alignment;
  /// Grid points of the alignment lattice.
  std::size_t grid_size = 200;
};

/// Per-curve spline fits of the pseudo-observations are aligned; the records
/// are then moved by the warps (v ← Γ⁻¹(v), r ← r·Γ'(Γ⁻¹(v))) and fitted jointly.
PhaseEstimate estimate_mean_theta_phase(std::span<const FrenetPath> paths, const Hyperparams& hp,
                                        const PhaseOptions& opt = {});

}  // namespace fsmean
