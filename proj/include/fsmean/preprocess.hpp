#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fsmean/frenet.hpp"
#include "fsmean/kernel.hpp"

namespace fsmean {

/// Time-stamped samples of one trajectory.
struct EuclideanCurve {
  std::vector<double> times;
  std::vector<Vec3> points;

  std::size_t size() const { return times.size(); }
};

/// Estimated X', X'', X''' with respect to arclength.
struct DerivativeJet {
  std::vector<double> grid;
  std::vector<Vec3> d1, d2, d3;

  std::size_t size() const { return grid.size(); }
};

struct ArclengthResult {
  std::vector<double> s;  // s(t_i)
  double length = 0.0;
};

/// Cumulative arclength from local linear velocity estimates (bandwidth in
/// time units) and the trapezoid rule. Throws DegenerateSpeed if the
/// estimated speed drops below 1e-10 at an interior sample.
ArclengthResult arclength(const EuclideanCurve& curve, double bandwidth,
                          KernelShape shape = KernelShape::Epanechnikov);

/// Z(u) = X(uL)/L on n_out uniform points of [0, 1] (n_out = 0 keeps the
/// input count).
ArclengthCurve normalize_to_unit_length(const EuclideanCurve& curve, std::span<const double> s, double length,
                                        std::size_t n_out = 0);

/// Degree-4 kernel-weighted local polynomial fit at each grid point. Near
/// the ends the window is shifted inside [0, 1] while the expansion stays
/// centred at the point. Throws IllConditioned when the local design has
/// condition number above 1e10.
DerivativeJet local_poly_derivatives(const ArclengthCurve& curve, double bandwidth,
                                     KernelShape shape = KernelShape::Epanechnikov);

/// Curvature and torsion by the extrinsic formulas. Torsion is missing
/// where ‖d1 × d2‖ <= 1e-12.
struct ExtrinsicTheta {
  std::vector<double> grid;
  std::vector<double> kappa;
  std::vector<std::optional<double>> tau;
};

ExtrinsicTheta extrinsic_theta(const DerivativeJet& jet);

/// Q^GS: T = d1/‖d1‖, N from d2 orthogonalized against T, B = T × N.
/// Throws FrameDegenerate where d1 or the normal part of d2 vanishes.
FrenetPath gram_schmidt_frames(const DerivativeJet& jet);

struct LpFrames {
  FrenetPath path;
  std::vector<double> kappa, kappa_prime, tau;
  /// Points where the alternation failed and Q^GS was used instead.
  std::vector<bool> fallback;
};

/// Q^LP: fits X(s + h) ≈ X(s) + Q (h − h³κ²/6, h²κ/2 + h³κ'/6, h³κτ/6) by
/// alternating a weighted Procrustes step for (X(s), Q) with a linear solve
/// for (κ, κ', κτ).
LpFrames constrained_lp_frames(const ArclengthCurve& curve, double bandwidth,
                               KernelShape shape = KernelShape::Epanechnikov);

enum class FrameMethod { GramSchmidt, LocalPolynomial };

struct PreprocessOptions {
  double time_bandwidth = 0.0;  // 0: 5% of the time span
  double bandwidth = 0.1;
  std::size_t n_grid = 0;  // 0: input sample count
  FrameMethod frames = FrameMethod::LocalPolynomial;
  KernelShape kernel = KernelShape::Epanechnikov;
};

struct PreprocessedCurve {
  ArclengthCurve curve;
  DerivativeJet jet;
  FrenetPath frames;
  std::size_t fallback_count = 0;
};

PreprocessedCurve preprocess_curve(const EuclideanCurve& curve, const PreprocessOptions& opt = {});

}  // namespace fsmean
