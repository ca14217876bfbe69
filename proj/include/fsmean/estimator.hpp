#pragma once

#include <span>
#include <vector>

#include "fsmean/frenet.hpp"
#include "fsmean/kernel.hpp"
#include "fsmean/rng.hpp"

namespace fsmean {

/// Records (i, u, v, r, w): u = t − s, v = (s + t)/2, r = vee(R) with
/// R = −log(Q(t)ᵀQ(s))/(t − s), and w = 2/(n_i Q_i) K_h(u) u². Stored as
/// parallel arrays.
struct PseudoObservationSet {
  std::vector<int> curve;
  std::vector<double> u, v, r1, r2, r3, w;
  /// Pairs skipped because the relative rotation was too close to pi.
  std::size_t dropped = 0;

  std::size_t size() const { return u.size(); }
  void reserve(std::size_t n);
  void append(const PseudoObservationSet& other);
  /// Weighted mean of |r3|; zero for exact Frenet data.
  double r3_deviation() const;
};

struct Hyperparams {
  double h = 0.05;
  double lambda_kappa = 1e-8;
  double lambda_tau = 1e-8;
};

struct ObservationOptions {
  KernelShape kernel = KernelShape::Epanechnikov;
  /// Fraction of grid points at each end whose records get weight zero.
  double trim = 0.0;
};

PseudoObservationSet raw_log_increments(std::span<const FrenetPath> paths, double h,
                                        const ObservationOptions& opt = {});

/// Two independent penalized weighted spline fits: κ on r1 and τ on r2.
ThetaFunction fit_theta_splines(const PseudoObservationSet& obs, const Hyperparams& hp, int n_knots = 40);

/// Σ_i 1/(n_i Q_i) Σ_{0<|t−s|<=h} K_h(t − s) ‖log(Q(t)ᵀQ(s) exp(Ω(t − s, s; θ)))‖²_F with exp(Ω) from
/// the integrator. Pairs near angle pi are skipped and counted in `dropped`.
double criterion_exact(const ThetaFunction& theta, std::span<const FrenetPath> paths, double h,
                       std::size_t* dropped = nullptr, KernelShape kernel = KernelShape::Epanechnikov);

/// Same sum with exp(Ω) replaced by exp((t − s) A_θ((s + t)/2)).
double criterion_approx(const ThetaFunction& theta, std::span<const FrenetPath> paths, double h,
                        std::size_t* dropped = nullptr, KernelShape kernel = KernelShape::Epanechnikov);

/// λ_κ ∫κ''² + λ_τ ∫τ''².
double penalty(const ThetaFunction& theta, const Hyperparams& hp);

struct EstimateOptions {
  ObservationOptions obs;
  int n_knots = 40;
};

ThetaFunction estimate_mean_theta(std::span<const FrenetPath> paths, const Hyperparams& hp,
                                  const EstimateOptions& opt = {});

struct CvEntry {
  Hyperparams hp;
  double score = 0.0;
};

struct MeanShapeResult {
  ThetaFunction theta;
  FrenetPath mean_path;
  ArclengthCurve mean_curve;
  double criterion_value = 0.0;
  Hyperparams hyperparams;
  std::size_t dropped = 0;
  std::vector<CvEntry> cv_table;
};

/// Q̄₀ = Karcher mean of the initial frames, X̄₀ = mean initial point, and the
/// curve and path integrated from them.
MeanShapeResult mean_shape(const ThetaFunction& theta, std::span<const Rot3> initial_frames,
                           std::span<const Vec3> initial_points, std::span<const double> grid);

enum class CvStart {
  /// Each curve is predicted from its own earliest retained frame.
  EarliestRetained,
  /// Each curve is predicted from the Karcher mean of the retained frames
  /// transported back to s = 0.
  PopulationMean,
};

struct CvOptions {
  int folds = 10;
  CvStart start = CvStart::EarliestRetained;
  EstimateOptions estimate;
};

struct CvResult {
  Hyperparams best;
  std::vector<CvEntry> table;
};

/// K-fold cross-validation over the (curve, grid point) frame indices. Held
/// out frames are scored by 2·angle² against the prediction integrated from
/// the retained data. Ties go to the larger λ, then the larger h.
CvResult cross_validate(std::span<const FrenetPath> paths, std::span<const Hyperparams> candidates, Rng& rng,
                        const CvOptions& opt = {});

/// Log-spaced default candidate grid.
std::vector<Hyperparams> default_hyperparam_grid(double h_lo = 0.016, double h_hi = 0.1, int n_h = 4,
                                                 double lam_lo = 1e-10, double lam_hi = 1e-6, int n_lam = 3);

}  // namespace fsmean
