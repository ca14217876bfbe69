#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fsmean/frenet.hpp"
#include "fsmean/preprocess.hpp"
#include "fsmean/rng.hpp"

namespace fsmean {

enum class Scenario { S1_1, S1_2, S2_1, S2_2, S2_3, S3_1, S3_2, S4 };

const char* scenario_tag(Scenario s);
/// Throws InvalidArgument listing the valid tags.
Scenario parse_scenario(const std::string& tag);
std::vector<std::string> scenario_tags();

struct ScenarioConfig {
  Scenario scenario = Scenario::S1_1;
  int n_curves = 25;
  int n_points = 100;
  /// Concentration of the per-frame noise M_ij in S1.1 / S2.1; 0 disables it.
  double alpha = 0.0;
  /// Standard deviation of the additive point noise.
  double sigma_e = 0.0;
  /// Variance of the S3 parameter draws; negative selects 0.02 (S3.1) or 0.05 (S3.2).
  double sigma_p2 = -1.0;
  /// Concentration of the initial frames; infinity gives identity frames.
  double alpha0 = 10.0;
  double sigma_kappa = 0.3;
  double sigma_tau = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::size_t kTruthGridSize = 200;

struct Dataset {
  ScenarioConfig config;
  /// Frame observations (S1.1, S2.1).
  std::vector<FrenetPath> paths;
  /// Point observations (all other scenarios).
  std::vector<EuclideanCurve> curves;

  /// Uniform grid of kTruthGridSize points on [0, 1].
  std::vector<double> truth_grid;
  /// Mean parameter on the normalized arclength scale (S1–S3).
  std::vector<double> truth_kappa, truth_tau;
  /// Mean geodesic curvature (S4).
  std::vector<double> truth_kg;
  /// S3 only: the parameter of the reference curve.
  std::vector<double> ref_kappa, ref_tau;
  /// Per-curve parameters on truth_grid (S1–S3).
  std::vector<std::vector<double>> curve_kappa, curve_tau;
  /// Per-curve parameters as splines (S1, S2).
  std::vector<ThetaFunction> thetas;
  /// Per-curve Q_i(0) (S1, S2).
  std::vector<Rot3> initial_frames;
  /// Native length of the S1 curves; errors are divided by its square.
  double length_scale = 1.0;
  /// S1 Gaussian-process draws rejected because κ̄ + σζ crossed zero.
  std::size_t rejected_draws = 0;

  bool has_frames() const { return !paths.empty(); }
  bool spherical() const { return config.scenario == Scenario::S4; }
};

/// Matérn ν = 5/2 covariance.
double matern52(double d, double lengthscale);

/// Zero-mean Gaussian process draw on `grid` (at most 2000 points).
std::vector<double> matern52_gp_sample(std::span<const double> grid, double lengthscale, Rng& rng);

/// Orthonormal Legendre polynomials Φ_1..Φ_K on [0, 1] evaluated at x.
std::vector<double> legendre_basis(double x, int k);

/// κ, τ of a regular parametric curve from its first three derivatives.
double extrinsic_kappa(const Vec3& d1, const Vec3& d2);
double extrinsic_tau(const Vec3& d1, const Vec3& d2, const Vec3& d3);

Dataset gen_s1(const ScenarioConfig& cfg);
Dataset gen_s2(const ScenarioConfig& cfg);
Dataset gen_s3(const ScenarioConfig& cfg);
Dataset gen_s4(const ScenarioConfig& cfg);

/// Dispatches on cfg.scenario.
Dataset generate(const ScenarioConfig& cfg);

/// S2 warping family: ω_a (shape warp) and its inverse γ_a.
double s2_omega(double a, double s);
double s2_omega_prime(double a, double s);
double s2_gamma(double a, double s);

/// S4 mean curve μ(t) and its first two derivatives.
void s4_mu(double t, Vec3& mu, Vec3& d1, Vec3& d2);

/// exp_{μ(t)}(Σ ξ_k φ_k(t)) for coefficients ξ (at most 20 are used).
Vec3 s4_point(double t, std::span<const double> xi);

/// Unit-length curves with κ ≡ 5 and τ_i(s) = −3 a_i sin(2πs), a_i equally
/// spaced on [−1, 1], all started at the origin with the identity frame.
/// The mean parameter is (5, 0). Deterministic.
Dataset torsion_family(std::size_t n_curves = 25, std::size_t n_points = 100);

}  // namespace fsmean
