#include "fsmean/simgen.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "fsmean/errors.hpp"
#include "fsmean/interp.hpp"
#include "fsmean/parallel.hpp"

namespace fsmean {

namespace {

struct TagEntry {
  Scenario s;
  const char* tag;
};

constexpr TagEntry kTags[] = {{Scenario::S1_1, "S1.1"}, {Scenario::S1_2, "S1.2"}, {Scenario::S2_1, "S2.1"},
                              {Scenario::S2_2, "S2.2"}, {Scenario::S2_3, "S2.3"}, {Scenario::S3_1, "S3.1"},
                              {Scenario::S3_2, "S3.2"}, {Scenario::S4, "S4"}};

constexpr int kThetaKnots = 40;

}  // namespace

const char* scenario_tag(Scenario s) {
  for (const auto& e : kTags)
    if (e.s == s) return e.tag;
  return "?";
}

std::vector<std::string> scenario_tags() {
  std::vector<std::string> out;
  for (const auto& e : kTags) out.emplace_back(e.tag);
  return out;
}

Scenario parse_scenario(const std::string& tag) {
  for (const auto& e : kTags)
    if (tag == e.tag) return e.s;
  std::string valid;
  for (const auto& e : kTags) valid += std::string(valid.empty() ? "" : ", ") + e.tag;
  throw Error(ErrorKind::InvalidArgument, "unknown scenario '" + tag + "' (valid: " + valid + ")");
}

void ScenarioConfig::validate() const {
  require(n_curves >= 1, "n_curves must be >= 1");
  require(n_points >= 5, "n_points must be >= 5");
  require(alpha >= 0.0 && sigma_e >= 0.0, "noise levels must be nonnegative");
  require(alpha0 >= 0.0, "alpha0 must be nonnegative");
  require(sigma_kappa >= 0.0 && sigma_tau >= 0.0, "GP amplitudes must be nonnegative");
}

double matern52(double d, double ell) {
  const double r = std::sqrt(5.0) * std::abs(d) / ell;
  return (1.0 + r + r * r / 3.0) * std::exp(-r);
}

std::vector<double> matern52_gp_sample(std::span<const double> grid, double ell, Rng& rng) {
  const std::size_t n = grid.size();
  require(n >= 1 && n <= 2000, "matern52_gp_sample: grid size must be in [1, 2000]");
  require(ell > 0.0, "matern52_gp_sample: lengthscale must be positive");
  Eigen::MatrixXd k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k(i, j) = matern52(grid[i] - grid[j], ell);
  k.diagonal().array() += 1e-10;
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularInput, "Matérn covariance not positive definite");
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
  const Eigen::VectorXd f = llt.matrixL() * z;
  return {f.data(), f.data() + n};
}

std::vector<double> legendre_basis(double x, int k) {
  std::vector<double> out(static_cast<std::size_t>(std::max(k, 0)));
  const double y = 2.0 * x - 1.0;
  double p0 = 1.0, p1 = y;
  for (int m = 0; m < k; ++m) {
    double p;
    if (m == 0) {
      p = p0;
    } else if (m == 1) {
      p = p1;
    } else {
      p = ((2.0 * m - 1.0) * y * p1 - (m - 1.0) * p0) / m;
      p0 = p1;
      p1 = p;
    }
    out[m] = std::sqrt(2.0 * m + 1.0) * p;
  }
  return out;
}

double extrinsic_kappa(const Vec3& d1, const Vec3& d2) {
  const double v = d1.norm();
  return d1.cross(d2).norm() / (v * v * v);
}

double extrinsic_tau(const Vec3& d1, const Vec3& d2, const Vec3& d3) {
  const Vec3 c = d1.cross(d2);
  return c.dot(d3) / c.squaredNorm();
}

double s2_omega(double a, double s) {
  if (a == 0.0) return s;
  return std::log(s * std::expm1(a) + 1.0) / a;
}

double s2_omega_prime(double a, double s) {
  if (a == 0.0) return 1.0;
  return std::expm1(a) / (a * (s * std::expm1(a) + 1.0));
}

double s2_gamma(double a, double s) {
  if (a == 0.0) return s;
  return std::expm1(a * s) / std::expm1(a);
}

void s4_mu(double t, Vec3& mu, Vec3& d1, Vec3& d2) {
  const double th = 4.0 * t + 0.5, ph = 5.0 * (t + 1.0);
  const double st = std::sin(th), ct = std::cos(th), sp = std::sin(ph), cp = std::cos(ph);
  mu = Vec3(sp * ct, sp * st, cp);
  const Vec3 m_ph(cp * ct, cp * st, -sp);
  const Vec3 m_th(-sp * st, sp * ct, 0.0);
  const Vec3 m_phth(-cp * st, cp * ct, 0.0);
  const Vec3 m_thth(-sp * ct, -sp * st, 0.0);
  d1 = 5.0 * m_ph + 4.0 * m_th;
  d2 = -25.0 * mu + 40.0 * m_phth + 16.0 * m_thth;
}

Vec3 s4_point(double t, std::span<const double> xi) {
  const int k_max = static_cast<int>(std::min<std::size_t>(xi.size(), 20));
  Vec3 mu, m1, m2;
  s4_mu(t, mu, m1, m2);
  const auto p1 = legendre_basis(t / 2.0, k_max);
  const auto p2 = legendre_basis((t + 1.0) / 2.0, k_max);
  double u1 = 0.0, u2 = 0.0;
  for (int k = 0; k < k_max; ++k) {
    u1 += xi[k] * p1[k];
    u2 += xi[k] * p2[k];
  }
  const double th = 4.0 * t + 0.5, ph = 5.0 * (t + 1.0);
  const Vec3 axis(-std::sin(th), std::cos(th), 0.0);
  const Vec3 v = Eigen::AngleAxisd(ph, axis) * Vec3(u1, u2, 0.0) / std::sqrt(2.0);
  const double nv = v.norm();
  if (nv == 0.0) return mu;
  return Vec3(std::cos(nv) * mu + std::sin(nv) * v / nv).normalized();
}

namespace {

Dataset make_dataset(const ScenarioConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.config = cfg;
  d.truth_grid = linspace(0.0, 1.0, kTruthGridSize);
  return d;
}

Rot3 initial_frame(const ScenarioConfig& cfg, Rng& rng) {
  if (std::isinf(cfg.alpha0)) return Rot3::identity();
  return sample_fisher_langevin(Rot3::identity(), cfg.alpha0, rng);
}

void add_frame_noise(FrenetPath& p, double alpha, Rng& rng) {
  if (alpha <= 0.0) return;
  for (Rot3& q : p.frames) q = q * sample_fisher_langevin(Rot3::identity(), alpha, rng);
}

void add_point_noise(EuclideanCurve& c, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (Vec3& x : c.points) x += sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
}

ThetaFunction theta_from_samples(std::span<const double> x, std::span<const double> k, std::span<const double> t) {
  return {spline_from_samples(x, k, kThetaKnots), spline_from_samples(x, t, kThetaKnots)};
}

// Shared by S1 and S2: per-curve θ_i (normalized) and initial frame -> observations.
struct CurveDraw {
  ThetaFunction theta;
  FrenetPath path;
  EuclideanCurve curve;
  Rot3 q0;
  std::size_t rejected = 0;
};

void observe(const ScenarioConfig& cfg, CurveDraw& c, const Rot3& q0, double native_length, Rng& rng) {
  c.q0 = q0;
  const auto grid = linspace(0.0, 1.0, static_cast<std::size_t>(cfg.n_points));
  switch (cfg.scenario) {
    case Scenario::S1_1:
    case Scenario::S2_1:
      c.path = solve_frenet_path(c.theta, q0, grid);
      add_frame_noise(c.path, cfg.alpha, rng);
      break;
    case Scenario::S2_3: break;  // sampled at warped times by gen_s2
    default: {
      const ArclengthCurve x = reconstruct_curve(c.theta, Vec3::Zero(), q0, grid);
      c.curve.times.resize(grid.size());
      c.curve.points.resize(grid.size());
      for (std::size_t j = 0; j < grid.size(); ++j) {
        c.curve.times[j] = grid[j] * native_length;
        c.curve.points[j] = x.points[j] * native_length;
      }
      add_point_noise(c.curve, cfg.sigma_e, rng);
    }
  }
}

void collect(Dataset& d, std::vector<CurveDraw>& draws) {
  for (CurveDraw& c : draws) {
    d.rejected_draws += c.rejected;
    std::vector<double> k, t;
    sample_theta(c.theta, d.truth_grid, k, t);
    d.curve_kappa.push_back(std::move(k));
    d.curve_tau.push_back(std::move(t));
    if (c.path.size() > 0) d.paths.push_back(std::move(c.path));
    if (c.curve.size() > 0) d.curves.push_back(std::move(c.curve));
    d.thetas.push_back(std::move(c.theta));
    d.initial_frames.push_back(c.q0);
  }
}

}  // namespace

Dataset gen_s1(const ScenarioConfig& cfg) {
  require(cfg.scenario == Scenario::S1_1 || cfg.scenario == Scenario::S1_2, "gen_s1: scenario must be S1.x");
  Dataset d = make_dataset(cfg);
  constexpr double kLength = 5.0;
  d.length_scale = kLength;
  const auto native = linspace(0.0, kLength, 201);
  auto kbar = [](double s) { return std::exp(std::sin(s)); };
  auto tbar = [](double s) { return 0.2 * s - 0.5; };

  const Rng master(cfg.seed);
  std::vector<CurveDraw> draws(static_cast<std::size_t>(cfg.n_curves));
  parallel_for(draws.size(), [&](std::size_t i) {
    Rng rng = master.split(i);
    CurveDraw& c = draws[i];
    std::vector<double> k(native.size()), t(native.size());
    for (;;) {
      const auto z1 = matern52_gp_sample(native, 1.0, rng);
      const auto z2 = matern52_gp_sample(native, 1.0, rng);
      bool crosses = false;
      for (std::size_t j = 0; j < native.size(); ++j) {
        const double kv = kbar(native[j]) + cfg.sigma_kappa * z1[j];
        if (kv <= 0.0) crosses = true;
        k[j] = std::abs(kv);
        t[j] = tbar(native[j]) + cfg.sigma_tau * z2[j];
      }
      if (!crosses) break;
      ++c.rejected;
    }
    c.theta = rescale_theta(theta_from_samples(native, k, t), kLength);
    const Rot3 q0 = initial_frame(cfg, rng);
    observe(cfg, c, q0, kLength, rng);
  });
  collect(d, draws);

  for (double s : d.truth_grid) {
    d.truth_kappa.push_back(kLength * kbar(kLength * s));
    d.truth_tau.push_back(kLength * tbar(kLength * s));
  }
  return d;
}

Dataset gen_s2(const ScenarioConfig& cfg) {
  require(cfg.scenario == Scenario::S2_1 || cfg.scenario == Scenario::S2_2 || cfg.scenario == Scenario::S2_3,
          "gen_s2: scenario must be S2.x");
  Dataset d = make_dataset(cfg);
  auto kbar = [](double s) { return 10.0 * (std::sin(3.0 * s) + 1.0); };
  auto tbar = [](double s) { return -10.0 * std::sin(2.0 * std::numbers::pi * s); };
  const std::size_t n_curves = static_cast<std::size_t>(cfg.n_curves);
  auto spaced = [&](double lo, double hi, std::size_t i) {
    return n_curves == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / (n_curves - 1);
  };
  const auto fine = linspace(0.0, 1.0, 401);

  const Rng master(cfg.seed);
  std::vector<CurveDraw> draws(n_curves);
  parallel_for(n_curves, [&](std::size_t i) {
    Rng rng = master.split(i);
    CurveDraw& c = draws[i];
    const double a = spaced(-1.0, 1.0, i);
    std::vector<double> k(fine.size()), t(fine.size());
    for (std::size_t j = 0; j < fine.size(); ++j) {
      const double w = s2_omega(a, fine[j]), wp = s2_omega_prime(a, fine[j]);
      k[j] = wp * kbar(w);
      t[j] = wp * tbar(w);
    }
    c.theta = theta_from_samples(fine, k, t);
    const Rot3 q0 = initial_frame(cfg, rng);
    observe(cfg, c, q0, 1.0, rng);
    if (cfg.scenario == Scenario::S2_3) {
      const double b = spaced(-0.1, 0.1, i);
      const auto times = linspace(0.0, 1.0, static_cast<std::size_t>(cfg.n_points));
      std::vector<double> s(times.size());
      for (std::size_t j = 0; j < times.size(); ++j)
        s[j] = s2_gamma(a, b * std::sin(2.0 * std::numbers::pi * times[j]) + times[j]);
      s.front() = 0.0;
      s.back() = 1.0;
      const ArclengthCurve x = reconstruct_curve(c.theta, Vec3::Zero(), q0, s);
      c.curve.times = times;
      c.curve.points = x.points;
      add_point_noise(c.curve, cfg.sigma_e, rng);
    }
  });
  collect(d, draws);

  for (double s : d.truth_grid) {
    d.truth_kappa.push_back(kbar(s));
    d.truth_tau.push_back(tbar(s));
  }
  return d;
}

namespace {

struct HelixLike {
  double a, b, c;
  Vec3 x(double t) const { return {std::cos(a * t), std::sin(b * t), c * t}; }
  Vec3 d1(double t) const { return {-a * std::sin(a * t), b * std::cos(b * t), c}; }
  Vec3 d2(double t) const { return {-a * a * std::cos(a * t), -b * b * std::sin(b * t), 0.0}; }
  Vec3 d3(double t) const { return {a * a * a * std::sin(a * t), -b * b * b * std::cos(b * t), 0.0}; }
};

// θ̃(s̃) = L θ(t(s̃ L)) of the S3 curve on `grid`.
void s3_theta(const HelixLike& h, std::span<const double> grid, std::vector<double>& kappa, std::vector<double>& tau) {
  constexpr double kT = 5.0;
  const auto tf = linspace(0.0, kT, 5001);
  std::vector<double> sf(tf.size(), 0.0);
  for (std::size_t j = 1; j < tf.size(); ++j) {
    const double tm = 0.5 * (tf[j - 1] + tf[j]);
    const double dt = tf[j] - tf[j - 1];
    // Simpson on each cell.
    sf[j] = sf[j - 1] + dt / 6.0 * (h.d1(tf[j - 1]).norm() + 4.0 * h.d1(tm).norm() + h.d1(tf[j]).norm());
  }
  const double length = sf.back();
  const CubicInterpolant t_of_s(sf, tf);
  kappa.resize(grid.size());
  tau.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double t = std::clamp(t_of_s(grid[j] * length), 0.0, kT);
    const Vec3 a1 = h.d1(t), a2 = h.d2(t), a3 = h.d3(t);
    kappa[j] = length * extrinsic_kappa(a1, a2);
    tau[j] = length * extrinsic_tau(a1, a2, a3);
  }
}

}  // namespace

Dataset gen_s3(const ScenarioConfig& cfg) {
  require(cfg.scenario == Scenario::S3_1 || cfg.scenario == Scenario::S3_2, "gen_s3: scenario must be S3.x");
  Dataset d = make_dataset(cfg);
  const double var = cfg.sigma_p2 >= 0.0 ? cfg.sigma_p2 : (cfg.scenario == Scenario::S3_1 ? 0.02 : 0.05);
  const double sd = std::sqrt(var);
  const HelixLike ref{1.0, 0.9, 0.8};
  const std::size_t n_curves = static_cast<std::size_t>(cfg.n_curves);

  const Rng master(cfg.seed);
  d.curves.resize(n_curves);
  d.curve_kappa.resize(n_curves);
  d.curve_tau.resize(n_curves);
  parallel_for(n_curves, [&](std::size_t i) {
    Rng rng = master.split(i);
    HelixLike h = ref;
    h.a += sd * rng.normal();
    h.b += sd * rng.normal();
    h.c += sd * rng.normal();
    EuclideanCurve& c = d.curves[i];
    c.times = linspace(0.0, 5.0, static_cast<std::size_t>(cfg.n_points));
    for (double t : c.times) c.points.push_back(h.x(t));
    add_point_noise(c, cfg.sigma_e, rng);
    s3_theta(h, d.truth_grid, d.curve_kappa[i], d.curve_tau[i]);
  });

  s3_theta(ref, d.truth_grid, d.ref_kappa, d.ref_tau);
  d.truth_kappa.assign(kTruthGridSize, 0.0);
  d.truth_tau.assign(kTruthGridSize, 0.0);
  for (std::size_t i = 0; i < n_curves; ++i)
    for (std::size_t j = 0; j < kTruthGridSize; ++j) {
      d.truth_kappa[j] += d.curve_kappa[i][j] / static_cast<double>(n_curves);
      d.truth_tau[j] += d.curve_tau[i][j] / static_cast<double>(n_curves);
    }
  return d;
}

Dataset gen_s4(const ScenarioConfig& cfg) {
  require(cfg.scenario == Scenario::S4, "gen_s4: scenario must be S4");
  Dataset d = make_dataset(cfg);
  constexpr int kBasis = 20;
  const std::size_t n_curves = static_cast<std::size_t>(cfg.n_curves);

  const Rng master(cfg.seed);
  d.curves.resize(n_curves);
  parallel_for(n_curves, [&](std::size_t i) {
    Rng rng = master.split(i);
    std::vector<double> xi(kBasis);
    for (int k = 1; k <= kBasis; ++k) xi[k - 1] = std::pow(0.07, k / 4.0) * rng.normal();
    EuclideanCurve& c = d.curves[i];
    c.times = linspace(0.0, 1.0, static_cast<std::size_t>(cfg.n_points));
    for (double t : c.times) c.points.push_back(s4_point(t, xi));
    add_point_noise(c, cfg.sigma_e, rng);
  });

  // k_g of μ against its normalized arclength.
  const auto tf = linspace(0.0, 1.0, 20001);
  std::vector<double> sf(tf.size(), 0.0), kg(tf.size());
  auto speed = [](double t) {
    Vec3 mu, m1, m2;
    s4_mu(t, mu, m1, m2);
    return m1.norm();
  };
  for (std::size_t j = 0; j < tf.size(); ++j) {
    Vec3 mu, m1, m2;
    s4_mu(tf[j], mu, m1, m2);
    const double v = m1.norm();
    kg[j] = mu.dot(m1.cross(m2)) / (v * v * v);
    if (j > 0) {
      const double dt = tf[j] - tf[j - 1];
      sf[j] = sf[j - 1] + dt / 6.0 * (speed(tf[j - 1]) + 4.0 * speed(tf[j - 1] + 0.5 * dt) + v);
    }
  }
  const double length = sf.back();
  for (double& s : sf) s /= length;
  d.truth_kg = resample(sf, kg, d.truth_grid);
  return d;
}

Dataset generate(const ScenarioConfig& cfg) {
  switch (cfg.scenario) {
    case Scenario::S1_1:
    case Scenario::S1_2: return gen_s1(cfg);
    case Scenario::S2_1:
    case Scenario::S2_2:
    case Scenario::S2_3: return gen_s2(cfg);
    case Scenario::S3_1:
    case Scenario::S3_2: return gen_s3(cfg);
    case Scenario::S4: return gen_s4(cfg);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown scenario");
}

Dataset torsion_family(std::size_t n_curves, std::size_t n_points) {
  require(n_curves >= 2 && n_points >= 10, "torsion_family: need >= 2 curves of >= 10 points");
  Dataset d;
  d.truth_grid = linspace(0.0, 1.0, kTruthGridSize);
  d.truth_kappa.assign(kTruthGridSize, 5.0);
  d.truth_tau.assign(kTruthGridSize, 0.0);
  const auto grid = linspace(0.0, 1.0, n_points);
  const auto fine = linspace(0.0, 1.0, 400);
  const std::vector<double> five(fine.size(), 5.0);
  for (std::size_t i = 0; i < n_curves; ++i) {
    const double a = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n_curves - 1);
    auto tau = [a](double s) { return -3.0 * a * std::sin(2.0 * std::numbers::pi * s); };
    std::vector<double> t;
    for (double s : fine) t.push_back(tau(s));
    d.thetas.push_back(theta_from_samples(fine, five, t));
    d.initial_frames.push_back(Rot3::identity());
    const ArclengthCurve c = reconstruct_curve(d.thetas.back(), Vec3::Zero(), Rot3::identity(), grid);
    d.curves.push_back({grid, c.points});
    d.curve_kappa.push_back(d.truth_kappa);
    std::vector<double> tt;
    for (double s : d.truth_grid) tt.push_back(tau(s));
    d.curve_tau.push_back(std::move(tt));
  }
  return d;
}

}  // namespace fsmean
