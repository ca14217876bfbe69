#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "fsmean/errors.hpp"
#include "fsmean/interp.hpp"
#include "fsmean/parallel.hpp"
#include "fsmean/simgen.hpp"

using namespace fsmean;

namespace {

double rel_l2(const std::vector<double>& grid, const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size()), n(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    d[j] = (a[j] - b[j]) * (a[j] - b[j]);
    n[j] = b[j] * b[j];
  }
  return std::sqrt(trapezoid(grid, d) / trapezoid(grid, n));
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.paths.size() != b.paths.size() || a.curves.size() != b.curves.size()) return false;
  for (std::size_t i = 0; i < a.paths.size(); ++i)
    for (std::size_t j = 0; j < a.paths[i].size(); ++j)
      if (a.paths[i].frames[j].matrix() != b.paths[i].frames[j].matrix()) return false;
  for (std::size_t i = 0; i < a.curves.size(); ++i)
    if (a.curves[i].points != b.curves[i].points || a.curves[i].times != b.curves[i].times) return false;
  return a.truth_kappa == b.truth_kappa && a.truth_tau == b.truth_tau && a.truth_kg == b.truth_kg;
}

}  // namespace

TEST_CASE("Matérn 5/2 covariance") {
  CHECK(matern52(0.0, 1.0) == 1.0);
  const double k1 = (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0));
  CHECK(matern52(1.0, 1.0) == doctest::Approx(k1).epsilon(1e-14));
  CHECK(k1 == doctest::Approx(0.5240).epsilon(1e-3));

  const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};
  Rng rng(17);
  double s = 0.0, ss = 0.0, cross = 0.0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const auto f = matern52_gp_sample(grid, 1.0, rng);
    s += f[2];
    ss += f[2] * f[2];
    cross += f[2] * f[4];
  }
  const double var = ss / draws - (s / draws) * (s / draws);
  CHECK(var >= 0.95);
  CHECK(var <= 1.05);
  CHECK(cross / draws == doctest::Approx(k1).epsilon(0.1));
}

TEST_CASE("orthonormal Legendre basis") {
  const int k = 20;
  const auto x = linspace(0.0, 1.0, 20001);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
  const double h = x[1] - x[0];
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double w = (j == 0 || j + 1 == x.size()) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    const auto p = legendre_basis(x[j], k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) gram(a, b) += w * h / 3.0 * p[a] * p[b];
  }
  CHECK((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);
  const auto p = legendre_basis(0.75, 3);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == doctest::Approx(std::sqrt(3.0) * 0.5));
  CHECK(p[2] == doctest::Approx(std::sqrt(5.0) * 0.5 * (3.0 * 0.25 - 1.0)));
}

TEST_CASE("scenario tags") {
  for (const auto& t : scenario_tags()) CHECK(scenario_tag(parse_scenario(t)) == t);
  try {
    parse_scenario("S9");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("S2.3") != std::string::npos);
  }
}

TEST_CASE("S1 degenerate population is the mean path") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::S1_1;
  cfg.n_curves = 1;
  cfg.sigma_kappa = cfg.sigma_tau = 0.0;
  cfg.alpha0 = std::numeric_limits<double>::infinity();
  cfg.seed = 1;
  const Dataset d = generate(cfg);
  REQUIRE(d.paths.size() == 1);
  CHECK(d.rejected_draws == 0);
  const auto x = linspace(0.0, 1.0, 801);
  std::vector<double> k, t;
  for (double s : x) {
    k.push_back(5.0 * std::exp(std::sin(5.0 * s)));
    t.push_back(5.0 * (s - 0.5));
  }
  const ThetaFunction bar{spline_from_samples(x, k, 80), spline_from_samples(x, t, 80)};
  const FrenetPath ref = solve_frenet_path(bar, Rot3::identity(), d.paths[0].grid);
  double worst = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) worst = std::max(worst, geodesic_dist(ref.frames[j], d.paths[0].frames[j]));
  CHECK(worst < 1e-3);
  CHECK(d.truth_kappa.front() == doctest::Approx(5.0));
  CHECK(d.truth_tau.back() == doctest::Approx(2.5));
}

TEST_CASE("S1 draws") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::S1_1;
  cfg.seed = 7;
  const Dataset d = generate(cfg);
  CHECK(d.paths.size() == 25);
  CHECK(d.paths[0].size() == 100);
  CHECK(d.length_scale == 5.0);
  for (const auto& k : d.curve_kappa)
    for (double v : k) CHECK(v >= 0.0);

  // Noiseless frames are the solutions of the recorded parameters.
  for (std::size_t i = 0; i < d.paths.size(); i += 6) {
    const FrenetPath re = solve_frenet_path(d.thetas[i], d.paths[i].frames[0], d.paths[i].grid);
    double worst = 0.0;
    for (std::size_t j = 0; j < re.size(); ++j)
      worst = std::max(worst, (re.frames[j].matrix() - d.paths[i].frames[j].matrix()).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-8);
  }

  const Dataset again = generate(cfg);
  CHECK(same_dataset(d, again));
  const int saved = num_threads();
  set_num_threads(4);
  const Dataset threaded = generate(cfg);
  set_num_threads(saved);
  CHECK(same_dataset(d, threaded));
  cfg.seed = 8;
  CHECK_FALSE(same_dataset(d, generate(cfg)));
}

TEST_CASE("S1 frame noise and Euclidean observations") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::S1_1;
  cfg.alpha = 10.0;
  cfg.n_curves = 3;
  cfg.seed = 3;
  const Dataset noisy = generate(cfg);
  cfg.alpha = 0.0;
  const Dataset clean = generate(cfg);
  double gap = 0.0;
  for (std::size_t j = 0; j < 100; ++j) gap += geodesic_dist(noisy.paths[0].frames[j], clean.paths[0].frames[j]);
  CHECK(gap / 100 > 0.05);

  cfg.scenario = Scenario::S1_2;
  const Dataset curves = generate(cfg);
  REQUIRE(curves.curves.size() == 3);
  const auto& c = curves.curves[0];
  CHECK(c.times.back() == doctest::Approx(5.0));
  double len = 0.0;
  for (std::size_t j = 1; j < c.size(); ++j) len += (c.points[j] - c.points[j - 1]).norm();
  CHECK(len == doctest::Approx(5.0).epsilon(2e-3));
}

TEST_CASE("S1 sample means approach the mean parameter") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::S1_1;
  cfg.n_curves = 500;
  cfg.n_points = 5;
  cfg.seed = 99;
  const Dataset d = generate(cfg);
  const double n = 500.0;
  // κ is checked where κ̄ ≥ 1; near its minimum the zero-crossing rejection
  // conditions the draws.
  for (std::size_t j = 0; j < d.truth_grid.size(); j += 7) {
    double mk = 0, mt = 0, vk = 0, vt = 0;
    for (std::size_t i = 0; i < d.curve_kappa.size(); ++i) {
      mk += d.curve_kappa[i][j] / n;
      mt += d.curve_tau[i][j] / n;
    }
    for (std::size_t i = 0; i < d.curve_kappa.size(); ++i) {
      vk += (d.curve_kappa[i][j] - mk) * (d.curve_kappa[i][j] - mk) / (n - 1);
      vt += (d.curve_tau[i][j] - mt) * (d.curve_tau[i][j] - mt) / (n - 1);
    }
    CHECK(std::abs(mt - d.truth_tau[j]) <= 3.0 * std::sqrt(vt / n));
    if (5.0 * d.truth_grid[j] <= std::numbers::pi) CHECK(std::abs(mk - d.truth_kappa[j]) <= 3.0 * std::sqrt(vk / n));
  }
}

TEST_CASE("S2 warping family") {
  for (double a : {-1.0, -0.3, 0.0, 0.5, 1.0})
    for (double s : linspace(0.0, 1.0, 101)) CHECK(std::abs(s2_gamma(a, s2_omega(a, s)) - s) < 1e-10);

  ScenarioConfig cfg;
  cfg.scenario = Scenario::S2_1;
  cfg.n_curves = 5;
  cfg.seed = 4;
  const Dataset d = generate(cfg);
  // a = 0 for the middle curve.
  double worst = 0.0;
  for (std::size_t j = 0; j < d.truth_grid.size(); ++j)
    worst = std::max({worst, std::abs(d.curve_kappa[2][j] - d.truth_kappa[j]), std::abs(d.curve_tau[2][j] - d.truth_tau[j])});
  CHECK(worst < 1e-3);
  CHECK(d.truth_kappa[0] == doctest::Approx(10.0));

  // θ_i = ω_i'·θ̄∘ω_i for the first curve (a = −1).
  for (std::size_t j = 0; j < d.truth_grid.size(); j += 20) {
    const double s = d.truth_grid[j];
    const double w = s2_omega(-1.0, s);
    const double expected = s2_omega_prime(-1.0, s) * 10.0 * (std::sin(3.0 * w) + 1.0);
    CHECK(d.curve_kappa[0][j] == doctest::Approx(expected).epsilon(1e-4));
  }

  // Time warps stay increasing for |b| ≤ 0.1.
  for (double b : {-0.1, -0.05, 0.05, 0.1}) {
    const auto t = linspace(0.0, 1.0, 2001);
    for (std::size_t j = 1; j < t.size(); ++j)
      CHECK(b * std::sin(2 * std::numbers::pi * t[j]) + t[j] > b * std::sin(2 * std::numbers::pi * t[j - 1]) + t[j - 1]);
  }

  cfg.scenario = Scenario::S2_3;
  const Dataset w = generate(cfg);
  REQUIRE(w.curves.size() == 5);
  for (const auto& c : w.curves) {
    CHECK(c.times.front() == 0.0);
    CHECK(c.times.back() == doctest::Approx(1.0));
    double len = 0.0;
    for (std::size_t j = 1; j < c.size(); ++j) len += (c.points[j] - c.points[j - 1]).norm();
    CHECK(len == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("S3 random helix family") {
  // Planar reduction: a = b, c = 0 gives the unit circle.
  const Vec3 d1(-std::sin(0.3), std::cos(0.3), 0.0), d2(-std::cos(0.3), -std::sin(0.3), 0.0), d3(std::sin(0.3), -std::cos(0.3), 0.0);
  CHECK(extrinsic_kappa(d1, d2) == doctest::Approx(1.0));
  CHECK(extrinsic_tau(d1, d2, d3) == 0.0);

  ScenarioConfig cfg;
  cfg.scenario = Scenario::S3_1;
  cfg.sigma_p2 = 0.0;
  cfg.n_curves = 3;
  cfg.seed = 5;
  const Dataset same = generate(cfg);
  CHECK(same.curve_kappa[0] == same.curve_kappa[2]);
  CHECK(rel_l2(same.truth_grid, same.truth_kappa, same.ref_kappa) < 1e-12);

  // Closed-form check of θ_ref at t = 0: κ = a²/(a² ... ) from the jets.
  const double a = 1.0, b = 0.9, c = 0.8;
  const Vec3 j1(0.0, b, c), j2(-a * a, 0.0, 0.0), j3(0.0, -b * b * b, 0.0);
  double length = 0.0;
  const auto tf = linspace(0.0, 5.0, 200001);
  for (std::size_t j = 1; j < tf.size(); ++j) {
    const double tm = 0.5 * (tf[j] + tf[j - 1]);
    length += Vec3(-a * std::sin(a * tm), b * std::cos(b * tm), c).norm() * (tf[j] - tf[j - 1]);
  }
  CHECK(same.ref_kappa[0] == doctest::Approx(length * extrinsic_kappa(j1, j2)).epsilon(1e-6));
  CHECK(same.ref_tau[0] == doctest::Approx(length * extrinsic_tau(j1, j2, j3)).epsilon(1e-6));

  cfg.sigma_p2 = -1.0;
  cfg.n_curves = 25;
  const Dataset d = generate(cfg);
  std::vector<double> both_bar = d.truth_kappa, both_ref = d.ref_kappa, grid2 = d.truth_grid;
  both_bar.insert(both_bar.end(), d.truth_tau.begin(), d.truth_tau.end());
  both_ref.insert(both_ref.end(), d.ref_tau.begin(), d.ref_tau.end());
  for (double s : d.truth_grid) grid2.push_back(2.0 + s);
  const double gap = rel_l2(grid2, both_bar, both_ref);
  MESSAGE("relative gap between realized mean and reference parameter: " << gap);
  CHECK(gap <= 0.1);
  CHECK(d.curves[0].times.back() == doctest::Approx(5.0));
}

TEST_CASE("S4 spherical model") {
  const std::vector<double> zero(20, 0.0);
  for (double t : linspace(0.0, 1.0, 11)) {
    Vec3 mu, m1, m2;
    s4_mu(t, mu, m1, m2);
    CHECK((s4_point(t, zero) - mu).norm() < 1e-15);
    CHECK(std::abs(mu.norm() - 1.0) < 1e-14);
    CHECK(std::abs(mu.dot(m1)) < 1e-12);
  }

  // Geodesic distance from μ(t) equals the tangent vector length.
  Rng rng(8);
  for (double t : linspace(0.0, 1.0, 7)) {
    std::vector<double> xi(20);
    for (int k = 0; k < 20; ++k) xi[k] = 0.1 * std::pow(0.07, (k + 1) / 4.0) * rng.normal();
    const auto p1 = legendre_basis(t / 2.0, 20), p2 = legendre_basis((t + 1.0) / 2.0, 20);
    double u1 = 0.0, u2 = 0.0;
    for (int k = 0; k < 20; ++k) {
      u1 += xi[k] * p1[k];
      u2 += xi[k] * p2[k];
    }
    Vec3 mu, m1, m2;
    s4_mu(t, mu, m1, m2);
    const Vec3 x = s4_point(t, xi);
    CHECK(std::acos(std::clamp(x.dot(mu), -1.0, 1.0)) == doctest::Approx(std::hypot(u1, u2) / std::sqrt(2.0)).epsilon(1e-8));
  }

  ScenarioConfig cfg;
  cfg.scenario = Scenario::S4;
  cfg.seed = 12;
  const Dataset d = generate(cfg);
  REQUIRE(d.curves.size() == 25);
  for (const auto& c : d.curves)
    for (const Vec3& x : c.points) CHECK(std::abs(x.norm() - 1.0) <= 1e-10);
  REQUIRE(d.truth_kg.size() == kTruthGridSize);

  // Geodesic curvature of μ by finite differences at the midpoint.
  const double t0 = 0.5, e = 1e-4;
  Vec3 mu, m1, m2, a, b, c1, c2, tmp1, tmp2;
  s4_mu(t0, mu, m1, m2);
  s4_mu(t0 - e, a, tmp1, tmp2);
  s4_mu(t0 + e, b, tmp1, tmp2);
  const Vec3 fd1 = (b - a) / (2 * e), fd2 = (b - 2 * mu + a) / (e * e);
  const double kg_mid = mu.dot(fd1.cross(fd2)) / std::pow(fd1.norm(), 3);
  double s_mid = 0.0, total = 0.0;
  const auto tf = linspace(0.0, 1.0, 100001);
  for (std::size_t j = 1; j < tf.size(); ++j) {
    s4_mu(0.5 * (tf[j] + tf[j - 1]), c1, c2, tmp1);
    const double ds = c2.norm() * (tf[j] - tf[j - 1]);
    total += ds;
    if (tf[j] <= t0 + 1e-12) s_mid += ds;
  }
  CHECK(interp_linear(d.truth_grid, d.truth_kg, s_mid / total) == doctest::Approx(kg_mid).epsilon(1e-3));
}
