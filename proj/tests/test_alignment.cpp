#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "fsmean/alignment.hpp"
#include "fsmean/errors.hpp"
#include "fsmean/interp.hpp"
#include "fsmean/parallel.hpp"
#include "fsmean/rng.hpp"
#include "fsmean/simgen.hpp"

using namespace fsmean;

namespace {

const double kPi = std::numbers::pi;

Warping warp_from(const std::vector<double>& grid, const std::function<double(double)>& f) {
  Warping w = Warping::identity(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) w.values[j] = f(grid[j]);
  return w;
}

ThetaSamples sampled(const std::vector<double>& grid, const std::function<double(double)>& k,
                     const std::function<double(double)>& t) {
  ThetaSamples th;
  for (double s : grid) {
    th.kappa.push_back(k(s));
    th.tau.push_back(t(s));
  }
  return th;
}

double kbar(double s) { return 10.0 * (std::sin(3.0 * s) + 1.0); }
double tbar(double s) { return -10.0 * std::sin(2.0 * kPi * s); }

// θ_a = ω_a'·θ̄(ω_a), written out in closed form.
ThetaSamples s2_member(const std::vector<double>& grid, double a) {
  return sampled(
      grid, [a](double s) { return s2_omega_prime(a, s) * kbar(s2_omega(a, s)); },
      [a](double s) { return s2_omega_prime(a, s) * tbar(s2_omega(a, s)); });
}

double sq_dist(const std::vector<double>& grid, const ThetaSamples& a, const ThetaSamples& b) {
  std::vector<double> e(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    e[j] = (a.kappa[j] - b.kappa[j]) * (a.kappa[j] - b.kappa[j]) + (a.tau[j] - b.tau[j]) * (a.tau[j] - b.tau[j]);
  return trapezoid(grid, e);
}

double sq_norm(const std::vector<double>& grid, const ThetaSamples& a) {
  ThetaSamples zero{std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)};
  return sq_dist(grid, a, zero);
}

ThetaSamples mean_of(const std::vector<ThetaSamples>& fs) {
  ThetaSamples m{std::vector<double>(fs[0].kappa.size(), 0.0), std::vector<double>(fs[0].kappa.size(), 0.0)};
  for (const auto& f : fs)
    for (std::size_t j = 0; j < m.kappa.size(); ++j) {
      m.kappa[j] += f.kappa[j] / static_cast<double>(fs.size());
      m.tau[j] += f.tau[j] / static_cast<double>(fs.size());
    }
  return m;
}

double dispersion(const std::vector<double>& grid, const std::vector<ThetaSamples>& fs) {
  const ThetaSamples m = mean_of(fs);
  double d = 0.0;
  for (const auto& f : fs) d += sq_dist(grid, f, m);
  return d;
}

template <class F>
ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Format;
}

}  // namespace

TEST_CASE("warping basics") {
  const auto grid = linspace(0.0, 1.0, 200);
  const Warping id = Warping::identity(grid);
  CHECK_NOTHROW(id.validate());
  CHECK(id(0.37) == doctest::Approx(0.37).epsilon(1e-12));
  for (double d : id.derivative()) CHECK(d == doctest::Approx(1.0).epsilon(1e-12));

  Warping bad = id;
  std::swap(bad.values[10], bad.values[11]);
  CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::InvalidArgument);
  Warping loose = id;
  loose.values.back() = 0.99;
  CHECK(error_kind([&] { loose.validate(); }) == ErrorKind::InvalidArgument);

  const Warping g = warp_from(grid, [](double s) { return s2_gamma(1.0, s); });
  double worst = 0.0, dworst = 0.0;
  const Warping round = g.compose(g.inverse());
  for (std::size_t j = 0; j < grid.size(); ++j) worst = std::max(worst, std::abs(round.values[j] - grid[j]));
  const auto d = g.derivative();
  for (std::size_t j = 0; j < grid.size(); ++j)
    dworst = std::max(dworst, std::abs(d[j] - std::exp(grid[j]) / (std::exp(1.0) - 1.0)));
  CHECK(worst < 1e-6);
  CHECK(dworst < 1e-6);
  CHECK(g.inverse()(0.4) == doctest::Approx(s2_omega(1.0, 0.4)).epsilon(1e-6));
  CHECK(g.sup_distance(g) == 0.0);
}

TEST_CASE("warp action") {
  const auto grid = linspace(0.0, 1.0, 200);
  const ThetaSamples th = sampled(
      grid, [](double s) { return 2.0 + std::sin(5.0 * s); }, [](double s) { return std::cos(3.0 * s) - 0.5; });

  SUBCASE("identity leaves theta unchanged") {
    const ThetaSamples out = warp_action(th, Warping::identity(grid));
    for (std::size_t j = 0; j < grid.size(); ++j) {
      CHECK(out.kappa[j] == doctest::Approx(th.kappa[j]).epsilon(1e-12));
      CHECK(out.tau[j] == doctest::Approx(th.tau[j]).epsilon(1e-12));
    }
  }

  SUBCASE("matches the closed form") {
    const double a = 0.8;
    const Warping g = warp_from(grid, [a](double s) { return s2_gamma(a, s); });
    const ThetaSamples out = warp_action(th, g);
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double gs = s2_gamma(a, grid[j]), dg = a * std::exp(a * grid[j]) / std::expm1(a);
      worst = std::max(worst, std::abs(out.kappa[j] - (2.0 + std::sin(5.0 * gs)) * dg));
    }
    CHECK(worst < 1e-5);
  }

  SUBCASE("right group law") {
    const Warping g1 = warp_from(grid, [](double s) { return s + 0.3 * s * (1.0 - s); });
    const Warping g2 = warp_from(grid, [](double s) { return s2_gamma(-0.7, s); });
    const ThetaSamples twice = warp_action(warp_action(th, g1), g2);
    const ThetaSamples once = warp_action(th, g1.compose(g2));
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j)
      worst = std::max({worst, std::abs(twice.kappa[j] - once.kappa[j]), std::abs(twice.tau[j] - once.tau[j])});
    CHECK(worst < 1e-4);
  }

  SUBCASE("total turning is preserved") {
    const Warping g = warp_from(grid, [](double s) { return s2_gamma(1.0, s); });
    const ThetaSamples out = warp_action(th, g);
    CHECK(std::abs(trapezoid(grid, out.kappa) - trapezoid(grid, th.kappa)) < 1e-4);
  }
}

TEST_CASE("fpca") {
  const auto grid = linspace(0.0, 1.0, 101);
  std::vector<double> nu(grid.size()), phi(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    nu[j] = std::sin(2.0 * grid[j]);
    phi[j] = std::cos(kPi * grid[j]) + grid[j];
  }

  SUBCASE("identical functions") {
    const std::vector<std::vector<double>> fs(4, nu);
    const FpcaModel m = fpca(fs, grid, 0);
    for (double e : m.eigenvalues) CHECK(std::abs(e) < 1e-24);
    const auto r = m.reconstruct(nu);
    for (std::size_t j = 0; j < nu.size(); ++j) CHECK(r[j] == nu[j]);
    CHECK(choose_components(m.eigenvalues) == 0);
  }

  SUBCASE("rank one recovers the component") {
    std::vector<std::vector<double>> fs;
    for (double c : {-1.0, 1.0, 0.5, -0.5}) {
      std::vector<double> f(grid.size());
      for (std::size_t j = 0; j < grid.size(); ++j) f[j] = nu[j] + c * phi[j];
      fs.push_back(f);
    }
    const FpcaModel m = fpca(fs, grid, 1);
    const auto w = [&] {
      std::vector<double> pp(grid.size()), pq(grid.size()), qq(grid.size());
      for (std::size_t j = 0; j < grid.size(); ++j) {
        pp[j] = phi[j] * phi[j];
        pq[j] = phi[j] * m.components[0][j];
        qq[j] = m.components[0][j] * m.components[0][j];
      }
      return std::array<double, 3>{trapezoid(grid, pp), trapezoid(grid, pq), trapezoid(grid, qq)};
    }();
    CHECK(w[2] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(w[1]) / std::sqrt(w[0] * w[2]) > 1.0 - 1e-12);
    CHECK(choose_components(m.eigenvalues) == 1);
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto r = m.reconstruct(fs[i]);
      for (std::size_t j = 0; j < grid.size(); ++j) CHECK(r[j] == doctest::Approx(fs[i][j]).epsilon(1e-9));
    }
  }

  SUBCASE("random ensemble") {
    Rng rng(17);
    std::vector<std::vector<double>> fs;
    for (int i = 0; i < 12; ++i) {
      std::vector<double> c(6);
      for (int k = 0; k < 6; ++k) c[static_cast<std::size_t>(k)] = rng.normal() / (1.0 + k);
      std::vector<double> f(grid.size());
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const auto b = legendre_basis(grid[j], 6);
        for (int k = 0; k < 6; ++k) f[j] += c[static_cast<std::size_t>(k)] * b[static_cast<std::size_t>(k)];
      }
      fs.push_back(f);
    }
    const FpcaModel full = fpca(fs, grid, 4);
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        std::vector<double> prod(grid.size());
        for (std::size_t j = 0; j < grid.size(); ++j) prod[j] = full.components[a][j] * full.components[b][j];
        CHECK(std::abs(trapezoid(grid, prod) - (a == b ? 1.0 : 0.0)) < 1e-8);
      }
    for (std::size_t r = 1; r < full.eigenvalues.size(); ++r) CHECK(full.eigenvalues[r] <= full.eigenvalues[r - 1]);

    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 4; ++k) {
      const FpcaModel m = fpca(fs, grid, k);
      double err = 0.0;
      for (const auto& f : fs) {
        const auto r = m.reconstruct(f);
        std::vector<double> e(grid.size());
        for (std::size_t j = 0; j < grid.size(); ++j) e[j] = (r[j] - f[j]) * (r[j] - f[j]);
        err += trapezoid(grid, e);
      }
      CHECK(err < prev);
      prev = err;
    }
    CHECK(error_kind([&] { fpca(fs, grid, 12); }) == ErrorKind::InvalidArgument);
  }

  SUBCASE("stacked channels") {
    std::vector<std::vector<double>> fs;
    for (double c : {-1.0, 1.0, 2.0}) {
      std::vector<double> f = nu;
      for (double p : phi) f.push_back(c * p);
      fs.push_back(f);
    }
    const FpcaModel m = fpca(fs, grid, 1);
    CHECK(m.components[0].size() == 2 * grid.size());
    CHECK(error_kind([&] { fpca(std::vector<std::vector<double>>{{1.0, 2.0, 3.0}, {1.0, 2.0, 4.0}}, grid, 1); }) == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("choose_components") {
  CHECK(choose_components(std::vector<double>{5.0, 3.0, 1.0, 1.0}) == 3);
  CHECK(choose_components(std::vector<double>{5.0, 3.0, 1.0, 1.0}, 0.8) == 2);
  CHECK(choose_components(std::vector<double>(10, 1.0)) == 5);
  CHECK(choose_components(std::vector<double>{0.0, 0.0}) == 0);
}

TEST_CASE("optimal_warp") {
  const auto grid = linspace(0.0, 1.0, 200);
  const ThetaSamples target = sampled(grid, kbar, tbar);

  SUBCASE("self alignment is the identity") {
    const Warping g = optimal_warp(target, target, grid);
    CHECK_NOTHROW(g.validate());
    CHECK(g.sup_distance(Warping::identity(grid)) <= 1.0 / 199.0);
    CHECK(warp_objective(target, target, Warping::identity(grid)) < 1e-20);
  }

  SUBCASE("recovers the inverse of a known warp") {
    const Warping g0 = warp_from(grid, [](double s) { return s2_gamma(1.0, s); });
    const ThetaSamples source = warp_action(target, g0);
    const Warping g = optimal_warp(target, source, grid);
    CHECK_NOTHROW(g.validate());
    const ThetaSamples back = warp_action(source, g);
    CHECK(std::sqrt(sq_dist(grid, back, target) / sq_norm(grid, target)) <= 0.05);
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) worst = std::max(worst, std::abs(g.values[j] - s2_omega(1.0, grid[j])));
    CHECK(worst < 2e-3);
  }

  SUBCASE("never worse than the identity") {
    Rng rng(3);
    for (int rep = 0; rep < 3; ++rep) {
      const double p = rng.uniform(), q = rng.uniform();
      const ThetaSamples source = sampled(
          grid, [&](double s) { return 5.0 + 4.0 * std::sin(6.0 * s + 3.0 * p); },
          [&](double s) { return std::cos(4.0 * s + 2.0 * q); });
      const Warping g = optimal_warp(target, source, grid);
      CHECK(warp_objective(target, source, g) <= warp_objective(target, source, Warping::identity(grid)));
    }
  }

  SUBCASE("grid checks") {
    CHECK(error_kind([&] { optimal_warp(target, target, linspace(0.0, 2.0, 200)); }) == ErrorKind::InvalidArgument);
    const ThetaSamples short_source = sampled(linspace(0.0, 1.0, 50), kbar, tbar);
    CHECK(error_kind([&] { optimal_warp(target, short_source, grid); }) == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("karcher_mean_warp") {
  const auto grid = linspace(0.0, 1.0, 200);
  const Warping g = warp_from(grid, [](double s) { return s2_gamma(0.6, s); });
  const std::vector<Warping> same(3, g);
  CHECK(karcher_mean_warp(same).sup_distance(g) < 1e-6);

  const std::vector<Warping> pair{g, warp_from(grid, [](double s) { return s2_gamma(-0.6, s); })};
  const Warping m = karcher_mean_warp(pair);
  CHECK_NOTHROW(m.validate());
  for (std::size_t j = 0; j < grid.size(); ++j) CHECK(std::abs(m.values[j] + m.values[grid.size() - 1 - j] - 1.0) < 1e-8);

  // Right-composition equivariance.
  const Warping c = warp_from(grid, [](double s) { return s + 0.2 * s * (1.0 - s); });
  const std::vector<Warping> moved{pair[0].compose(c), pair[1].compose(c)};
  CHECK(karcher_mean_warp(moved).sup_distance(m.compose(c)) < 1e-4);
}

TEST_CASE("align_raw_estimates") {
  const auto grid = linspace(0.0, 1.0, 200);

  SUBCASE("identical inputs are a fixed point") {
    const ThetaSamples th = sampled(grid, kbar, tbar);
    const std::vector<ThetaSamples> raw(4, th);
    const AlignmentResult r = align_raw_estimates(raw, grid);
    CHECK(r.converged);
    for (const Warping& g : r.warps) CHECK(g.sup_distance(Warping::identity(grid)) < 1e-9);
    for (std::size_t j = 0; j < grid.size(); ++j) CHECK(r.template_mean.kappa[j] == doctest::Approx(th.kappa[j]).epsilon(1e-9));
  }

  std::vector<ThetaSamples> raw;
  std::vector<double> as;
  for (int i = 0; i < 9; ++i) {
    as.push_back(-1.0 + 0.25 * i);
    raw.push_back(s2_member(grid, as.back()));
  }

  SUBCASE("phase family collapses") {
    const AlignmentResult r = align_raw_estimates(raw, grid);
    CHECK(r.converged);
    for (const Warping& g : r.warps) CHECK_NOTHROW(g.validate());
    const double before = dispersion(grid, raw), after = dispersion(grid, r.aligned);
    MESSAGE("dispersion " << before << " -> " << after);
    CHECK(after <= 0.2 * before);
    // Up to the common warp, every Γ_i undoes its ω_i.
    const Warping common = r.warps[4];
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const Warping truth = warp_from(grid, [&](double s) { return s2_gamma(as[i], s); });
      CHECK(r.warps[i].sup_distance(truth.compose(common)) < 5e-3);
    }
  }

  SUBCASE("order of the inputs does not matter") {
    std::vector<ThetaSamples> reversed(raw.rbegin(), raw.rend());
    const AlignmentResult a = align_raw_estimates(raw, grid), b = align_raw_estimates(reversed, grid);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(a.warps[i].sup_distance(b.warps[raw.size() - 1 - i]) < 1e-6);
  }

  SUBCASE("option checks") {
    AlignmentOptions o;
    o.weights = {0.5, 0.5};
    CHECK(error_kind([&] { align_raw_estimates(raw, grid, o); }) == ErrorKind::InvalidArgument);
    o.weights.assign(raw.size(), 0.2);
    CHECK(error_kind([&] { align_raw_estimates(raw, grid, o); }) == ErrorKind::InvalidArgument);
    CHECK(error_kind([&] { align_raw_estimates(std::vector<ThetaSamples>{raw[0]}, grid); }) == ErrorKind::InvalidArgument);
    AlignmentOptions pca;
    pca.k = -1;
    CHECK_NOTHROW(align_raw_estimates(raw, grid, pca));
  }
}

TEST_CASE("estimate_mean_theta_phase") {
  const Hyperparams hp{0.05, 1e-8, 1e-8};

  SUBCASE("a family without phase reduces to the plain estimate") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::S1_1;
    cfg.n_curves = 4;
    cfg.sigma_kappa = 0.0;
    cfg.sigma_tau = 0.0;
    cfg.seed = 8;
    const Dataset d = generate(cfg);
    const PhaseEstimate pe = estimate_mean_theta_phase(d.paths, hp);
    const ThetaFunction plain = estimate_mean_theta(d.paths, hp);
    for (double s : linspace(0.0, 1.0, 51)) {
      CHECK(std::abs(pe.theta.kappa_at(s) - plain.kappa_at(s)) < 1e-6);
      CHECK(std::abs(pe.theta.tau_at(s) - plain.tau_at(s)) < 1e-6);
    }
  }

  SUBCASE("S2.1 noiseless") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::S2_1;
    cfg.seed = 41;
    const Dataset d = generate(cfg);
    const PhaseEstimate pe = estimate_mean_theta_phase(d.paths, hp);
    CHECK(pe.warps.size() == d.paths.size());

    std::vector<double> k, t, avg(d.truth_grid.size(), 0.0);
    for (const FrenetPath& p : d.paths) {
      const ThetaFunction one = estimate_mean_theta(std::span<const FrenetPath>(&p, 1), hp);
      sample_theta(one, d.truth_grid, k, t);
      for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += k[j] / static_cast<double>(d.paths.size());
    }
    std::vector<double> e_ind(avg.size()), e_pop(avg.size());
    sample_theta(pe.theta, d.truth_grid, k, t);
    for (std::size_t j = 0; j < avg.size(); ++j) {
      e_ind[j] = (avg[j] - d.truth_kappa[j]) * (avg[j] - d.truth_kappa[j]);
      e_pop[j] = (k[j] - d.truth_kappa[j]) * (k[j] - d.truth_kappa[j]);
    }
    const double ind = trapezoid(d.truth_grid, e_ind), pop = trapezoid(d.truth_grid, e_pop);
    MESSAGE("S2.1 kappa error aligned " << pop << ", individual average " << ind);
    CHECK(pop <= 0.08);
    CHECK(pop <= ind / 3.0);
  }

  SUBCASE("torsion sign is kept") {
    const auto fine = linspace(0.0, 1.0, 401);
    std::vector<FrenetPath> paths;
    for (double a : {-0.8, -0.3, 0.2, 0.9}) {
      std::vector<double> k(fine.size()), t(fine.size());
      for (std::size_t j = 0; j < fine.size(); ++j) {
        const double w = s2_omega(a, fine[j]), wp = s2_omega_prime(a, fine[j]);
        k[j] = wp * (4.0 + std::sin(3.0 * w));
        t[j] = wp * (1.5 + std::sin(2.0 * kPi * w));
      }
      const ThetaFunction th{spline_from_samples(fine, k, 40), spline_from_samples(fine, t, 40)};
      paths.push_back(solve_frenet_path(th, Rot3::identity(), linspace(0.0, 1.0, 100)));
    }
    const PhaseEstimate pe = estimate_mean_theta_phase(paths, hp);
    for (double s : linspace(0.0, 1.0, 200)) CHECK(pe.theta.tau_at(s) > 0.0);
  }
}
