// One line per acceptance criterion; exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "fsmean/alignment.hpp"
#include "fsmean/baselines.hpp"
#include "fsmean/estimator.hpp"
#include "fsmean/frenet.hpp"
#include "fsmean/interp.hpp"
#include "fsmean/io.hpp"
#include "fsmean/metrics.hpp"
#include "fsmean/preprocess.hpp"
#include "fsmean/rng.hpp"
#include "fsmean/simgen.hpp"
#include "fsmean/spherical.hpp"
#include "fsmean/spline.hpp"
#include "oracles.hpp"

using namespace fsmean;
namespace fs = std::filesystem;

namespace {

constexpr int kReps = 10;
const Hyperparams kHp{0.05, 1e-8, 1e-8};

// Tolerances.
constexpr double kC1Error = 0.01;
constexpr double kC1Seconds = 5.0;
constexpr double kC2Ratio = 1.0 / 3.0;
constexpr double kC2Seconds = 60.0;
constexpr double kC3Factor = 10.0;
constexpr double kC4FsDnorm = 1e-5;
constexpr double kC4ArithDnorm = 0.05;
constexpr double kC4KgError = 0.15;
constexpr double kC5Lo = 4.5, kC5Hi = 5.5, kC5Spike = 10.0;
constexpr double kC6ExpLog = 1e-12, kC6Drift = 1e-9, kC6Flow = 1e-8, kC6Slope = 2.5, kC6Warp = 1e-4;
constexpr double kC6Scaling = 1e-12, kC6Spline = 1e-4, kC6Helix = 1e-6;
constexpr double kC7Threads = 1e-10;

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double sq_error(const Dataset& d, std::span<const double> est, std::span<const double> truth) {
  std::vector<double> e;
  for (std::size_t j = 0; j < est.size(); ++j) e.push_back(std::pow(est[j] - truth[j], 2));
  return trapezoid(d.truth_grid, e) / (d.length_scale * d.length_scale);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x / static_cast<double>(v.size());
  return s;
}

Dataset scenario(Scenario sc, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.scenario = sc;
  cfg.seed = seed;
  return generate(cfg);
}

void criterion1() {
  std::vector<double> ek, et;
  double worst_time = 0.0;
  for (int r = 0; r < kReps; ++r) {
    const Dataset d = scenario(Scenario::S1_1, 1000 + r);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> k, t;
    sample_theta(estimate_mean_theta(d.paths, kHp), d.truth_grid, k, t);
    worst_time = std::max(worst_time, seconds_since(t0));
    ek.push_back(sq_error(d, k, d.truth_kappa));
    et.push_back(sq_error(d, t, d.truth_tau));
  }
  report(1, mean(ek) <= kC1Error && mean(et) <= kC1Error && worst_time <= kC1Seconds,
         fmt("S1.1 kappa err %.4g, tau err %.4g (<= %g); slowest rep %.2f s (<= %g)", mean(ek), mean(et), kC1Error,
             worst_time, kC1Seconds));
}

void criterion2() {
  std::vector<double> pop, ind;
  double worst_time = 0.0;
  for (int r = 0; r < kReps; ++r) {
    const Dataset d = scenario(Scenario::S2_1, 2000 + r);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> k, t;
    sample_theta(estimate_mean_theta_phase(d.paths, kHp).theta, d.truth_grid, k, t);
    worst_time = std::max(worst_time, seconds_since(t0));
    pop.push_back(sq_error(d, k, d.truth_kappa));
    ind.push_back(sq_error(d, individual_fs_mean(d.paths, kHp, d.truth_grid).kappa, d.truth_kappa));
  }
  report(2, mean(pop) <= kC2Ratio * mean(ind) && worst_time <= kC2Seconds,
         fmt("S2.1 aligned pop kappa err %.4g vs individual %.4g (ratio %.3f <= %.3f); slowest rep %.2f s (<= %g)",
             mean(pop), mean(ind), mean(pop) / mean(ind), kC2Ratio, worst_time, kC2Seconds));
}

void criterion3() {
  std::vector<double> pop, ext;
  for (int r = 0; r < kReps; ++r) {
    const Dataset d = scenario(Scenario::S1_2, 3000 + r);
    std::vector<FrenetPath> paths;
    std::vector<DerivativeJet> jets;
    for (const auto& c : d.curves) {
      const PreprocessedCurve p = preprocess_curve(c);
      paths.push_back(p.frames);
      jets.push_back(p.jet);
    }
    std::vector<double> k, t;
    sample_theta(estimate_mean_theta(paths, kHp), d.truth_grid, k, t);
    pop.push_back(sq_error(d, k, d.truth_kappa));
    ext.push_back(sq_error(d, extrinsic_median(jets, d.truth_grid).kappa, d.truth_kappa));
  }
  const double factor = mean(ext) / mean(pop);
  report(3, factor >= kC3Factor,
         fmt("S1.2 extrinsic median kappa err %.4g vs pop %.4g (factor %.2f >= %g)", mean(ext), mean(pop), factor,
             kC3Factor));
}

void criterion4() {
  std::vector<double> fs_dn, ar_dn, kg_err;
  for (int r = 0; r < kReps; ++r) {
    const Dataset d = scenario(Scenario::S4, 4000 + r);
    std::vector<SphericalFramePath> paths;
    std::vector<ArclengthCurve> arcs;
    for (const auto& c : d.curves) {
      paths.push_back(preprocess_spherical(c));
      ArclengthCurve a;
      a.grid = paths.back().grid;
      for (const Rot3& q : paths.back().frames) a.points.push_back(q.col(0));
      arcs.push_back(std::move(a));
    }
    const GeodesicCurvature kg = estimate_mean_kg(paths, kHp);
    std::vector<Rot3> q0;
    for (const auto& p : paths) q0.push_back(p.frames.front());
    const auto grid = linspace(0.0, 1.0, d.curves.front().size());
    fs_dn.push_back(d_norm(reconstruct_spherical_curve(kg, karcher_mean(q0), grid)));
    ar_dn.push_back(d_norm(arithmetic_mean(arcs, false)));
    std::vector<double> est;
    for (double s : d.truth_grid) est.push_back(kg(s));
    kg_err.push_back(sq_error(d, est, d.truth_kg) * d.length_scale * d.length_scale);
  }
  const double fs_max = *std::max_element(fs_dn.begin(), fs_dn.end());
  const double ar_min = *std::min_element(ar_dn.begin(), ar_dn.end());
  report(4, fs_max <= kC4FsDnorm && ar_min >= kC4ArithDnorm && mean(kg_err) <= kC4KgError,
         fmt("S4 d_norm FS max %.3g (<= %g), arithmetic min %.3g (>= %g); kg pop err %.4g (<= %g)", fs_max,
             kC4FsDnorm, ar_min, kC4ArithDnorm, mean(kg_err), kC4KgError));
}

void criterion5() {
  const Dataset d = torsion_family();
  std::vector<FrenetPath> paths;
  std::vector<ArclengthCurve> curves;
  for (const auto& c : d.curves) {
    paths.push_back(preprocess_curve(c).frames);
    curves.push_back({c.times, c.points, 1.0});
  }
  const ThetaFunction th = estimate_mean_theta(paths, kHp);
  double lo = 1e300, hi = -1e300;
  for (double s : linspace(0.05, 0.95, 181)) {
    lo = std::min(lo, th.kappa_at(s));
    hi = std::max(hi, th.kappa_at(s));
  }
  const ExtrinsicTheta e = extrinsic_theta(local_poly_derivatives(arithmetic_mean(curves), 0.05));
  const double spike = *std::max_element(e.kappa.begin(), e.kappa.end());
  report(5, lo >= kC5Lo && hi <= kC5Hi && spike > kC5Spike,
         fmt("FS mean kappa in [%.3f, %.3f] (within [%g, %g]); arithmetic mean max extrinsic kappa %.3f (> %g)", lo,
             hi, kC5Lo, kC5Hi, spike, kC5Spike));
}

ThetaFunction theta_from(const std::function<double(double)>& k, const std::function<double(double)>& t) {
  const auto x = linspace(0.0, 1.0, 400);
  std::vector<double> ky, ty;
  for (double s : x) {
    ky.push_back(k(s));
    ty.push_back(t(s));
  }
  return {spline_from_samples(x, ky, 40), spline_from_samples(x, ty, 40)};
}

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

void criterion6() {
  std::vector<std::string> bad;
  std::ostringstream detail;
  Rng rng(6);

  double explog = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    v *= (std::numbers::pi - 1e-3) * rng.uniform() / v.norm();
    explog = std::max(explog, (vee(log_so3(exp_so3(hat(v)))) - v).norm());
  }
  if (explog > kC6ExpLog) bad.push_back("exp/log");
  detail << fmt("exp/log %.1e", explog);

  const auto wiggly =
      theta_from([](double s) { return 3.0 + std::sin(7 * s); }, [](double s) { return std::cos(5 * s); });
  Rot3 q;
  for (int k = 0; k < 10000; ++k) q = lie_euler_midpoint_step(q, wiggly, k * 1e-4, 1e-4);
  const double drift = std::max(q.orthogonality_error(), std::abs(q.matrix().determinant() - 1.0));
  if (drift > kC6Drift) bad.push_back("drift");
  detail << fmt(", drift %.1e", drift);

  double group = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double s = rng.uniform(), u = rng.uniform(), t = rng.uniform();
    const Rot3 qk = sample_uniform_rotation(rng);
    group = std::max(group, max_abs(flow(wiggly, t - s, s, qk).matrix() -
                                    flow(wiggly, t - u, u, flow(wiggly, u - s, s, qk)).matrix()));
  }
  if (group > kC6Flow) bad.push_back("flow group law");
  detail << fmt(", flow %.1e", group);

  const auto th = theta_from([](double s) { return 3.0 + std::sin(4.0 * s); }, [](double s) { return 1.0 - 2.0 * s * s; });
  const auto other = theta_from([](double s) { return 2.5 + std::cos(3.0 * s); }, [](double s) { return 0.5 + s; });
  const std::vector<FrenetPath> paths{solve_frenet_path(th, Rot3::identity(), linspace(0.0, 1.0, 401))};
  const std::vector<double> hs{0.2, 0.1, 0.05, 0.025};
  double mx = 0, my = 0;
  std::vector<double> lx, ly;
  for (double h : hs) {
    lx.push_back(std::log(h));
    ly.push_back(std::log(std::abs(criterion_exact(other, paths, h) - criterion_approx(other, paths, h))));
    mx += lx.back() / 4;
    my += ly.back() / 4;
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = num / den;
  if (slope < kC6Slope) bad.push_back("criterion order");
  detail << fmt(", slope %.2f", slope);

  const auto wgrid = linspace(0.0, 1.0, 200);
  ThetaSamples ts;
  for (double s : wgrid) {
    ts.kappa.push_back(2.0 + std::sin(5.0 * s));
    ts.tau.push_back(std::cos(3.0 * s) - 0.5);
  }
  Warping g1 = Warping::identity(wgrid), g2 = Warping::identity(wgrid);
  for (std::size_t j = 0; j < wgrid.size(); ++j) {
    const double s = wgrid[j];
    g1.values[j] = s + 0.3 * s * (1.0 - s);
    g2.values[j] = std::expm1(-0.7 * s) / std::expm1(-0.7);
  }
  const ThetaSamples twice = warp_action(warp_action(ts, g1), g2), once = warp_action(ts, g1.compose(g2));
  double warp = 0.0;
  for (std::size_t j = 0; j < wgrid.size(); ++j)
    warp = std::max({warp, std::abs(twice.kappa[j] - once.kappa[j]), std::abs(twice.tau[j] - once.tau[j])});
  if (warp > kC6Warp) bad.push_back("warp group law");
  detail << fmt(", warp %.1e", warp);

  const oracle::Helix helix;
  const double length = 5.0;
  const ThetaFunction native{CubicSpline::constant(helix.kappa(), 1, 0.0, length),
                             CubicSpline::constant(helix.tau(), 1, 0.0, length)};
  const auto scaled = rescale_theta(native, length);
  const oracle::Helix small{helix.a / length, helix.b / length};
  double scaling = 0.0;
  for (double s : linspace(0.0, 1.0, 11))
    scaling = std::max({scaling, std::abs(scaled.kappa_at(s) - small.kappa()), std::abs(scaled.tau_at(s) - small.tau())});
  if (scaling > kC6Scaling) bad.push_back("scaling law");
  detail << fmt(", scaling %.1e", scaling);

  const BSplineBasis basis(12);
  Eigen::VectorXd c(basis.size());
  for (int i = 0; i < c.size(); ++i) c(i) = rng.normal();
  const CubicSpline truth(basis, c);
  const auto x = linspace(0.0, 1.0, 150);
  std::vector<double> y, wiggle, w(x.size(), 1.0);
  for (double s : x) {
    y.push_back(truth(s));
    wiggle.push_back(1.0 + s + 0.3 * std::sin(9.0 * s));
  }
  const auto interp = fit_penalized_spline(basis, x, y, w, 1e-14);
  double spline0 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) spline0 = std::max(spline0, std::abs(interp.spline(x[k]) - y[k]));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += wiggle[k];
    sxx += x[k] * x[k];
    sxy += x[k] * wiggle[k];
  }
  const double n = static_cast<double>(x.size());
  const double b1 = (n * sxy - sx * sy) / (n * sxx - sx * sx), b0 = (sy - b1 * sx) / n;
  const auto line = fit_penalized_spline(basis, x, wiggle, w, 1e12);
  double spline_inf = 0.0;
  for (double s : linspace(0.0, 1.0, 51)) spline_inf = std::max(spline_inf, std::abs(line.spline(s) - (b0 + b1 * s)));
  if (spline0 > kC6Spline || spline_inf > kC6Spline) bad.push_back("spline limits");
  detail << fmt(", spline %.1e/%.1e", spline0, spline_inf);

  // Time-parametrized helix (cos t, sin t, t/2) with exact derivatives.
  DerivativeJet jet;
  for (double t : linspace(0.0, 3.0, 7)) {
    jet.grid.push_back(t);
    jet.d1.push_back(Vec3(-std::sin(t), std::cos(t), 0.5));
    jet.d2.push_back(Vec3(-std::cos(t), -std::sin(t), 0.0));
    jet.d3.push_back(Vec3(std::sin(t), -std::cos(t), 0.0));
  }
  const ExtrinsicTheta eh = extrinsic_theta(jet);
  double helix_err = 0.0;
  for (std::size_t k = 0; k < eh.kappa.size(); ++k)
    helix_err = std::max({helix_err, std::abs(eh.kappa[k] - 0.8), eh.tau[k] ? std::abs(*eh.tau[k] - 0.4) : 1.0});
  if (helix_err > kC6Helix) bad.push_back("extrinsic helix");
  detail << fmt(", helix %.1e", helix_err);

  std::string failed;
  for (const auto& b : bad) failed += " " + b;
  report(6, bad.empty(), detail.str() + (bad.empty() ? "" : ";  failed:" + failed));
}

int call(std::vector<std::string> args) {
  args.insert(args.begin(), "fsmean");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != cli::kOk) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// simulate -> estimate -> baseline -> eval under one thread count.
fs::path pipeline(const fs::path& root, int threads) {
  const std::string t = std::to_string(threads), dir = root.string();
  fs::remove_all(root);
  bool ok = call({"simulate", "--scenario", "S1.2", "--n-curves", "25", "--n-points", "100", "--seed", "77", "--reps",
                  "2", "--out", dir}) == 0;
  for (const char* rep : {"rep_000", "rep_001"}) {
    const std::string r = (root / rep).string();
    ok = ok && call({"--threads", t, "estimate", "--input", r, "--out", r + "/estimate"}) == 0;
    ok = ok && call({"--threads", t, "baseline", "--input", r, "--out", r + "/baseline", "--no-srvf"}) == 0;
  }
  ok = ok && call({"--threads", t, "eval", "--runs", dir}) == 0;
  return ok ? root / "eval" / "metrics.csv" : fs::path();
}

void criterion7() {
  const fs::path base = fs::temp_directory_path() / "fsmean_acceptance";
  const fs::path a = pipeline(base / "a", 1), b = pipeline(base / "b", 1), c = pipeline(base / "c", 8);
  if (a.empty() || b.empty() || c.empty()) {
    report(7, false, "pipeline failed");
    return;
  }
  const bool identical = slurp(a) == slurp(b);
  const Table ta = read_table_csv(a), tc = read_table_csv(c);
  double gap = ta.header == tc.header ? 0.0 : 1e300;
  for (std::size_t k = 0; gap < 1e300 && k < ta.columns.size(); ++k)
    for (std::size_t r = 0; r < ta.rows(); ++r) gap = std::max(gap, std::abs(ta.columns[k][r] - tc.columns[k][r]));
  report(7, identical && gap <= kC7Threads,
         fmt("threads=1 runs byte-identical: %s; threads=8 max metric gap %.1e (<= %g)", identical ? "yes" : "no", gap,
             kC7Threads));
  fs::remove_all(base);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  return failures;
}
