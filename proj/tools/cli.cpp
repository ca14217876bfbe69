#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fsmean/alignment.hpp"
#include "fsmean/baselines.hpp"
#include "fsmean/errors.hpp"
#include "fsmean/estimator.hpp"
#include "fsmean/interp.hpp"
#include "fsmean/io.hpp"
#include "fsmean/metrics.hpp"
#include "fsmean/parallel.hpp"
#include "fsmean/preprocess.hpp"
#include "fsmean/simgen.hpp"
#include "fsmean/spherical.hpp"

namespace fsmean::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const char* kTorsionFamily = "torsion";

// Failure inside the numerical pipeline, with counts gathered so far.
struct Diagnostics {
  std::size_t dropped = 0;
  std::size_t fallbacks = 0;
  std::size_t curves = 0;
};

// ---------------------------------------------------------------- input

struct Input {
  fs::path dir;
  json manifest;
  std::vector<CurveRecord> curves;
  std::vector<PathRecord> paths;
  bool spherical = false;
  double length_scale = 1.0;
};

json load_manifest(const fs::path& dir) {
  const fs::path m = dir / "manifest.json";
  if (!fs::exists(m)) return nullptr;
  json doc = read_json(m);
  if (!doc.contains("format_version") || !doc["format_version"].is_string())
    throw Error(ErrorKind::Format, m.string() + ": missing format_version");
  check_format_version(doc["format_version"].get<std::string>());
  return doc;
}

Input load_input(const fs::path& where, bool force_spherical) {
  if (!fs::exists(where)) throw Error(ErrorKind::InvalidArgument, "input not found: " + where.string());
  fs::path file = where;
  if (fs::is_directory(where)) {
    if (fs::exists(where / "frames.json"))
      file = where / "frames.json";
    else if (fs::exists(where / "curves.csv"))
      file = where / "curves.csv";
    else
      throw Error(ErrorKind::InvalidArgument, "no frames.json or curves.csv in " + where.string());
  }
  Input in;
  in.dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
  in.manifest = load_manifest(in.dir);
  const std::string ext = file.extension().string();
  if (ext == ".json")
    in.paths = read_frames_json(file);
  else if (ext == ".csv")
    in.curves = read_curves_csv(file);
  else
    throw Error(ErrorKind::InvalidArgument, "input must be a .csv curve file or a .json frame file: " + file.string());
  if (in.curves.empty() && in.paths.empty()) throw Error(ErrorKind::Format, file.string() + ": no curves");
  if (in.manifest.is_object()) {
    in.spherical = in.manifest.value("scenario", std::string()) == "S4";
    in.length_scale = in.manifest.value("length_scale", 1.0);
  }
  in.spherical = in.spherical || force_spherical;
  if (in.spherical && in.curves.empty()) throw Error(ErrorKind::InvalidArgument, "spherical input must be a curve file");
  return in;
}

// Frame grids are rescaled to [0, 1].
std::vector<FrenetPath> normalized_paths(const std::vector<PathRecord>& recs) {
  std::vector<FrenetPath> out;
  for (const auto& r : recs) {
    FrenetPath p = r.path;
    if (p.size() < 2) throw Error(ErrorKind::Format, "curve " + std::to_string(r.id) + " has fewer than 2 frames");
    const double s0 = p.grid.front(), span = p.grid.back() - p.grid.front();
    for (double& s : p.grid) s = (s - s0) / span;
    p.grid.back() = 1.0;
    out.push_back(std::move(p));
  }
  return out;
}

KernelShape parse_kernel(const std::string& k) {
  if (k == "epanechnikov") return KernelShape::Epanechnikov;
  if (k == "squared-linear") return KernelShape::SquaredLinear;
  throw Error(ErrorKind::InvalidArgument, "unknown kernel '" + k + "' (epanechnikov, squared-linear)");
}

FrameMethod parse_frames(const std::string& f) {
  if (f == "lp") return FrameMethod::LocalPolynomial;
  if (f == "gs") return FrameMethod::GramSchmidt;
  throw Error(ErrorKind::InvalidArgument, "unknown frame method '" + f + "' (lp, gs)");
}

struct PreprocessArgs {
  double bandwidth = 0.1;
  double time_bandwidth = 0.0;
  std::string frames = "lp";
  std::string kernel = "epanechnikov";

  void add(CLI::App* app) {
    app->add_option("--bandwidth", bandwidth, "Local polynomial bandwidth on the unit arclength scale")
        ->capture_default_str();
    app->add_option("--time-bandwidth", time_bandwidth, "Bandwidth for the speed estimate (0: 5% of the time span)")
        ->capture_default_str();
    app->add_option("--frames", frames, "Frame estimator: lp or gs")->capture_default_str();
    app->add_option("--kernel", kernel, "epanechnikov or squared-linear")->capture_default_str();
  }

  PreprocessOptions options(std::size_t n_grid) const {
    PreprocessOptions o;
    o.bandwidth = bandwidth;
    o.time_bandwidth = time_bandwidth;
    o.n_grid = n_grid;
    o.frames = parse_frames(frames);
    o.kernel = parse_kernel(kernel);
    return o;
  }
};

struct HyperArgs {
  Hyperparams hp;
  int n_knots = 40;

  void add(CLI::App* app) {
    app->add_option("--kernel-h", hp.h, "Kernel bandwidth of the criterion")->capture_default_str();
    app->add_option("--lambda-kappa", hp.lambda_kappa, "Curvature smoothing penalty")->capture_default_str();
    app->add_option("--lambda-tau", hp.lambda_tau, "Torsion smoothing penalty")->capture_default_str();
    app->add_option("--n-knots", n_knots, "Spline knots")->capture_default_str();
  }
};

std::vector<PreprocessedCurve> preprocess_all(const std::vector<CurveRecord>& curves, const PreprocessOptions& opt,
                                              Diagnostics& diag) {
  std::vector<PreprocessedCurve> out(curves.size());
  parallel_for(curves.size(), [&](std::size_t i) { out[i] = preprocess_curve(curves[i].curve, opt); });
  for (const auto& p : out) diag.fallbacks += p.fallback_count;
  diag.curves = out.size();
  return out;
}

std::vector<SphericalFramePath> preprocess_all_spherical(const std::vector<CurveRecord>& curves,
                                                         const PreprocessOptions& opt) {
  std::vector<SphericalFramePath> out(curves.size());
  parallel_for(curves.size(), [&](std::size_t i) { out[i] = preprocess_spherical(curves[i].curve, opt); });
  return out;
}

ArclengthCurve sphere_curve(const SphericalFramePath& p) {
  ArclengthCurve c;
  c.grid = p.grid;
  c.length = p.length;
  for (const Rot3& q : p.frames) c.points.push_back(q.col(0));
  return c;
}

std::size_t common_size(const std::vector<CurveRecord>& curves) {
  std::size_t n = 0;
  for (const auto& c : curves) n = std::max(n, c.curve.size());
  return n;
}

void write_theta(const fs::path& file, std::span<const double> grid, std::span<const double> kappa,
                 std::span<const double> tau) {
  write_table_csv(file, {{"s", "kappa", "tau"},
                         {{grid.begin(), grid.end()}, {kappa.begin(), kappa.end()}, {tau.begin(), tau.end()}}});
}

void write_kg(const fs::path& file, std::span<const double> grid, std::span<const double> kg) {
  write_table_csv(file, {{"s", "kg"}, {{grid.begin(), grid.end()}, {kg.begin(), kg.end()}}});
}

void write_curve(const fs::path& file, const ArclengthCurve& c) {
  const CurveRecord rec{0, {c.grid, c.points}};
  write_curves_csv(file, std::span<const CurveRecord>(&rec, 1));
}

// Extrinsic (κ, τ) of a curve on `grid`; missing torsion becomes NaN.
void extrinsic_on_grid(const ArclengthCurve& c, double bandwidth, std::span<const double> grid,
                       std::vector<double>& kappa, std::vector<double>& tau) {
  const ExtrinsicTheta e = extrinsic_theta(local_poly_derivatives(c, bandwidth));
  std::vector<double> t;
  for (const auto& v : e.tau) t.push_back(v ? *v : kNaN);
  kappa.clear();
  tau.clear();
  for (double s : grid) {
    kappa.push_back(interp_linear(e.grid, e.kappa, s));
    tau.push_back(interp_linear(e.grid, t, s));
  }
}

json hp_json(const Hyperparams& hp) {
  return {{"h", hp.h}, {"lambda_kappa", hp.lambda_kappa}, {"lambda_tau", hp.lambda_tau}};
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string scenario;
  ScenarioConfig cfg;
  std::uint64_t seed = 0;
  int reps = 1;
  std::string out;
};

std::string config_text(const ScenarioConfig& c, const std::string& tag) {
  std::ostringstream s;
  s << "scenario=" << tag << "\nn_curves=" << c.n_curves << "\nn_points=" << c.n_points
    << "\nalpha=" << format_double(c.alpha) << "\nsigma_e=" << format_double(c.sigma_e)
    << "\nsigma_p2=" << format_double(c.sigma_p2) << "\nalpha0=" << format_double(c.alpha0)
    << "\nsigma_kappa=" << format_double(c.sigma_kappa) << "\nsigma_tau=" << format_double(c.sigma_tau) << '\n';
  return s.str();
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const bool family = a.scenario == kTorsionFamily;
  ScenarioConfig cfg = a.cfg;
  if (!family) {
    try {
      cfg.scenario = parse_scenario(a.scenario);
    } catch (const Error&) {
      std::string tags;
      for (const auto& t : scenario_tags()) tags += t + ", ";
      throw Error(ErrorKind::InvalidArgument,
                  "unknown scenario '" + a.scenario + "'; valid tags: " + tags + kTorsionFamily);
    }
    cfg.validate();
  }
  require(a.reps >= 1, "--reps must be >= 1");
  const std::string hash = fnv1a_hex(config_text(cfg, a.scenario));
  for (int r = 0; r < a.reps; ++r) {
    char name[32];
    std::snprintf(name, sizeof name, "rep_%03d", r);
    const fs::path dir = a.reps == 1 ? fs::path(a.out) : fs::path(a.out) / name;
    cfg.seed = a.seed + static_cast<std::uint64_t>(r);
    const Dataset d = family ? torsion_family(static_cast<std::size_t>(cfg.n_curves), static_cast<std::size_t>(cfg.n_points))
                             : generate(cfg);
    std::string data;
    if (d.has_frames()) {
      std::vector<PathRecord> recs;
      for (std::size_t i = 0; i < d.paths.size(); ++i) recs.push_back({static_cast<int>(i), d.paths[i]});
      data = "frames.json";
      write_frames_json(dir / data, recs);
    } else {
      std::vector<CurveRecord> recs;
      for (std::size_t i = 0; i < d.curves.size(); ++i) recs.push_back({static_cast<int>(i), d.curves[i]});
      data = "curves.csv";
      write_curves_csv(dir / data, recs);
    }
    if (d.spherical())
      write_kg(dir / "truth.csv", d.truth_grid, d.truth_kg);
    else
      write_theta(dir / "truth.csv", d.truth_grid, d.truth_kappa, d.truth_tau);
    json m = {{"format_version", format_version()},
              {"kind", "dataset"},
              {"scenario", family ? std::string(kTorsionFamily) : std::string(scenario_tag(cfg.scenario))},
              {"seed", cfg.seed},
              {"rep", r},
              {"config_hash", hash},
              {"length_scale", d.length_scale},
              {"n_curves", cfg.n_curves},
              {"n_points", cfg.n_points},
              {"alpha", cfg.alpha},
              {"sigma_e", cfg.sigma_e},
              {"sigma_p2", cfg.sigma_p2},
              {"alpha0", finite_or_null(cfg.alpha0)},
              {"sigma_kappa", cfg.sigma_kappa},
              {"sigma_tau", cfg.sigma_tau},
              {"rejected_draws", d.rejected_draws},
              {"data", data},
              {"truth", "truth.csv"}};
    write_json(dir / "manifest.json", m);
  }
  out << "wrote " << a.reps << " dataset(s) to " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string input, out;
  HyperArgs hyper;
  PreprocessArgs pre;
  std::string cv_grid;
  bool cv_default = false;
  int cv_folds = 10;
  std::uint64_t cv_seed = 0;
  bool phase = false;
  int k = 0;
  std::size_t grid_size = 200;
  bool spherical = false;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out, Diagnostics& diag) {
  a.pre.options(0);
  const Input in = load_input(a.input, a.spherical);
  const fs::path dir(a.out);
  const auto grid = linspace(0.0, 1.0, a.grid_size);
  Hyperparams hp = a.hyper.hp;
  EstimateOptions eopt;
  eopt.n_knots = a.hyper.n_knots;
  eopt.obs.kernel = parse_kernel(a.pre.kernel);
  const bool cv = !a.cv_grid.empty() || a.cv_default;
  const std::size_t n_out = in.curves.empty() ? in.paths.front().path.size() : common_size(in.curves);
  const auto out_grid = linspace(0.0, 1.0, n_out);
  json meta = {{"format_version", format_version()}, {"kind", "estimate"}, {"input", a.input}};

  if (in.spherical) {
    if (cv) throw Error(ErrorKind::InvalidArgument, "cross-validation is not available for spherical data");
    if (a.phase) throw Error(ErrorKind::InvalidArgument, "--phase is not available for spherical data");
    const auto paths = preprocess_all_spherical(in.curves, a.pre.options(0));
    diag.curves = paths.size();
    double unit = 0.0;
    const GeodesicCurvature kg = estimate_mean_kg(paths, hp, eopt, &unit);
    std::vector<double> kgs;
    for (double s : grid) kgs.push_back(kg(s));
    write_kg(dir / "theta.csv", grid, kgs);
    std::vector<Rot3> q0;
    for (const auto& p : paths) q0.push_back(p.frames.front());
    const Rot3 start = karcher_mean(q0);
    const SphericalFramePath mp = solve_spherical_path(kg, start, out_grid);
    write_frames_json(dir / "mean_path.json", std::vector<PathRecord>{{0, mp.as_frenet()}});
    write_curve(dir / "mean_curve.csv", reconstruct_spherical_curve(kg, start, out_grid));
    meta["spherical"] = true;
    meta["hyperparams"] = hp_json(hp);
    meta["unit_entry"] = unit;
    meta["length"] = kg.length;
    write_json(dir / "estimate.json", meta);
    out << "k_g estimate written to " << dir.string() << '\n';
    return kOk;
  }

  std::vector<FrenetPath> paths;
  std::vector<Rot3> frames0;
  std::vector<Vec3> points0;
  double mean_length = 0.0;
  if (!in.curves.empty()) {
    const auto pcs = preprocess_all(in.curves, a.pre.options(0), diag);
    for (const auto& pc : pcs) {
      paths.push_back(pc.frames);
      points0.push_back(pc.curve.points.front());
      mean_length += pc.curve.length / static_cast<double>(pcs.size());
    }
  } else {
    for (const auto& r : in.paths) mean_length += (r.path.grid.back() - r.path.grid.front()) / in.paths.size();
    paths = normalized_paths(in.paths);
    points0.assign(paths.size(), Vec3::Zero());
    diag.curves = paths.size();
  }
  for (const auto& p : paths) frames0.push_back(p.frames.front());

  if (cv) {
    std::vector<Hyperparams> candidates;
    if (!a.cv_grid.empty()) {
      const Table t = read_table_csv(a.cv_grid);
      for (std::size_t r = 0; r < t.rows(); ++r)
        candidates.push_back({t.column("h")[r], t.column("lambda_kappa")[r], t.column("lambda_tau")[r]});
    } else {
      candidates = default_hyperparam_grid();
    }
    if (candidates.empty()) throw Error(ErrorKind::InvalidArgument, "empty cross-validation grid");
    Rng rng(a.cv_seed);
    CvOptions copt;
    copt.folds = a.cv_folds;
    copt.estimate = eopt;
    const CvResult res = cross_validate(paths, candidates, rng, copt);
    hp = res.best;
    Table t{{"h", "lambda_kappa", "lambda_tau", "score"}, {{}, {}, {}, {}}};
    for (const auto& e : res.table) {
      t.columns[0].push_back(e.hp.h);
      t.columns[1].push_back(e.hp.lambda_kappa);
      t.columns[2].push_back(e.hp.lambda_tau);
      t.columns[3].push_back(e.score);
    }
    write_table_csv(dir / "cv.csv", t);
  }

  ThetaFunction theta;
  if (a.phase) {
    PhaseOptions popt;
    popt.estimate = eopt;
    popt.alignment.k = a.k;
    const PhaseEstimate pe = estimate_mean_theta_phase(paths, hp, popt);
    theta = pe.theta;
    meta["phase"] = {{"k", a.k}, {"iterations", pe.alignment.iterations}, {"converged", pe.alignment.converged}};
  } else {
    theta = estimate_mean_theta(paths, hp, eopt);
  }
  const double crit = criterion_exact(theta, paths, hp.h, &diag.dropped, eopt.obs.kernel);
  const MeanShapeResult ms = mean_shape(theta, frames0, points0, out_grid);

  std::vector<double> k, t;
  sample_theta(theta, grid, k, t);
  write_theta(dir / "theta.csv", grid, k, t);
  write_frames_json(dir / "mean_path.json", std::vector<PathRecord>{{0, ms.mean_path}});
  write_curve(dir / "mean_curve.csv", ms.mean_curve);
  meta["spherical"] = false;
  meta["hyperparams"] = hp_json(hp);
  meta["criterion_value"] = crit;
  meta["dropped_pairs"] = diag.dropped;
  meta["frame_fallbacks"] = diag.fallbacks;
  meta["mean_length"] = mean_length;
  meta["cross_validated"] = cv;
  write_json(dir / "estimate.json", meta);
  out << "theta estimate written to " << dir.string() << " (h=" << hp.h << ", lambda_kappa=" << hp.lambda_kappa
      << ", lambda_tau=" << hp.lambda_tau << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- baseline

struct BaselineArgs {
  std::string input, out;
  HyperArgs hyper;
  PreprocessArgs pre;
  double srvf_bandwidth = 0.05;
  bool no_srvf = false;
  std::size_t grid_size = 200;
  bool spherical = false;
};

int cmd_baseline(const BaselineArgs& a, std::ostream& out, Diagnostics& diag) {
  a.pre.options(0);
  const Input in = load_input(a.input, a.spherical);
  const fs::path dir(a.out);
  const auto grid = linspace(0.0, 1.0, a.grid_size);
  EstimateOptions eopt;
  eopt.n_knots = a.hyper.n_knots;
  eopt.obs.kernel = parse_kernel(a.pre.kernel);
  const Hyperparams hp = a.hyper.hp;
  json meta = {{"format_version", format_version()}, {"kind", "baseline"}, {"input", a.input},
               {"hyperparams", hp_json(hp)}};
  std::vector<std::string> written;

  auto srvf = [&](const std::vector<ArclengthCurve>& curves) -> std::optional<SrvfMean> {
    if (a.no_srvf || curves.size() < 2) return std::nullopt;
    SrvfMean m = srvf_karcher_mean(curves, a.srvf_bandwidth);
    meta["srvf"] = {{"iterations", m.iterations}, {"converged", m.converged}};
    return m;
  };

  if (in.spherical) {
    const auto paths = preprocess_all_spherical(in.curves, a.pre.options(common_size(in.curves)));
    diag.curves = paths.size();
    std::vector<ArclengthCurve> arcs;
    for (const auto& p : paths) arcs.push_back(sphere_curve(p));
    write_curve(dir / "arithmetic_mean.csv", arithmetic_mean(arcs, false));
    written.push_back("arithmetic_mean.csv");
    if (auto m = srvf(arcs)) {
      write_curve(dir / "srvf_mean.csv", m->curve);
      written.push_back("srvf_mean.csv");
    }
    std::vector<std::vector<double>> each(paths.size());
    parallel_for(paths.size(), [&](std::size_t i) {
      const GeodesicCurvature kg = estimate_mean_kg(std::span<const SphericalFramePath>(&paths[i], 1), hp, eopt);
      for (double s : grid) each[i].push_back(kg(s));
    });
    std::vector<double> ind(grid.size(), 0.0);
    for (const auto& e : each)
      for (std::size_t j = 0; j < grid.size(); ++j) ind[j] += e[j] / static_cast<double>(each.size());
    write_kg(dir / "theta_ind.csv", grid, ind);
    write_kg(dir / "theta_ind_ext.csv", grid, extrinsic_kg_median(arcs, grid, a.pre.bandwidth));
    written.insert(written.end(), {"theta_ind.csv", "theta_ind_ext.csv"});
  } else if (!in.curves.empty()) {
    const auto pcs = preprocess_all(in.curves, a.pre.options(common_size(in.curves)), diag);
    std::vector<ArclengthCurve> curves;
    std::vector<FrenetPath> paths;
    std::vector<DerivativeJet> jets;
    for (const auto& pc : pcs) {
      curves.push_back(pc.curve);
      paths.push_back(pc.frames);
      jets.push_back(pc.jet);
    }
    std::vector<double> k, t;
    const ArclengthCurve am = arithmetic_mean(curves);
    write_curve(dir / "arithmetic_mean.csv", am);
    extrinsic_on_grid(am, a.pre.bandwidth, grid, k, t);
    write_theta(dir / "theta_arithmetic.csv", grid, k, t);
    written.insert(written.end(), {"arithmetic_mean.csv", "theta_arithmetic.csv"});
    if (auto m = srvf(curves)) {
      write_curve(dir / "srvf_mean.csv", m->curve);
      extrinsic_on_grid(m->curve, a.pre.bandwidth, grid, k, t);
      write_theta(dir / "theta_srvf.csv", grid, k, t);
      written.insert(written.end(), {"srvf_mean.csv", "theta_srvf.csv"});
    }
    const ThetaSamples ind = individual_fs_mean(paths, hp, grid, eopt);
    write_theta(dir / "theta_ind.csv", grid, ind.kappa, ind.tau);
    const ThetaSamples ext = extrinsic_median(jets, grid);
    write_theta(dir / "theta_ind_ext.csv", grid, ext.kappa, ext.tau);
    written.insert(written.end(), {"theta_ind.csv", "theta_ind_ext.csv"});
  } else {
    const auto paths = normalized_paths(in.paths);
    diag.curves = paths.size();
    const ThetaSamples ind = individual_fs_mean(paths, hp, grid, eopt);
    write_theta(dir / "theta_ind.csv", grid, ind.kappa, ind.tau);
    written.push_back("theta_ind.csv");
  }
  meta["files"] = written;
  write_json(dir / "baseline.json", meta);
  out << "baselines written to " << dir.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string runs, out;
  std::string estimate_dir = "estimate";
  std::string baseline_dir = "baseline";
  bool distances = false;
  PreprocessArgs pre;
};

std::vector<fs::path> find_reps(const fs::path& root) {
  if (fs::exists(root / "manifest.json")) return {root};
  std::vector<fs::path> reps;
  if (fs::is_directory(root))
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) reps.push_back(e.path());
  std::sort(reps.begin(), reps.end());
  return reps;
}

// Squared L² error of `column` in `file` against the truth, on the truth grid.
std::optional<double> column_error(const Table& truth, const fs::path& file, const std::string& column, double scale) {
  if (!fs::exists(file)) return std::nullopt;
  const Table est = read_table_csv(file);
  const auto& ts = truth.column("s");
  const auto& es = est.column("s");
  if (es.size() < 2 || std::abs(es.front() - ts.front()) > 1e-9 || std::abs(es.back() - ts.back()) > 1e-9)
    throw Error(ErrorKind::GridMismatch, file.string() + ": grid does not span the truth grid [" +
                                             format_double(ts.front()) + ", " + format_double(ts.back()) + "]");
  return l2_sq_distance(ts, truth.column(column), es, est.column(column)) / (scale * scale);
}

std::optional<ArclengthCurve> read_mean_curve(const fs::path& file) {
  if (!fs::exists(file)) return std::nullopt;
  const auto recs = read_curves_csv(file);
  if (recs.empty()) throw Error(ErrorKind::Format, file.string() + ": empty");
  return ArclengthCurve{recs[0].curve.times, recs[0].curve.points, 1.0};
}

// Mean Fisher–Rao (SRVF) and L² distances from `mean` to each input curve.
void distances(const ArclengthCurve& mean, const std::vector<ArclengthCurve>& inputs, double& fr, double& l2) {
  if (mean.size() != inputs.front().size())
    throw Error(ErrorKind::GridMismatch, "mean curve and inputs have different sample counts");
  const SrvfFunction qm = srvf_transform(mean);
  std::vector<double> f(inputs.size()), g(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) {
    f[i] = srvf_distance(qm, srvf_transform(inputs[i])).distance;
    const std::vector<ArclengthCurve> pair{inputs[i], mean};
    // Centre both, rotate the mean onto the input, compare pointwise.
    auto centred = [](const ArclengthCurve& c) {
      Vec3 m = Vec3::Zero();
      for (const Vec3& p : c.points) m += p / static_cast<double>(c.size());
      std::vector<Vec3> out;
      for (const Vec3& p : c.points) out.push_back(p - m);
      return out;
    };
    const auto a = centred(mean), b = centred(inputs[i]);
    const Rot3 r = procrustes_rotation(a, b);
    std::vector<double> d;
    for (std::size_t j = 0; j < a.size(); ++j) d.push_back((r * a[j] - b[j]).squaredNorm());
    g[i] = std::sqrt(trapezoid(mean.grid, d));
  });
  fr = l2 = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    fr += f[i] / static_cast<double>(inputs.size());
    l2 += g[i] / static_cast<double>(inputs.size());
  }
}

std::string mean_std(const ErrorReport& r, const std::string& key) {
  const auto it = r.values.find(key);
  if (it == r.values.end()) return "-";
  std::vector<double> v;
  for (double x : it->second)
    if (std::isfinite(x)) v.push_back(x);
  if (v.empty()) return "-";
  const RepetitionStats s = repetition_stats(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g (%.3g)", s.mean, s.std);
  return buf;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto reps = find_reps(a.runs);
  if (reps.empty()) throw Error(ErrorKind::Format, "no datasets (manifest.json) under " + a.runs);
  ErrorReport report;
  std::vector<std::map<std::string, double>> rows;
  std::string label;
  bool spherical = false;
  for (const fs::path& rep : reps) {
    const json manifest = load_manifest(rep);
    label = manifest.value("scenario", std::string("?"));
    const double scale = manifest.value("length_scale", 1.0);
    const Table truth = read_table_csv(rep / manifest.value("truth", std::string("truth.csv")));
    spherical = truth.has("kg");
    const fs::path est = rep / a.estimate_dir, base = rep / a.baseline_dir;
    std::map<std::string, double> m;
    const std::vector<std::pair<std::string, std::string>> params =
        spherical ? std::vector<std::pair<std::string, std::string>>{{"kg", "kg"}}
                  : std::vector<std::pair<std::string, std::string>>{{"kappa", "kappa"}, {"tau", "tau"}};
    for (const auto& [name, col] : params) {
      if (auto e = column_error(truth, est / "theta.csv", col, scale)) m[name + "_pop"] = *e;
      if (auto e = column_error(truth, base / "theta_ind.csv", col, scale)) m[name + "_ind"] = *e;
      if (auto e = column_error(truth, base / "theta_ind_ext.csv", col, scale)) m[name + "_ext"] = *e;
    }
    const std::vector<std::pair<std::string, fs::path>> means{
        {"fs", est / "mean_curve.csv"}, {"srvf", base / "srvf_mean.csv"}, {"arith", base / "arithmetic_mean.csv"}};
    std::vector<ArclengthCurve> inputs;
    if (a.distances && !spherical && fs::exists(rep / "curves.csv")) {
      Diagnostics diag;
      const auto curves = read_curves_csv(rep / "curves.csv");
      for (const auto& pc : preprocess_all(curves, a.pre.options(common_size(curves)), diag)) inputs.push_back(pc.curve);
    }
    for (const auto& [name, file] : means) {
      const auto c = read_mean_curve(file);
      if (!c) continue;
      if (spherical) m["d_norm_" + name] = d_norm(*c);
      if (!inputs.empty()) {
        double fr = 0.0, l2 = 0.0;
        distances(*c, inputs, fr, l2);
        m["fisher_rao_" + name] = fr;
        m["l2_" + name] = l2;
      }
    }
    for (const auto& [k, v] : m) report.add(k, v);
    rows.push_back(std::move(m));
  }

  const fs::path dir = a.out.empty() ? fs::path(a.runs) / "eval" : fs::path(a.out);
  Table t;
  t.header.push_back("rep");
  t.columns.emplace_back();
  for (const auto& [k, v] : report.values) {
    t.header.push_back(k);
    t.columns.emplace_back();
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    t.columns[0].push_back(static_cast<double>(r));
    for (std::size_t c = 1; c < t.header.size(); ++c) {
      const auto it = rows[r].find(t.header[c]);
      t.columns[c].push_back(it == rows[r].end() ? kNaN : it->second);
    }
  }
  write_table_csv(dir / "metrics.csv", t);

  std::ostringstream table;
  std::vector<std::pair<std::string, std::string>> cols;
  if (spherical)
    cols = {{"kg_ext", "|kg_ext - kg|^2"}, {"kg_ind", "|kg_ind - kg|^2"}, {"kg_pop", "|kg_pop - kg|^2"},
            {"d_norm_fs", "d_norm FS"},     {"d_norm_srvf", "d_norm SRVF"},  {"d_norm_arith", "d_norm Arithm"}};
  else
    cols = {{"kappa_ext", "|kappa_ext - kappa|^2"}, {"kappa_ind", "|kappa_ind - kappa|^2"},
            {"kappa_pop", "|kappa_pop - kappa|^2"}, {"tau_ext", "|tau_ext - tau|^2"},
            {"tau_ind", "|tau_ind - tau|^2"},       {"tau_pop", "|tau_pop - tau|^2"}};
  table << "scenario";
  for (const auto& c : cols) table << " | " << c.second;
  table << "\n" << label;
  for (const auto& c : cols) table << " | " << mean_std(report, c.first);
  table << "\n";
  bool any_distance = false;
  for (const char* n : {"fs", "srvf", "arith"})
    any_distance = any_distance || report.values.count(std::string("fisher_rao_") + n);
  if (any_distance) {
    table << "\nmean distance to inputs | Fisher-Rao | L2\n";
    for (const char* n : {"fs", "srvf", "arith"})
      table << n << " | " << mean_std(report, std::string("fisher_rao_") + n) << " | "
            << mean_std(report, std::string("l2_") + n) << "\n";
  }
  table << "\nvalues are mean (standard deviation) over " << rows.size() << " repetition(s)\n";
  {
    std::ofstream f(dir / "table.txt", std::ios::binary);
    f << table.str();
  }
  out << table.str();
  return kOk;
}

// ---------------------------------------------------------------- export-plot

struct ExportArgs {
  std::string results, out;
};

int cmd_export_plot(const ExportArgs& a, std::ostream& out) {
  const fs::path root(a.results);
  if (!fs::is_directory(root)) throw Error(ErrorKind::Format, "not a results directory: " + a.results);
  const std::vector<std::pair<std::string, fs::path>> thetas{
      {"truth", root / "truth.csv"},
      {"fs_pop", root / "estimate" / "theta.csv"},
      {"ind", root / "baseline" / "theta_ind.csv"},
      {"ind_ext", root / "baseline" / "theta_ind_ext.csv"},
      {"arithmetic", root / "baseline" / "theta_arithmetic.csv"},
      {"srvf", root / "baseline" / "theta_srvf.csv"}};
  const std::vector<std::pair<std::string, fs::path>> curves{{"fs_pop", root / "estimate" / "mean_curve.csv"},
                                                             {"arithmetic", root / "baseline" / "arithmetic_mean.csv"},
                                                             {"srvf", root / "baseline" / "srvf_mean.csv"}};
  std::ostringstream th, cv;
  std::vector<std::string> theta_cols;
  std::size_t found = 0;
  for (const auto& [method, file] : thetas) {
    if (!fs::exists(file)) continue;
    const Table t = read_table_csv(file);
    const std::vector<std::string> cols = t.has("kg") ? std::vector<std::string>{"kg"}
                                                      : std::vector<std::string>{"kappa", "tau"};
    if (theta_cols.empty()) theta_cols = cols;
    if (cols != theta_cols) throw Error(ErrorKind::Format, file.string() + ": parameter columns differ from other files");
    if (method != "truth") ++found;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      th << method << ',' << format_double(t.column("s")[r]);
      for (const auto& c : cols) th << ',' << format_double(t.column(c)[r]);
      th << '\n';
    }
  }
  for (const auto& [method, file] : curves) {
    if (!fs::exists(file)) continue;
    ++found;
    for (const auto& rec : read_curves_csv(file))
      for (std::size_t j = 0; j < rec.curve.size(); ++j) {
        const Vec3& p = rec.curve.points[j];
        cv << method << ',' << format_double(rec.curve.times[j]) << ',' << format_double(p.x()) << ','
           << format_double(p.y()) << ',' << format_double(p.z()) << '\n';
      }
  }
  if (found == 0) throw Error(ErrorKind::Format, "no estimate or baseline results under " + a.results);
  const fs::path dir = a.out.empty() ? root / "plot" : fs::path(a.out);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "theta_long.csv", std::ios::binary);
    f << "# fsmean-format " << format_version() << "\nmethod,s";
    for (const auto& c : theta_cols) f << ',' << c;
    f << '\n' << th.str();
  }
  {
    std::ofstream f(dir / "curves_long.csv", std::ios::binary);
    f << "# fsmean-format " << format_version() << "\nmethod,s,x,y,z\n" << cv.str();
  }
  out << "plot data written to " << dir.string() << '\n';
  return kOk;
}

// Appends `--key=value` for each config entry not already given as a flag.
// `args` is in CLI11's reversed order.
void expand_config(std::vector<std::string>& args) {
  std::vector<std::string> given(args.rbegin(), args.rend());
  std::string file;
  for (std::size_t i = 0; i < given.size(); ++i) {
    if (given[i] == "--config" && i + 1 < given.size()) file = given[i + 1];
    if (given[i].rfind("--config=", 0) == 0) file = given[i].substr(9);
  }
  if (file.empty()) return;
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read config file " + file);
  auto trim = [](std::string t) {
    const auto a = t.find_first_not_of(" \t\r");
    const auto b = t.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : t.substr(a, b - a + 1);
  };
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidArgument, file + ":" + std::to_string(n) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") continue;
    const std::string flag = "--" + key;
    const bool present = std::any_of(given.begin(), given.end(), [&](const std::string& g) {
      return g == flag || g.rfind(flag + "=", 0) == 0;
    });
    if (!present) args.insert(args.begin(), flag + "=" + value);
  }
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kConfigError;
    case ErrorKind::Format:
    case ErrorKind::GridMismatch: return kDataError;
    default: return kEstimationError;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frenet-Serret mean shapes of 3-D and spherical curves", "fsmean"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  std::string config_file;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "Flat key=value file; command-line flags win");
  };

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic dataset");
  with_config(s);
  s->add_option("--scenario", sim.scenario, "S1.1 S1.2 S2.1 S2.2 S2.3 S3.1 S3.2 S4 or torsion")->required();
  s->add_option("--seed", sim.seed, "Random seed")->required();
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--reps", sim.reps, "Repetitions (rep_000, rep_001, ... with seeds seed, seed+1, ...)")
      ->capture_default_str();
  s->add_option("--n-curves", sim.cfg.n_curves)->capture_default_str();
  s->add_option("--n-points", sim.cfg.n_points)->capture_default_str();
  s->add_option("--sigma-e", sim.cfg.sigma_e, "Point noise standard deviation")->capture_default_str();
  s->add_option("--alpha", sim.cfg.alpha, "Frame noise concentration (0: none)")->capture_default_str();
  s->add_option("--alpha0", sim.cfg.alpha0, "Initial frame concentration")->capture_default_str();
  s->add_option("--sigma-p2", sim.cfg.sigma_p2, "S3 parameter variance (negative: scenario default)")
      ->capture_default_str();
  s->add_option("--sigma-kappa", sim.cfg.sigma_kappa)->capture_default_str();
  s->add_option("--sigma-tau", sim.cfg.sigma_tau)->capture_default_str();

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Estimate the mean curvature and torsion (or geodesic curvature)");
  with_config(e);
  e->add_option("--input", est.input, "Dataset directory, curves .csv or frames .json")->required();
  e->add_option("--out", est.out, "Output directory")->required();
  est.hyper.add(e);
  est.pre.add(e);
  e->add_option("--cv-grid", est.cv_grid, "CSV of candidates with columns h,lambda_kappa,lambda_tau");
  e->add_flag("--cv-default", est.cv_default, "Cross-validate over the built-in log-spaced grid");
  e->add_option("--cv-folds", est.cv_folds)->capture_default_str();
  e->add_option("--cv-seed", est.cv_seed)->capture_default_str();
  e->add_flag("--phase", est.phase, "Align phase variation before the joint fit");
  e->add_option("--k", est.k, "Principal components in the alignment (negative: 90% of variance)")
      ->capture_default_str();
  e->add_option("--grid-size", est.grid_size, "Points of the output parameter grid")->capture_default_str();
  e->add_flag("--spherical", est.spherical, "Treat the curves as lying on a sphere");

  BaselineArgs base;
  auto* b = app.add_subcommand("baseline", "SRVF, arithmetic and individual-estimate means");
  with_config(b);
  b->add_option("--input", base.input, "Dataset directory, curves .csv or frames .json")->required();
  b->add_option("--out", base.out, "Output directory")->required();
  base.hyper.add(b);
  base.pre.add(b);
  b->add_option("--srvf-bandwidth", base.srvf_bandwidth)->capture_default_str();
  b->add_flag("--no-srvf", base.no_srvf, "Skip the SRVF Karcher mean");
  b->add_option("--grid-size", base.grid_size)->capture_default_str();
  b->add_flag("--spherical", base.spherical);

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Errors against ground truth over repetitions");
  with_config(v);
  v->add_option("--runs", ev.runs, "Dataset directory or a directory of rep_* datasets")->required();
  v->add_option("--out", ev.out, "Output directory (default: <runs>/eval)");
  v->add_option("--estimate-dir", ev.estimate_dir)->capture_default_str();
  v->add_option("--baseline-dir", ev.baseline_dir)->capture_default_str();
  v->add_flag("--distances", ev.distances, "Also compute Fisher-Rao and L2 distances from each mean to the inputs");
  ev.pre.add(v);

  ExportArgs ex;
  auto* x = app.add_subcommand("export-plot", "Tidy CSV of parameters and mean curves for plotting");
  with_config(x);
  x->add_option("--results", ex.results, "Dataset directory holding estimate/ and baseline/")->required();
  x->add_option("--out", ex.out, "Output directory (default: <results>/plot)");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    expand_config(args);
    app.parse(args);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::ParseError& pe) {
    app.exit(pe, out, err);
    return kConfigError;
  } catch (const Error& ex_) {
    err << "error: " << ex_.what() << '\n';
    return kConfigError;
  }

  set_num_threads(threads);
  Diagnostics diag;
  try {
    if (*s) return cmd_simulate(sim, out);
    if (*e) return cmd_estimate(est, out, diag);
    if (*b) return cmd_baseline(base, out, diag);
    if (*v) return cmd_eval(ev, out);
    if (*x) return cmd_export_plot(ex, out);
  } catch (const Error& ex_) {
    const int code = exit_code(ex_.kind());
    err << "error: " << ex_.what() << '\n';
    if (code == kEstimationError)
      err << "diagnostics: curves=" << diag.curves << " dropped_pairs=" << diag.dropped
          << " frame_fallbacks=" << diag.fallbacks << '\n';
    return code;
  } catch (const fs::filesystem_error& fe) {
    err << "error: " << fe.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace fsmean::cli
