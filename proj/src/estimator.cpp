#include "fsmean/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsmean/errors.hpp"
#include "fsmean/parallel.hpp"

namespace fsmean {

void PseudoObservationSet::reserve(std::size_t n) {
  curve.reserve(n);
  u.reserve(n);
  v.reserve(n);
  r1.reserve(n);
  r2.reserve(n);
  r3.reserve(n);
  w.reserve(n);
}

void PseudoObservationSet::append(const PseudoObservationSet& o) {
  curve.insert(curve.end(), o.curve.begin(), o.curve.end());
  u.insert(u.end(), o.u.begin(), o.u.end());
  v.insert(v.end(), o.v.begin(), o.v.end());
  r1.insert(r1.end(), o.r1.begin(), o.r1.end());
  r2.insert(r2.end(), o.r2.begin(), o.r2.end());
  r3.insert(r3.end(), o.r3.begin(), o.r3.end());
  w.insert(w.end(), o.w.begin(), o.w.end());
  dropped += o.dropped;
}

double PseudoObservationSet::r3_deviation() const {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    num += w[k] * std::abs(r3[k]);
    den += w[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

namespace {

PseudoObservationSet path_records(const FrenetPath& path, int id, double h, const ObservationOptions& opt) {
  const std::size_t n = path.size();
  PseudoObservationSet out;
  const double norm = 2.0 / (static_cast<double>(n) * static_cast<double>(n));
  const double lo = path.grid.front(), hi = path.grid.back();
  const double cut = opt.trim * (hi - lo);
  auto trimmed = [&](double s) { return opt.trim > 0.0 && (s < lo + cut || s > hi - cut); };
  for (std::size_t j = 0; j < n; ++j) {
    const double s = path.grid[j];
    for (std::size_t q = 0; q < n; ++q) {
      if (q == j) continue;
      const double t = path.grid[q];
      const double du = t - s;
      if (std::abs(du) > h) continue;
      Skew3 l;
      try {
        l = log_so3(path.frames[q].transpose() * path.frames[j]);
      } catch (const Error&) {
        ++out.dropped;
        continue;
      }
      const Vec3 r = l.coords * (-1.0 / du);
      out.curve.push_back(id);
      out.u.push_back(du);
      out.v.push_back(0.5 * (s + t));
      out.r1.push_back(r.x());
      out.r2.push_back(r.y());
      out.r3.push_back(r.z());
      const double wt = (trimmed(s) || trimmed(t)) ? 0.0 : norm * kernel_h(du, h, opt.kernel) * du * du;
      out.w.push_back(wt);
    }
  }
  return out;
}

}  // namespace

PseudoObservationSet raw_log_increments(std::span<const FrenetPath> paths, double h, const ObservationOptions& opt) {
  require(h > 0.0 && h <= 1.0, "raw_log_increments: h must be in (0, 1]");
  std::vector<PseudoObservationSet> parts(paths.size());
  for (const FrenetPath& p : paths) require(p.size() >= 3, "raw_log_increments: each path needs >= 3 frames");
  parallel_for(paths.size(), [&](std::size_t i) { parts[i] = path_records(paths[i], static_cast<int>(i), h, opt); });
  PseudoObservationSet out;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  out.reserve(total);
  for (const auto& p : parts) out.append(p);
  return out;
}

ThetaFunction fit_theta_splines(const PseudoObservationSet& obs, const Hyperparams& hp, int n_knots) {
  require(hp.lambda_kappa >= 0.0 && hp.lambda_tau >= 0.0, "fit_theta_splines: lambdas must be nonnegative");
  const std::size_t positive =
      static_cast<std::size_t>(std::count_if(obs.w.begin(), obs.w.end(), [](double w) { return w > 0.0; }));
  if (positive < static_cast<std::size_t>(n_knots + 4))
    throw Error(ErrorKind::RankDeficient, "too few weighted pseudo-observations for the spline basis");
  const BSplineBasis basis(n_knots, 0.0, 1.0);
  ThetaFunction theta;
  theta.kappa = fit_penalized_spline(basis, obs.v, obs.r1, obs.w, hp.lambda_kappa).spline;
  theta.tau = fit_penalized_spline(basis, obs.v, obs.r2, obs.w, hp.lambda_tau).spline;
  return theta;
}

namespace {

// Shared driver for both criteria: `predict(s, t, forward_state)` returns
// the predicted relative rotation exp(Ω(t − s, s)).
template <class Predict>
double criterion_sum(std::span<const FrenetPath> paths, double h, std::size_t* dropped, KernelShape kernel,
                     Predict&& predict) {
  require(h > 0.0, "criterion: h must be positive");
  std::vector<double> per_path(paths.size(), 0.0);
  std::vector<std::size_t> drops(paths.size(), 0);
  parallel_for(paths.size(), [&](std::size_t i) {
    const FrenetPath& p = paths[i];
    const std::size_t n = p.size();
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t q = 0; q < n; ++q) {
        if (q == j) continue;
        const double s = p.grid[j], t = p.grid[q];
        if (std::abs(t - s) > h) continue;
        const Rot3 rel = p.frames[q].transpose() * p.frames[j] * predict(s, t);
        try {
          const double a = log_so3(rel).angle();
          acc += kernel_h(t - s, h, kernel) * 2.0 * a * a;
        } catch (const Error&) {
          ++drops[i];
        }
      }
    }
    per_path[i] = acc / (static_cast<double>(n) * static_cast<double>(n));
  });
  if (dropped) *dropped = std::accumulate(drops.begin(), drops.end(), std::size_t{0});
  double total = 0.0;
  for (double v : per_path) total += v;
  return total;
}

}  // namespace

double criterion_exact(const ThetaFunction& theta, std::span<const FrenetPath> paths, double h, std::size_t* dropped,
                       KernelShape kernel) {
  return criterion_sum(paths, h, dropped, kernel,
                       [&](double s, double t) { return flow(theta, t - s, s, Rot3::identity()); });
}

double criterion_approx(const ThetaFunction& theta, std::span<const FrenetPath> paths, double h, std::size_t* dropped,
                        KernelShape kernel) {
  return criterion_sum(paths, h, dropped, kernel,
                       [&](double s, double t) { return exp_so3(a_theta(theta, 0.5 * (s + t)) * (t - s)); });
}

double penalty(const ThetaFunction& theta, const Hyperparams& hp) {
  return hp.lambda_kappa * theta.kappa.roughness() + hp.lambda_tau * theta.tau.roughness();
}

ThetaFunction estimate_mean_theta(std::span<const FrenetPath> paths, const Hyperparams& hp, const EstimateOptions& opt) {
  require(!paths.empty(), "estimate_mean_theta: no paths");
  return fit_theta_splines(raw_log_increments(paths, hp.h, opt.obs), hp, opt.n_knots);
}

MeanShapeResult mean_shape(const ThetaFunction& theta, std::span<const Rot3> initial_frames,
                           std::span<const Vec3> initial_points, std::span<const double> grid) {
  require(!initial_frames.empty() && !initial_points.empty(), "mean_shape: empty inputs");
  MeanShapeResult out;
  out.theta = theta;
  const Rot3 q0 = karcher_mean(initial_frames, 1e-12, 200);
  Vec3 x0 = Vec3::Zero();
  for (const Vec3& p : initial_points) x0 += p;
  x0 /= static_cast<double>(initial_points.size());
  out.mean_path = solve_frenet_path(theta, q0, grid);
  out.mean_curve = reconstruct_curve(theta, x0, q0, grid);
  return out;
}

namespace {

// Frames predicted at every grid point of `p` from frame `q0` at index j0.
std::vector<Rot3> predict_along(const ThetaFunction& theta, const FrenetPath& p, std::size_t j0, const Rot3& q0) {
  std::vector<Rot3> out(p.size());
  out[j0] = q0;
  for (std::size_t j = j0 + 1; j < p.size(); ++j)
    out[j] = flow(theta, p.grid[j] - p.grid[j - 1], p.grid[j - 1], out[j - 1]);
  for (std::size_t j = j0; j-- > 0;) out[j] = flow(theta, p.grid[j] - p.grid[j + 1], p.grid[j + 1], out[j + 1]);
  return out;
}

bool better(const CvEntry& a, const CvEntry& b) {
  const double tol = std::max(1e-12 * std::max(std::abs(a.score), std::abs(b.score)), 1e-20);
  if (a.score < b.score - tol) return true;
  if (a.score > b.score + tol) return false;
  const double la = a.hp.lambda_kappa + a.hp.lambda_tau, lb = b.hp.lambda_kappa + b.hp.lambda_tau;
  if (la != lb) return la > lb;
  return a.hp.h > b.hp.h;
}

}  // namespace

CvResult cross_validate(std::span<const FrenetPath> paths, std::span<const Hyperparams> candidates, Rng& rng,
                        const CvOptions& opt) {
  require(!candidates.empty(), "cross_validate: empty candidate grid");
  require(!paths.empty(), "cross_validate: no paths");
  const int k_folds = opt.folds;
  require(k_folds >= 2, "cross_validate: need at least 2 folds");
  for (const FrenetPath& p : paths)
    require(p.size() >= static_cast<std::size_t>(k_folds), "cross_validate: every path needs >= K frames");

  // Random partition of all (i, j) indices into K folds.
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (std::size_t i = 0; i < paths.size(); ++i)
    for (std::size_t j = 0; j < paths[i].size(); ++j) idx.emplace_back(i, j);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  std::vector<std::vector<int>> fold(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) fold[i].assign(paths[i].size(), 0);
  for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k].first][idx[k].second] = static_cast<int>(k % k_folds);

  // Retained sub-paths per fold.
  std::vector<std::vector<FrenetPath>> train(k_folds);
  for (int f = 0; f < k_folds; ++f) {
    for (std::size_t i = 0; i < paths.size(); ++i) {
      FrenetPath sub;
      for (std::size_t j = 0; j < paths[i].size(); ++j)
        if (fold[i][j] != f) {
          sub.grid.push_back(paths[i].grid[j]);
          sub.frames.push_back(paths[i].frames[j]);
        }
      if (sub.size() == 0) throw Error(ErrorKind::FoldTooSmall, "a fold removes every frame of a curve");
      if (sub.size() < 3) throw Error(ErrorKind::FoldTooSmall, "a fold leaves fewer than 3 frames in a curve");
      train[f].push_back(std::move(sub));
    }
  }

  const std::size_t n_tasks = candidates.size() * static_cast<std::size_t>(k_folds);
  std::vector<double> task_score(n_tasks, 0.0);
  parallel_for(n_tasks, [&](std::size_t task) {
    const std::size_t c = task / k_folds;
    const int f = static_cast<int>(task % k_folds);
    const ThetaFunction theta = estimate_mean_theta(train[f], candidates[c], opt.estimate);
    std::vector<std::size_t> first(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      std::size_t j0 = 0;
      while (fold[i][j0] == f) ++j0;
      first[i] = j0;
    }
    std::vector<Rot3> starts(paths.size());
    if (opt.start == CvStart::PopulationMean) {
      std::vector<Rot3> at_zero;
      for (std::size_t i = 0; i < paths.size(); ++i)
        at_zero.push_back(flow(theta, -paths[i].grid[first[i]], paths[i].grid[first[i]], paths[i].frames[first[i]]));
      const Rot3 mean0 = karcher_mean(at_zero, 1e-10, 200);
      for (std::size_t i = 0; i < paths.size(); ++i) {
        starts[i] = flow(theta, paths[i].grid[first[i]], 0.0, mean0);
      }
    } else {
      for (std::size_t i = 0; i < paths.size(); ++i) starts[i] = paths[i].frames[first[i]];
    }
    double score = 0.0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const auto pred = predict_along(theta, paths[i], first[i], starts[i]);
      for (std::size_t j = 0; j < paths[i].size(); ++j) {
        if (fold[i][j] != f) continue;
        const double a = rotation_angle(paths[i].frames[j].transpose() * pred[j]);
        score += 2.0 * a * a;
      }
    }
    task_score[task] = score;
  });

  CvResult out;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double s = 0.0;
    for (int f = 0; f < k_folds; ++f) s += task_score[c * k_folds + f];
    out.table.push_back({candidates[c], s});
  }
  CvEntry best = out.table.front();
  for (const CvEntry& e : out.table)
    if (better(e, best)) best = e;
  out.best = best.hp;
  return out;
}

std::vector<Hyperparams> default_hyperparam_grid(double h_lo, double h_hi, int n_h, double lam_lo, double lam_hi,
                                                 int n_lam) {
  auto logspace = [](double a, double b, int n) {
    std::vector<double> v;
    for (int k = 0; k < n; ++k)
      v.push_back(n == 1 ? a : std::exp(std::log(a) + (std::log(b) - std::log(a)) * k / (n - 1)));
    return v;
  };
  std::vector<Hyperparams> grid;
  for (double h : logspace(h_lo, h_hi, n_h))
    for (double lam : logspace(lam_lo, lam_hi, n_lam)) grid.push_back({h, lam, lam});
  return grid;
}

}  // namespace fsmean
