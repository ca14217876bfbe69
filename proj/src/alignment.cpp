#include "fsmean/alignment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fsmean/errors.hpp"
#include "fsmean/interp.hpp"
#include "fsmean/parallel.hpp"

namespace fsmean {

namespace {

constexpr double kMinIncrement = 1e-9;

void require_uniform(std::span<const double> grid) {
  require(grid.size() >= 5, "warping grid needs >= 5 points");
  require(grid.front() == 0.0 && std::abs(grid.back() - 1.0) < 1e-12, "warping grid must span [0, 1]");
  const double h = grid[1] - grid[0];
  for (std::size_t j = 1; j < grid.size(); ++j)
    require(std::abs(grid[j] - grid[j - 1] - h) < 1e-9, "warping grid must be uniform");
}

}  // namespace

Warping Warping::identity(std::span<const double> grid) {
  Warping w;
  w.grid.assign(grid.begin(), grid.end());
  w.values = w.grid;
  return w;
}

void Warping::validate() const {
  require(grid.size() == values.size() && grid.size() >= 2, "warping: size mismatch");
  require(std::abs(values.front()) < 1e-12 && std::abs(values.back() - 1.0) < 1e-12, "warping: must fix 0 and 1");
  for (std::size_t j = 1; j < values.size(); ++j)
    require(values[j] - values[j - 1] >= kMinIncrement, "warping: not strictly increasing");
}

double Warping::operator()(double s) const { return MonotoneInterpolant(grid, values)(s); }

std::vector<double> Warping::derivative() const {
  const std::size_t n = values.size();
  require(n >= 5, "warping derivative needs >= 5 points");
  const double h = grid[1] - grid[0];
  const auto& f = values;
  std::vector<double> d(n);
  for (std::size_t j = 2; j + 2 < n; ++j) d[j] = (-f[j + 2] + 8.0 * f[j + 1] - 8.0 * f[j - 1] + f[j - 2]) / (12.0 * h);
  d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
  d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
  d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / (12.0 * h);
  d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * h);
  return d;
}

Warping Warping::inverse() const {
  const MonotoneInterpolant inv(values, grid);
  Warping w;
  w.grid = grid;
  w.values.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) w.values[j] = inv(grid[j]);
  w.values.front() = 0.0;
  w.values.back() = 1.0;
  return w;
}

Warping Warping::compose(const Warping& inner) const {
  require(inner.grid.size() == grid.size(), "compose: grid mismatch");
  const MonotoneInterpolant outer(grid, values);
  Warping w;
  w.grid = grid;
  w.values.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) w.values[j] = outer(inner.values[j]);
  w.values.front() = 0.0;
  w.values.back() = 1.0;
  return w;
}

double Warping::sup_distance(const Warping& other) const {
  require(other.values.size() == values.size(), "sup_distance: size mismatch");
  double d = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) d = std::max(d, std::abs(values[j] - other.values[j]));
  return d;
}

ThetaSamples warp_action(const ThetaSamples& theta, const Warping& gamma) {
  const std::size_t n = gamma.size();
  require(theta.kappa.size() == n && theta.tau.size() == n, "warp_action: grid mismatch");
  const CubicInterpolant k(gamma.grid, theta.kappa), t(gamma.grid, theta.tau);
  const auto d = gamma.derivative();
  ThetaSamples out;
  out.kappa.resize(n);
  out.tau.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double g = std::clamp(gamma.values[j], 0.0, 1.0);
    out.kappa[j] = k(g) * d[j];
    out.tau[j] = t(g) * d[j];
  }
  return out;
}

namespace {

std::vector<double> trapezoid_weights(std::span<const double> grid) {
  const std::size_t n = grid.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double h = grid[j + 1] - grid[j];
    w[j] += 0.5 * h;
    w[j + 1] += 0.5 * h;
  }
  return w;
}

std::vector<double> tiled_weights(std::span<const double> grid, std::size_t length) {
  require(length % grid.size() == 0, "fpca: function length must be a multiple of the grid size");
  const auto w = trapezoid_weights(grid);
  std::vector<double> out(length);
  for (std::size_t j = 0; j < length; ++j) out[j] = w[j % grid.size()];
  return out;
}

double weighted_dot(std::span<const double> a, std::span<const double> b, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += w[j] * a[j] * b[j];
  return s;
}

}  // namespace

Warping karcher_mean_warp(std::span<const Warping> warps, int max_iter, double tol) {
  require(!warps.empty(), "karcher_mean_warp: no warps");
  const std::vector<double>& grid = warps[0].grid;
  const std::size_t m = grid.size();
  const auto w = trapezoid_weights(grid);
  auto inner = [&](const std::vector<double>& a, const std::vector<double>& b) { return weighted_dot(a, b, w); };

  std::vector<std::vector<double>> psi;
  for (const Warping& g : warps) {
    require(g.size() == m, "karcher_mean_warp: grid mismatch");
    auto d = g.derivative();
    for (double& x : d) x = std::sqrt(std::max(x, 0.0));
    const double n = std::sqrt(inner(d, d));
    for (double& x : d) x /= n;
    psi.push_back(std::move(d));
  }
  std::vector<double> mu(m, 0.0);
  for (const auto& p : psi)
    for (std::size_t j = 0; j < m; ++j) mu[j] += p[j];
  for (int it = 0; it < max_iter; ++it) {
    const double nm = std::sqrt(inner(mu, mu));
    for (double& x : mu) x /= nm;
    std::vector<double> v(m, 0.0);
    for (const auto& p : psi) {
      const double th = std::acos(std::clamp(inner(p, mu), -1.0, 1.0));
      if (th < 1e-12) continue;
      const double f = th / std::sin(th) / static_cast<double>(psi.size());
      for (std::size_t j = 0; j < m; ++j) v[j] += f * (p[j] - std::cos(th) * mu[j]);
    }
    const double nv = std::sqrt(inner(v, v));
    if (nv < tol) break;
    for (std::size_t j = 0; j < m; ++j) mu[j] = std::cos(nv) * mu[j] + std::sin(nv) * v[j] / nv;
  }

  Warping out;
  out.grid = grid;
  out.values.assign(m, 0.0);
  for (std::size_t j = 1; j < m; ++j)
    out.values[j] = out.values[j - 1] + 0.5 * (grid[j] - grid[j - 1]) * (mu[j - 1] * mu[j - 1] + mu[j] * mu[j]);
  for (double& x : out.values) x /= out.values.back();
  return out;
}

std::vector<double> FpcaModel::reconstruct(std::span<const double> f) const {
  require(f.size() == mean.size(), "FpcaModel::reconstruct: size mismatch");
  const auto w = tiled_weights(grid, mean.size());
  std::vector<double> c(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) c[j] = f[j] - mean[j];
  std::vector<double> out = mean;
  for (const auto& phi : components) {
    const double xi = weighted_dot(c, phi, w);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += xi * phi[j];
  }
  return out;
}

FpcaModel fpca(std::span<const std::vector<double>> functions, std::span<const double> grid, int k) {
  const std::size_t n = functions.size();
  require(n >= 2, "fpca: need >= 2 functions");
  require(k >= 0 && static_cast<std::size_t>(k) <= n - 1, "fpca: K must be in [0, N - 1]");
  const std::size_t len = functions[0].size();
  for (const auto& f : functions) require(f.size() == len, "fpca: functions differ in length");
  const auto w = tiled_weights(grid, len);

  FpcaModel m;
  m.grid.assign(grid.begin(), grid.end());
  m.mean.assign(len, 0.0);
  for (const auto& f : functions)
    for (std::size_t j = 0; j < len; ++j) m.mean[j] += f[j] / static_cast<double>(n);

  Eigen::MatrixXd y(n, len);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < len; ++j)
      y(i, j) = (functions[i][j] - m.mean[j]) * std::sqrt(w[j]) / std::sqrt(static_cast<double>(n - 1));
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  for (Eigen::Index r = 0; r < sv.size(); ++r) m.eigenvalues.push_back(sv[r] * sv[r]);

  for (int c = 0; c < k; ++c) {
    std::vector<double> phi(len);
    std::size_t arg = 0;
    for (std::size_t j = 0; j < len; ++j) {
      phi[j] = svd.matrixV()(static_cast<Eigen::Index>(j), c) / std::sqrt(w[j]);
      if (std::abs(phi[j]) > std::abs(phi[arg])) arg = j;
    }
    if (phi[arg] < 0.0)
      for (double& v : phi) v = -v;
    m.components.push_back(std::move(phi));
  }
  for (const auto& f : functions) {
    std::vector<double> c(len), xi;
    for (std::size_t j = 0; j < len; ++j) c[j] = f[j] - m.mean[j];
    for (const auto& phi : m.components) xi.push_back(weighted_dot(c, phi, w));
    m.scores.push_back(std::move(xi));
  }
  return m;
}

int choose_components(std::span<const double> eigenvalues, double fraction, int cap) {
  double total = 0.0;
  for (double e : eigenvalues) total += e;
  if (total <= 0.0) return 0;
  double acc = 0.0;
  int k = 0;
  for (double e : eigenvalues) {
    if (acc >= fraction * total || k >= cap) break;
    acc += e;
    ++k;
  }
  return k;
}

namespace {

// Linear interpolation of grid samples at fractional index p.
double at_index(const std::vector<double>& f, double p) {
  const double last = static_cast<double>(f.size() - 1);
  p = std::clamp(p, 0.0, last);
  const std::size_t i = std::min(static_cast<std::size_t>(p), f.size() - 2);
  const double u = p - static_cast<double>(i);
  return (1.0 - u) * f[i] + u * f[i + 1];
}

struct WarpProblem {
  std::span<const std::vector<double>> target;
  std::span<const std::vector<double>> source;
  double step;
  double power;

  // Cost of the grid points i0 < k <= i1 with γ linear from (i0, y0) to (i1, y1), y in index units.
  double segment(std::size_t i0, double y0, std::size_t i1, double y1) const {
    const double slope = (y1 - y0) / static_cast<double>(i1 - i0);
    const double factor = power == 1.0 ? slope : std::pow(std::max(slope, 0.0), power);
    double c = 0.0;
    for (std::size_t k = i0 + 1; k <= i1; ++k) {
      const double p = y0 + slope * static_cast<double>(k - i0);
      for (std::size_t ch = 0; ch < target.size(); ++ch) {
        const double r = target[ch][k] - at_index(source[ch], p) * factor;
        c += step * r * r;
      }
    }
    return c;
  }
};

void require_channels(std::span<const std::vector<double>> target, std::span<const std::vector<double>> source,
                      std::size_t m) {
  require(!target.empty() && target.size() == source.size(), "optimal_warp: channel count mismatch");
  for (std::size_t c = 0; c < target.size(); ++c)
    require(target[c].size() == m && source[c].size() == m, "optimal_warp: grid mismatch");
}

constexpr double kMinSlope = 1.0 / 3.0, kMaxSlope = 3.0;
constexpr int kRefinePasses = 50;

constexpr int kMoves[7][2] = {{3, 1}, {2, 1}, {3, 2}, {1, 1}, {2, 3}, {1, 2}, {1, 3}};

}  // namespace

double warp_objective_channels(std::span<const std::vector<double>> target,
                               std::span<const std::vector<double>> source, const Warping& gamma, double power) {
  const std::size_t m = gamma.size();
  require_channels(target, source, m);
  const WarpProblem prob{target, source, gamma.grid[1] - gamma.grid[0], power};
  const double scale = static_cast<double>(m - 1);
  double c = 0.0;
  for (std::size_t j = 1; j < m; ++j) c += prob.segment(j - 1, gamma.values[j - 1] * scale, j, gamma.values[j] * scale);
  return c;
}

double warp_objective(const ThetaSamples& target, const ThetaSamples& source, const Warping& gamma) {
  const std::vector<std::vector<double>> t{target.kappa, target.tau}, s{source.kappa, source.tau};
  return warp_objective_channels(t, s, gamma, 1.0);
}

Warping optimal_warp(const ThetaSamples& target, const ThetaSamples& source, std::span<const double> grid) {
  const std::vector<std::vector<double>> t{target.kappa, target.tau}, s{source.kappa, source.tau};
  return optimal_warp_channels(t, s, grid, 1.0);
}

Warping optimal_warp_channels(std::span<const std::vector<double>> target, std::span<const std::vector<double>> source,
                              std::span<const double> grid, double power) {
  require_uniform(grid);
  const std::size_t m = grid.size();
  require_channels(target, source, m);
  require(power > 0.0, "optimal_warp: power must be positive");
  const WarpProblem prob{target, source, grid[1] - grid[0], power};
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> cost(m * m, kInf);
  std::vector<int> from(m * m, -1);
  cost[0] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c0 = cost[i * m + j];
      if (!std::isfinite(c0)) continue;
      for (int mv = 0; mv < 7; ++mv) {
        const std::size_t i1 = i + kMoves[mv][0], j1 = j + kMoves[mv][1];
        if (i1 >= m || j1 >= m) continue;
        const double c = c0 + prob.segment(i, static_cast<double>(j), i1, static_cast<double>(j1));
        if (c < cost[i1 * m + j1]) {
          cost[i1 * m + j1] = c;
          from[i1 * m + j1] = mv;
        }
      }
    }
  }
  require(std::isfinite(cost[m * m - 1]), "optimal_warp: no admissible path");

  // Nodes of the optimal path, in index units.
  std::vector<std::size_t> xi;
  std::vector<double> yi;
  for (std::size_t i = m - 1, j = m - 1;;) {
    xi.push_back(i);
    yi.push_back(static_cast<double>(j));
    if (i == 0 && j == 0) break;
    const int mv = from[i * m + j];
    i -= kMoves[mv][0];
    j -= kMoves[mv][1];
  }
  std::reverse(xi.begin(), xi.end());
  std::reverse(yi.begin(), yi.end());

  // Every grid point becomes a node.
  std::vector<double> y(m);
  for (std::size_t a = 0; a + 1 < xi.size(); ++a)
    for (std::size_t k = xi[a]; k <= xi[a + 1]; ++k) {
      const double u = static_cast<double>(k - xi[a]) / static_cast<double>(xi[a + 1] - xi[a]);
      y[k] = (1.0 - u) * yi[a] + u * yi[a + 1];
    }

  // Multiscale hat-shaped node moves, coarse to fine, each by golden-section search.
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  std::vector<double> hat;
  for (int pass = 0; pass < kRefinePasses; ++pass) {
    double gain = 0.0;
    for (std::size_t width = 32; width >= 1; width /= 2) {
      for (std::size_t k = 1; k + 1 < m; k += width) {
        const std::size_t a = k >= width ? k - width : 0, b = std::min(k + width, m - 1);
        hat.assign(b - a + 1, 0.0);
        for (std::size_t j = a + 1; j < b; ++j)
          hat[j - a] = 1.0 - std::abs(static_cast<double>(j) - static_cast<double>(k)) / static_cast<double>(width);
        double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t j = a; j < b; ++j) {
          const double slope = y[j + 1] - y[j], dh = hat[j + 1 - a] - hat[j - a];
          if (dh > 0.0) {
            lo = std::max(lo, (kMinSlope - slope) / dh);
            hi = std::min(hi, (kMaxSlope - slope) / dh);
          } else if (dh < 0.0) {
            lo = std::max(lo, (kMaxSlope - slope) / dh);
            hi = std::min(hi, (kMinSlope - slope) / dh);
          }
        }
        if (!(hi > lo)) continue;
        auto local = [&](double delta) {
          double c = 0.0;
          for (std::size_t j = a; j < b; ++j)
            c += prob.segment(j, y[j] + delta * hat[j - a], j + 1, y[j + 1] + delta * hat[j + 1 - a]);
          return c;
        };
        const double now = local(0.0);
        double x0 = lo, x1 = hi;
        double c1 = x1 - gr * (x1 - x0), c2 = x0 + gr * (x1 - x0);
        double f1 = local(c1), f2 = local(c2);
        for (int it = 0; it < 30; ++it) {
          if (f1 < f2) {
            x1 = c2;
            c2 = c1;
            f2 = f1;
            c1 = x1 - gr * (x1 - x0);
            f1 = local(c1);
          } else {
            x0 = c1;
            c1 = c2;
            f1 = f2;
            c2 = x0 + gr * (x1 - x0);
            f2 = local(c2);
          }
        }
        const double best = std::min(f1, f2);
        if (best < now) {
          const double delta = f1 < f2 ? c1 : c2;
          for (std::size_t j = a + 1; j < b; ++j) y[j] += delta * hat[j - a];
          gain += now - best;
        }
      }
      if (width == 1) break;
    }
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < m; ++j) total += prob.segment(j, y[j], j + 1, y[j + 1]);
    if (gain <= 1e-9 * total) break;
  }

  Warping w;
  w.grid.assign(grid.begin(), grid.end());
  w.values.resize(m);
  const double scale = 1.0 / static_cast<double>(m - 1);
  for (std::size_t k = 0; k < m; ++k) w.values[k] = y[k] * scale;
  w.values.front() = 0.0;
  w.values.back() = 1.0;
  return w;
}

namespace {

double median_abs(const std::vector<ThetaSamples>& fs, bool kappa) {
  std::vector<double> v;
  for (const auto& f : fs)
    for (double x : kappa ? f.kappa : f.tau) v.push_back(std::abs(x));
  if (v.empty()) return 1.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid] > 0.0 ? v[mid] : 1.0;
}

std::vector<double> stack(const ThetaSamples& t, double sk, double st) {
  std::vector<double> out;
  out.reserve(2 * t.kappa.size());
  for (double x : t.kappa) out.push_back(x / sk);
  for (double x : t.tau) out.push_back(x / st);
  return out;
}

ThetaSamples unstack(const std::vector<double>& f, double sk, double st) {
  const std::size_t m = f.size() / 2;
  ThetaSamples t;
  for (std::size_t j = 0; j < m; ++j) t.kappa.push_back(f[j] * sk);
  for (std::size_t j = 0; j < m; ++j) t.tau.push_back(f[m + j] * st);
  return t;
}

ThetaSamples weighted_mean(const std::vector<ThetaSamples>& fs, const std::vector<double>& w) {
  ThetaSamples m;
  m.kappa.assign(fs[0].kappa.size(), 0.0);
  m.tau.assign(fs[0].tau.size(), 0.0);
  for (std::size_t i = 0; i < fs.size(); ++i)
    for (std::size_t j = 0; j < m.kappa.size(); ++j) {
      m.kappa[j] += w[i] * fs[i].kappa[j];
      m.tau[j] += w[i] * fs[i].tau[j];
    }
  return m;
}

}  // namespace

AlignmentResult align_raw_estimates(std::span<const ThetaSamples> raw, std::span<const double> grid,
                                    const AlignmentOptions& opt) {
  require_uniform(grid);
  const std::size_t n = raw.size();
  require(n >= 2, "align_raw_estimates: need >= 2 curves");
  for (const auto& r : raw)
    require(r.kappa.size() == grid.size() && r.tau.size() == grid.size(), "align_raw_estimates: grid mismatch");
  std::vector<double> w = opt.weights;
  if (w.empty()) w.assign(n, 1.0 / static_cast<double>(n));
  require(w.size() == n, "align_raw_estimates: weight count mismatch");
  double wsum = 0.0;
  for (double x : w) wsum += x;
  require(std::abs(wsum - 1.0) < 1e-9, "align_raw_estimates: weights must sum to 1");
  require(opt.k < static_cast<int>(n), "align_raw_estimates: K must be < N");

  const std::vector<ThetaSamples> r0(raw.begin(), raw.end());
  const double sk = median_abs(r0, true), st = median_abs(r0, false);

  AlignmentResult res;
  res.aligned = r0;
  res.warps.assign(n, Warping::identity(grid));
  res.template_mean = weighted_mean(res.aligned, w);
  double prev_objective = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    // 1. Refine by the principal-component approximation around ν.
    std::vector<std::vector<double>> stacked(n);
    for (std::size_t i = 0; i < n; ++i) stacked[i] = stack(res.aligned[i], sk, st);
    const int k_max = std::min<int>(5, static_cast<int>(n) - 1);
    FpcaModel model = fpca(stacked, grid, opt.k >= 0 ? opt.k : k_max);
    if (opt.k < 0) model.components.resize(static_cast<std::size_t>(choose_components(model.eigenvalues)));
    model.mean = stack(res.template_mean, sk, st);

    // 2. Update γ against the refined curves.
    std::vector<Warping> step(n);
    std::vector<double> obj(n);
    parallel_for(n, [&](std::size_t i) {
      const ThetaSamples target = unstack(model.reconstruct(stacked[i]), 1.0, 1.0);
      const ThetaSamples source = unstack(stacked[i], 1.0, 1.0);
      step[i] = optimal_warp(target, source, grid);
      obj[i] = warp_objective(target, source, step[i]);
    });
    double objective = 0.0;
    for (double o : obj) objective += o;
    if (objective > prev_objective + 1e-8) {
      res.converged = false;
      break;
    }
    prev_objective = objective;

    // 3. Update y from the raw curves through the cumulative warps.
    double change = 0.0;
    std::vector<Warping> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = res.warps[i].compose(step[i]);
      change = std::max(change, next[i].sup_distance(res.warps[i]));
    }
    res.warps = std::move(next);
    parallel_for(n, [&](std::size_t i) { res.aligned[i] = warp_action(r0[i], res.warps[i]); });

    // 4. Update ν.
    res.template_mean = weighted_mean(res.aligned, w);
    res.iterations = iter;
    if (change < opt.tol) {
      res.converged = true;
      break;
    }
  }

  const Warping centre = karcher_mean_warp(res.warps).inverse();
  for (Warping& g : res.warps) g = g.compose(centre);
  parallel_for(n, [&](std::size_t i) { res.aligned[i] = warp_action(r0[i], res.warps[i]); });
  res.template_mean = weighted_mean(res.aligned, w);
  return res;
}

PhaseEstimate estimate_mean_theta_phase(std::span<const FrenetPath> paths, const Hyperparams& hp,
                                        const PhaseOptions& opt) {
  require(paths.size() >= 2, "estimate_mean_theta_phase: need >= 2 paths");
  const PseudoObservationSet obs = raw_log_increments(paths, hp.h, opt.estimate.obs);
  const auto grid = linspace(0.0, 1.0, opt.grid_size);
  const std::size_t n = paths.size();

  std::vector<std::vector<std::size_t>> rows(n);
  for (std::size_t k = 0; k < obs.size(); ++k) rows[static_cast<std::size_t>(obs.curve[k])].push_back(k);

  std::vector<ThetaSamples> raw(n);
  parallel_for(n, [&](std::size_t i) {
    PseudoObservationSet sub;
    sub.reserve(rows[i].size());
    for (std::size_t k : rows[i]) {
      sub.curve.push_back(obs.curve[k]);
      sub.u.push_back(obs.u[k]);
      sub.v.push_back(obs.v[k]);
      sub.r1.push_back(obs.r1[k]);
      sub.r2.push_back(obs.r2[k]);
      sub.r3.push_back(obs.r3[k]);
      sub.w.push_back(obs.w[k]);
    }
    const ThetaFunction th = fit_theta_splines(sub, hp, opt.estimate.n_knots);
    sample_theta(th, grid, raw[i].kappa, raw[i].tau);
  });

  PhaseEstimate out;
  out.alignment = align_raw_estimates(raw, grid, opt.alignment);
  out.warps = out.alignment.warps;

  PseudoObservationSet moved = obs;
  parallel_for(n, [&](std::size_t i) {
    const Warping inv = out.warps[i].inverse();
    const MonotoneInterpolant to_s(grid, inv.values);
    const auto d = out.warps[i].derivative();
    for (std::size_t k : rows[i]) {
      const double s = to_s(obs.v[k]);
      const double g = interp_linear(grid, d, s);
      moved.v[k] = s;
      moved.r1[k] = obs.r1[k] * g;
      moved.r2[k] = obs.r2[k] * g;
      moved.r3[k] = obs.r3[k] * g;
    }
  });
  out.theta = fit_theta_splines(moved, hp, opt.estimate.n_knots);
  return out;
}

}  // namespace fsmean
