#include "fsmean/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "fsmean/errors.hpp"
#include "fsmean/interp.hpp"
#include "fsmean/parallel.hpp"

namespace fsmean {

namespace {

Rot3 weighted_procrustes(std::span<const Vec3> a, std::span<const Vec3> b, std::span<const double> w) {
  require(a.size() == b.size() && !a.empty(), "procrustes_rotation: size mismatch");
  Mat3 m = Mat3::Zero();
  for (std::size_t j = 0; j < a.size(); ++j) m += (w.empty() ? 1.0 : w[j]) * b[j] * a[j].transpose();
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return project_so3(svd.matrixU() * d * svd.matrixV().transpose());
}

std::vector<double> trapezoid_weights(std::span<const double> grid) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double h = grid[j + 1] - grid[j];
    w[j] += 0.5 * h;
    w[j + 1] += 0.5 * h;
  }
  return w;
}

double srvf_gap(const SrvfFunction& a, const SrvfFunction& b) {
  std::vector<double> d(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) d[j] = (a.q[j] - b.q[j]).squaredNorm();
  return std::sqrt(std::max(trapezoid(a.grid, d), 0.0));
}

std::vector<std::vector<double>> channels(const SrvfFunction& q) {
  std::vector<std::vector<double>> c(3, std::vector<double>(q.size()));
  for (std::size_t j = 0; j < q.size(); ++j)
    for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)][j] = q.q[j][k];
  return c;
}

// (O q∘γ) √γ' on q's grid.
SrvfFunction act(const SrvfFunction& q, const Rot3& o, const Warping& gamma) {
  const auto ch = channels(q);
  const CubicInterpolant c[3] = {{q.grid, ch[0]}, {q.grid, ch[1]}, {q.grid, ch[2]}};
  const auto d = gamma.derivative();
  SrvfFunction out;
  out.grid = q.grid;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double g = std::clamp(gamma.values[j], 0.0, 1.0);
    const Vec3 v(c[0](g), c[1](g), c[2](g));
    out.q.push_back(o * v * std::sqrt(std::max(d[j], 0.0)));
  }
  return out;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Rot3 procrustes_rotation(std::span<const Vec3> a, std::span<const Vec3> b) { return weighted_procrustes(a, b, {}); }

ArclengthCurve arithmetic_mean(std::span<const ArclengthCurve> curves, bool register_curves) {
  require(!curves.empty(), "arithmetic_mean: no curves");
  const std::size_t n = curves[0].size();
  for (const auto& c : curves)
    if (c.size() != n) throw Error(ErrorKind::GridMismatch, "arithmetic_mean: curves differ in grid size");

  auto centred = [](const ArclengthCurve& c) {
    Vec3 m = Vec3::Zero();
    for (const Vec3& p : c.points) m += p;
    m /= static_cast<double>(c.size());
    std::vector<Vec3> out;
    for (const Vec3& p : c.points) out.push_back(p - m);
    return out;
  };

  ArclengthCurve out;
  out.grid = curves[0].grid;
  out.points.assign(n, Vec3::Zero());
  const std::vector<Vec3> ref = register_curves ? centred(curves[0]) : curves[0].points;
  double length = 0.0;
  for (const auto& c : curves) {
    std::vector<Vec3> pts = c.points;
    if (register_curves) {
      pts = centred(c);
      const Rot3 r = procrustes_rotation(pts, ref);
      for (Vec3& p : pts) p = r * p;
    }
    for (std::size_t j = 0; j < n; ++j) out.points[j] += pts[j] / static_cast<double>(curves.size());
    length += c.length / static_cast<double>(curves.size());
  }
  out.length = length;
  return out;
}

double SrvfFunction::squared_norm() const {
  std::vector<double> v;
  for (const Vec3& x : q) v.push_back(x.squaredNorm());
  return trapezoid(grid, v);
}

SrvfFunction srvf_transform(const ArclengthCurve& curve, double bandwidth) {
  const DerivativeJet jet = local_poly_derivatives(curve, bandwidth);
  SrvfFunction out;
  out.grid = curve.grid;
  for (const Vec3& d : jet.d1) {
    const double speed = d.norm();
    out.q.push_back(speed > 1e-10 ? Vec3(d / std::sqrt(speed)) : Vec3::Zero());
  }
  return out;
}

ArclengthCurve srvf_to_curve(const SrvfFunction& q, const Vec3& x0) {
  ArclengthCurve out;
  out.grid = q.grid;
  out.points.push_back(x0);
  double length = 0.0;
  for (std::size_t j = 1; j < q.size(); ++j) {
    const double h = q.grid[j] - q.grid[j - 1];
    const Vec3 v0 = q.q[j - 1] * q.q[j - 1].norm(), v1 = q.q[j] * q.q[j].norm();
    out.points.push_back(out.points.back() + 0.5 * h * (v0 + v1));
    length += (out.points[j] - out.points[j - 1]).norm();
  }
  out.length = length;
  return out;
}

SrvfAlignment srvf_distance(const SrvfFunction& q0, const SrvfFunction& q1) {
  if (q0.size() != q1.size()) throw Error(ErrorKind::GridMismatch, "srvf_distance: grids differ");
  const auto w = trapezoid_weights(q0.grid);
  const auto target = channels(q0);

  SrvfAlignment r;
  r.gamma = Warping::identity(q0.grid);
  r.aligned = q1;
  r.distance = srvf_gap(q0, q1);
  for (int it = 1; it <= 20; ++it) {
    r.rotation = weighted_procrustes(act(q1, Rot3::identity(), r.gamma).q, q0.q, w);
    const SrvfFunction rotated = act(q1, r.rotation, Warping::identity(q0.grid));
    r.gamma = optimal_warp_channels(target, channels(rotated), q0.grid, 0.5);
    r.aligned = act(q1, r.rotation, r.gamma);
    const double d = srvf_gap(q0, r.aligned);
    r.iterations = it;
    const double change = std::abs(d - r.distance);
    r.distance = d;
    if (it > 1 && change < 1e-6) {
      r.converged = true;
      break;
    }
  }
  return r;
}

SrvfMean srvf_karcher_mean(std::span<const ArclengthCurve> curves, double bandwidth) {
  require(curves.size() >= 2, "srvf_karcher_mean: need >= 2 curves");
  const std::size_t n = curves.size();
  std::vector<SrvfFunction> qs(n);
  parallel_for(n, [&](std::size_t i) { qs[i] = srvf_transform(curves[i], bandwidth); });
  for (const auto& q : qs)
    if (q.size() != qs[0].size()) throw Error(ErrorKind::GridMismatch, "srvf_karcher_mean: grids differ");

  SrvfMean out;
  out.q = qs[0];
  const auto w = trapezoid_weights(out.q.grid);
  std::vector<SrvfAlignment> fits(n);
  for (int it = 1; it <= 30; ++it) {
    parallel_for(n, [&](std::size_t i) { fits[i] = srvf_distance(out.q, qs[i]); });
    SrvfFunction avg;
    avg.grid = out.q.grid;
    avg.q.assign(out.q.size(), Vec3::Zero());
    std::vector<Warping> warps;
    for (const auto& f : fits) {
      for (std::size_t j = 0; j < avg.size(); ++j) avg.q[j] += f.aligned.q[j] / static_cast<double>(n);
      warps.push_back(f.gamma);
    }
    // The template is only defined up to a warp and a rotation: pin both.
    SrvfFunction next = act(avg, Rot3::identity(), karcher_mean_warp(warps).inverse());
    next = act(next, weighted_procrustes(next.q, out.q.q, w), Warping::identity(next.grid));
    const double change = srvf_gap(next, out.q);
    out.q = std::move(next);
    out.iterations = it;
    if (change < 1e-4) {
      out.converged = true;
      break;
    }
  }
  Vec3 x0 = Vec3::Zero();
  for (const auto& c : curves) x0 += c.points.front() / static_cast<double>(n);
  out.curve = srvf_to_curve(out.q, x0);
  return out;
}

ThetaSamples individual_fs_mean(std::span<const FrenetPath> paths, const Hyperparams& hp,
                                std::span<const double> grid, const EstimateOptions& opt) {
  require(!paths.empty(), "individual_fs_mean: no paths");
  std::vector<ThetaSamples> each(paths.size());
  parallel_for(paths.size(), [&](std::size_t i) {
    const ThetaFunction th = estimate_mean_theta(paths.subspan(i, 1), hp, opt);
    sample_theta(th, grid, each[i].kappa, each[i].tau);
  });
  ThetaSamples out{std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)};
  for (const auto& e : each)
    for (std::size_t j = 0; j < grid.size(); ++j) {
      out.kappa[j] += e.kappa[j] / static_cast<double>(paths.size());
      out.tau[j] += e.tau[j] / static_cast<double>(paths.size());
    }
  return out;
}

ThetaSamples extrinsic_median(std::span<const DerivativeJet> jets, std::span<const double> grid) {
  require(!jets.empty(), "extrinsic_median: no curves");
  std::vector<std::vector<double>> kappa(grid.size()), tau(grid.size());
  for (const DerivativeJet& jet : jets) {
    const ExtrinsicTheta ext = extrinsic_theta(jet);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      kappa[j].push_back(interp_linear(ext.grid, ext.kappa, grid[j]));
      const auto hi = std::upper_bound(ext.grid.begin(), ext.grid.end(), grid[j]);
      const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(hi - ext.grid.begin()), ext.grid.size() - 1);
      const std::size_t a = b == 0 ? 0 : b - 1;
      const std::optional<double> ta = ext.tau[a], tb = ext.tau[b];
      if (!ta || !tb) continue;
      const double span = ext.grid[b] - ext.grid[a];
      const double u = span > 0.0 ? std::clamp((grid[j] - ext.grid[a]) / span, 0.0, 1.0) : 0.0;
      tau[j].push_back((1.0 - u) * *ta + u * *tb);
    }
  }
  ThetaSamples out;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    out.kappa.push_back(median(kappa[j]));
    out.tau.push_back(tau[j].empty() ? 0.0 : median(tau[j]));
  }
  return out;
}

std::vector<double> extrinsic_kg_median(std::span<const ArclengthCurve> curves, std::span<const double> grid,
                                        double bandwidth) {
  require(!curves.empty(), "extrinsic_kg_median: no curves");
  std::vector<std::vector<double>> at(grid.size());
  for (const ArclengthCurve& c : curves) {
    const DerivativeJet jet = local_poly_derivatives(c, bandwidth);
    std::vector<double> kg(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) {
      Mat3 m;
      m << c.points[j], jet.d1[j], jet.d2[j];
      const double speed = jet.d1[j].norm();
      kg[j] = speed > 1e-10 ? m.determinant() / (speed * speed * speed) : 0.0;
    }
    for (std::size_t j = 0; j < grid.size(); ++j) at[j].push_back(interp_linear(c.grid, kg, grid[j]));
  }
  std::vector<double> out;
  for (auto& v : at) out.push_back(median(std::move(v)));
  return out;
}

}  // namespace fsmean
