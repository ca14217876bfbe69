#include "fsmean/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "fsmean/errors.hpp"
#include "fsmean/interp.hpp"
#include "fsmean/simd/kernels.hpp"

namespace fsmean {

namespace {

// Kernel window of half-width bw around s0, shifted to stay inside
// [lo, hi]. u = (x − s0)/bw, v = (x − c)/bw with c the window centre, and
// v0 = (s0 − c)/bw.
struct Window {
  std::size_t first = 0;
  double v0 = 0.0;
  std::vector<double> u, v, w;
};

void make_window(std::span<const double> x, double s0, double bw, KernelShape shape, Window& win) {
  const double lo = x.front(), hi = x.back();
  double c = s0;
  if (hi - lo <= 2.0 * bw)
    c = 0.5 * (lo + hi);
  else
    c = std::clamp(s0, lo + bw, hi - bw);
  const auto b = std::lower_bound(x.begin(), x.end(), c - bw);
  const auto e = std::upper_bound(x.begin(), x.end(), c + bw);
  win.first = static_cast<std::size_t>(b - x.begin());
  const std::size_t n = static_cast<std::size_t>(e - b);
  win.v0 = (s0 - c) / bw;
  win.u.resize(n);
  win.v.resize(n);
  win.w.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double xk = x[win.first + k];
    win.u[k] = (xk - s0) / bw;
    win.v[k] = (xk - c) / bw;
    win.w[k] = kernel(win.v[k], shape);
  }
}

void split_coords(std::span<const Vec3> pts, std::vector<double>& xs, std::vector<double>& ys, std::vector<double>& zs) {
  xs.resize(pts.size());
  ys.resize(pts.size());
  zs.resize(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    xs[k] = pts[k].x();
    ys[k] = pts[k].y();
    zs[k] = pts[k].z();
  }
}

// Weighted polynomial fit of the given degree in v; returns coefficients per
// coordinate as columns.
Eigen::MatrixXd local_fit(const Window& win, const std::vector<double>& xs, const std::vector<double>& ys,
                          const std::vector<double>& zs, int degree, double max_cond) {
  const std::size_t n = win.u.size();
  simd::PolyMoments m;
  simd::poly_moments(win.v, win.w, std::span<const double>(xs).subspan(win.first, n),
                     std::span<const double>(ys).subspan(win.first, n),
                     std::span<const double>(zs).subspan(win.first, n), m);
  const int p = degree + 1;
  Eigen::MatrixXd gram(p, p), rhs(p, 3);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) gram(i, j) = m.s[i + j];
    for (int c = 0; c < 3; ++c) rhs(i, c) = m.t[c][i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const double emin = es.eigenvalues()(0), emax = es.eigenvalues()(p - 1);
  if (!(emin > 0.0) || emax / emin > max_cond)
    throw Error(ErrorKind::IllConditioned, "local polynomial design is ill-conditioned; increase the bandwidth");
  return gram.ldlt().solve(rhs);
}

}  // namespace

ArclengthResult arclength(const EuclideanCurve& curve, double bandwidth, KernelShape shape) {
  const std::size_t n = curve.size();
  require(n >= 2 && curve.points.size() == n, "arclength: need matching times and points");
  for (std::size_t k = 1; k < n; ++k) require(curve.times[k] > curve.times[k - 1], "arclength: times must increase");
  const double span = curve.times.back() - curve.times.front();
  require(bandwidth > 0.0 && bandwidth <= 0.5 * span + 1e-12, "arclength: bandwidth must be in (0, T/2]");

  std::vector<double> xs, ys, zs;
  split_coords(curve.points, xs, ys, zs);
  std::vector<double> speed(n);
  Window win;
  for (std::size_t k = 0; k < n; ++k) {
    make_window(curve.times, curve.times[k], bandwidth, shape, win);
    const Eigen::MatrixXd beta = local_fit(win, xs, ys, zs, 1, 1e12);
    speed[k] = beta.row(1).norm() / bandwidth;
    if (k > 0 && k + 1 < n && speed[k] < 1e-10)
      throw Error(ErrorKind::DegenerateSpeed, "estimated speed vanishes; the curve is not regular");
  }
  ArclengthResult out;
  out.s.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k)
    out.s[k] = out.s[k - 1] + 0.5 * (curve.times[k] - curve.times[k - 1]) * (speed[k] + speed[k - 1]);
  out.length = out.s.back();
  if (!(out.length > 0.0)) throw Error(ErrorKind::DegenerateSpeed, "curve has zero length");
  return out;
}

ArclengthCurve normalize_to_unit_length(const EuclideanCurve& curve, std::span<const double> s, double length,
                                        std::size_t n_out) {
  require(length > 0.0, "normalize_to_unit_length: length must be positive");
  require(s.size() == curve.size() && s.size() >= 2, "normalize_to_unit_length: size mismatch");
  if (n_out == 0) n_out = curve.size();
  std::vector<double> u(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) u[k] = s[k] / length;
  for (std::size_t k = 1; k < u.size(); ++k)
    if (!(u[k] > u[k - 1])) throw Error(ErrorKind::DegenerateSpeed, "arclength is not strictly increasing");

  std::vector<double> xs, ys, zs;
  split_coords(curve.points, xs, ys, zs);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    xs[k] /= length;
    ys[k] /= length;
    zs[k] /= length;
  }
  ArclengthCurve out;
  out.grid = linspace(0.0, 1.0, n_out);
  out.length = length;
  std::vector<double> at = out.grid;
  for (double& a : at) a *= u.back();  // u.back() is 1 up to rounding
  const auto rx = resample(u, xs, at), ry = resample(u, ys, at), rz = resample(u, zs, at);
  out.points.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) out.points[k] = Vec3(rx[k], ry[k], rz[k]);
  return out;
}

DerivativeJet local_poly_derivatives(const ArclengthCurve& curve, double bandwidth, KernelShape shape) {
  const std::size_t n = curve.size();
  require(n >= 5 && curve.points.size() == n, "local_poly_derivatives: need at least 5 points");
  require(bandwidth > 0.0 && bandwidth <= 0.5, "local_poly_derivatives: bandwidth must be in (0, 0.5]");
  std::vector<double> xs, ys, zs;
  split_coords(curve.points, xs, ys, zs);
  DerivativeJet jet;
  jet.grid = curve.grid;
  jet.d1.resize(n);
  jet.d2.resize(n);
  jet.d3.resize(n);
  Window win;
  for (std::size_t k = 0; k < n; ++k) {
    make_window(curve.grid, curve.grid[k], bandwidth, shape, win);
    const Eigen::MatrixXd beta = local_fit(win, xs, ys, zs, 4, 1e10);
    // Derivatives of Σ β_i v^i at v0, converted to arclength units.
    Vec3 d[3] = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    for (int order = 1; order <= 3; ++order) {
      for (int i = order; i <= 4; ++i) {
        double f = 1.0;
        for (int j = 0; j < order; ++j) f *= i - j;
        d[order - 1] += f * std::pow(win.v0, i - order) * beta.row(i).transpose();
      }
      d[order - 1] /= std::pow(bandwidth, order);
    }
    jet.d1[k] = d[0];
    jet.d2[k] = d[1];
    jet.d3[k] = d[2];
  }
  return jet;
}

ExtrinsicTheta extrinsic_theta(const DerivativeJet& jet) {
  ExtrinsicTheta out;
  out.grid = jet.grid;
  out.kappa.resize(jet.size());
  out.tau.resize(jet.size());
  for (std::size_t k = 0; k < jet.size(); ++k) {
    const Vec3 c = jet.d1[k].cross(jet.d2[k]);
    const double cn = c.norm();
    const double sp = jet.d1[k].norm();
    out.kappa[k] = sp > 0.0 ? cn / (sp * sp * sp) : 0.0;
    if (cn > 1e-12) out.tau[k] = c.dot(jet.d3[k]) / (cn * cn);
  }
  return out;
}

namespace {

Rot3 gs_frame(const Vec3& d1, const Vec3& d2) {
  const double n1 = d1.norm();
  if (!(n1 > 1e-12)) throw Error(ErrorKind::FrameDegenerate, "first derivative vanishes");
  const Vec3 t = d1 / n1;
  const Vec3 nr = d2 - d2.dot(t) * t;
  if (!(nr.norm() > 1e-12 * std::max(1.0, d2.norm())))
    throw Error(ErrorKind::FrameDegenerate, "second derivative is parallel to the first");
  const Vec3 nn = nr.normalized();
  Mat3 q;
  q.col(0) = t;
  q.col(1) = nn;
  q.col(2) = t.cross(nn);
  return project_so3(q);
}

}  // namespace

FrenetPath gram_schmidt_frames(const DerivativeJet& jet) {
  FrenetPath path;
  path.grid = jet.grid;
  path.frames.reserve(jet.size());
  for (std::size_t k = 0; k < jet.size(); ++k) path.frames.push_back(gs_frame(jet.d1[k], jet.d2[k]));
  return path;
}

namespace {

Mat3 cross_matrix(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

struct LpState {
  Vec3 x0;
  Rot3 q;
  double kappa = 0.0, kappa_prime = 0.0, kappa_tau = 0.0;
};

Vec3 frenet_expansion(double h, const LpState& st) {
  const double h2 = h * h, h3 = h2 * h;
  return {h - h3 * st.kappa * st.kappa / 6.0, h2 * st.kappa / 2.0 + h3 * st.kappa_prime / 6.0,
          h3 * st.kappa_tau / 6.0};
}

double lp_objective(const Window& win, std::span<const Vec3> pts, double bw, const LpState& st) {
  double f = 0.0;
  for (std::size_t j = 0; j < win.u.size(); ++j)
    f += win.w[j] * (pts[win.first + j] - st.x0 - st.q * frenet_expansion(win.u[j] * bw, st)).squaredNorm();
  return f;
}

// Gauss-Newton with step halving on (x0, frame increment, κ, κ', κτ).
bool fit_lp_point(const Window& win, std::span<const Vec3> pts, double bw, LpState& st) {
  const std::size_t m = win.u.size();
  double f = lp_objective(win, pts, bw, st);
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixXd jac(3 * m, 9);
    Eigen::VectorXd res(3 * m);
    for (std::size_t j = 0; j < m; ++j) {
      const double sw = std::sqrt(win.w[j]);
      const double h = win.u[j] * bw, h2 = h * h, h3 = h2 * h;
      const Vec3 c = frenet_expansion(h, st);
      const Mat3& q = st.q.matrix();
      res.segment<3>(3 * j) = sw * (pts[win.first + j] - st.x0 - q * c);
      // Model derivatives; the residual Jacobian is their negative.
      jac.block<3, 3>(3 * j, 0) = sw * Mat3::Identity();
      jac.block<3, 3>(3 * j, 3) = -sw * q * cross_matrix(c);
      jac.block<3, 1>(3 * j, 6) = sw * q * Vec3(-h3 * st.kappa / 3.0, h2 / 2.0, 0.0);
      jac.block<3, 1>(3 * j, 7) = sw * q * Vec3(0.0, h3 / 6.0, 0.0);
      jac.block<3, 1>(3 * j, 8) = sw * q * Vec3(0.0, 0.0, h3 / 6.0);
    }
    // Column scaling keeps the h³ columns comparable with the others.
    Eigen::VectorXd scale = jac.colwise().norm().transpose();
    for (int i = 0; i < 9; ++i)
      if (!(scale(i) > 0.0)) return false;
    const Eigen::MatrixXd js = jac * scale.cwiseInverse().asDiagonal();
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(js);
    if (qr.rank() < 9) return false;
    const Eigen::VectorXd step = qr.solve(res).cwiseQuotient(scale);

    double t = 1.0;
    for (int half = 0; half < 30; ++half, t *= 0.5) {
      LpState trial = st;
      trial.x0 += t * step.segment<3>(0);
      const Vec3 w = t * step.segment<3>(3);
      const double angle = w.norm();
      if (angle > 0.0)
        trial.q = project_so3(st.q.matrix() * Eigen::AngleAxisd(angle, w / angle).toRotationMatrix());
      trial.kappa += t * step(6);
      trial.kappa_prime += t * step(7);
      trial.kappa_tau += t * step(8);
      const double ft = lp_objective(win, pts, bw, trial);
      if (ft <= f) {
        const double change = std::sqrt(2.0) * angle;
        st = trial;
        f = ft;
        if (change < 1e-8) return true;
        break;
      }
      if (half == 29) return std::sqrt(2.0) * step.segment<3>(3).norm() < 1e-6;
    }
  }
  return false;
}

}  // namespace

LpFrames constrained_lp_frames(const ArclengthCurve& curve, double bandwidth, KernelShape shape) {
  const DerivativeJet jet = local_poly_derivatives(curve, bandwidth, shape);
  const ExtrinsicTheta ext = extrinsic_theta(jet);
  const std::size_t n = curve.size();
  LpFrames out;
  out.path.grid = curve.grid;
  out.path.frames.resize(n);
  out.kappa.resize(n);
  out.kappa_prime.assign(n, 0.0);
  out.tau.resize(n);
  out.fallback.assign(n, false);

  Window win;
  for (std::size_t k = 0; k < n; ++k) {
    const Rot3 q_gs = gs_frame(jet.d1[k], jet.d2[k]);
    make_window(curve.grid, curve.grid[k], bandwidth, shape, win);
    LpState st{curve.points[k], q_gs, ext.kappa[k], 0.0, ext.kappa[k] * ext.tau[k].value_or(0.0)};
    bool ok = false;
    try {
      ok = fit_lp_point(win, curve.points, bandwidth, st);
    } catch (const Error&) {
      ok = false;
    }
    if (ok && st.kappa < 0.0) {
      Mat3 flip = st.q.matrix();
      flip.col(1) *= -1.0;
      flip.col(2) *= -1.0;
      st.q = Rot3::unchecked(flip);
      st.kappa = -st.kappa;
      st.kappa_prime = -st.kappa_prime;
      st.kappa_tau = -st.kappa_tau;
    }
    if (ok) {
      out.path.frames[k] = st.q;
      out.kappa[k] = st.kappa;
      out.kappa_prime[k] = st.kappa_prime;
      out.tau[k] = st.kappa > 1e-12 ? st.kappa_tau / st.kappa : 0.0;
    } else {
      out.path.frames[k] = q_gs;
      out.kappa[k] = ext.kappa[k];
      out.tau[k] = ext.tau[k].value_or(0.0);
      out.fallback[k] = true;
    }
  }
  return out;
}

PreprocessedCurve preprocess_curve(const EuclideanCurve& curve, const PreprocessOptions& opt) {
  const double span = curve.times.empty() ? 0.0 : curve.times.back() - curve.times.front();
  const double tbw = opt.time_bandwidth > 0.0 ? opt.time_bandwidth : 0.05 * span;
  const ArclengthResult al = arclength(curve, tbw, opt.kernel);
  PreprocessedCurve out;
  out.curve = normalize_to_unit_length(curve, al.s, al.length, opt.n_grid);
  out.jet = local_poly_derivatives(out.curve, opt.bandwidth, opt.kernel);
  if (opt.frames == FrameMethod::GramSchmidt) {
    out.frames = gram_schmidt_frames(out.jet);
  } else {
    LpFrames lp = constrained_lp_frames(out.curve, opt.bandwidth, opt.kernel);
    out.frames = std::move(lp.path);
    out.fallback_count = static_cast<std::size_t>(std::count(lp.fallback.begin(), lp.fallback.end(), true));
  }
  return out;
}

}  // namespace fsmean
