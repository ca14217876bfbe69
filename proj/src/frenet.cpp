#include "fsmean/frenet.hpp"

#include <cmath>

#include "fsmean/errors.hpp"

namespace fsmean {

namespace {

// Visits the substeps of [a, b] aligned to the lattice k·dx. The callback
// receives (start, signed step).
template <class F>
void walk_lattice(double a, double b, double dx, F&& step) {
  if (a == b) return;
  constexpr double eps = 1e-12;
  if (b > a) {
    double s = a;
    double k = std::floor(a / dx + eps) + 1.0;
    while (k * dx < b - eps) {
      const double next = k * dx;
      if (next > s + eps) {
        step(s, next - s);
        s = next;
      }
      k += 1.0;
    }
    step(s, b - s);
  } else {
    double s = a;
    double k = std::ceil(a / dx - eps) - 1.0;
    while (k * dx > b + eps) {
      const double next = k * dx;
      if (next < s - eps) {
        step(s, next - s);
        s = next;
      }
      k -= 1.0;
    }
    step(s, b - s);
  }
}

}  // namespace

ThetaFunction ThetaFunction::constant(double kappa, double tau) {
  return {CubicSpline::constant(kappa), CubicSpline::constant(tau)};
}

double ThetaFunction::kappa_at(double s) const { return std::max(kappa(s), kKappaMin); }

Skew3 a_theta(const ThetaFunction& theta, double s) {
  return hat(Vec3(theta.kappa_at(s), theta.tau_at(s), 0.0));
}

Rot3 lie_euler_midpoint_step(const Rot3& q, const ThetaFunction& theta, double s, double h) {
  if (h == 0.0) return q;
  return q * exp_so3(a_theta(theta, s + 0.5 * h) * h);
}

FrenetPath solve_frenet_path(const ThetaFunction& theta, const Rot3& q0, std::span<const double> grid,
                             const IntegratorOptions& opt) {
  require(!grid.empty(), "solve_frenet_path: empty grid");
  FrenetPath path;
  path.grid.assign(grid.begin(), grid.end());
  path.frames.reserve(grid.size());
  path.frames.push_back(q0);
  Rot3 q = q0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    require(grid[k] > grid[k - 1], "solve_frenet_path: grid must be increasing");
    walk_lattice(grid[k - 1], grid[k], opt.max_substep,
                 [&](double s, double h) { q = lie_euler_midpoint_step(q, theta, s, h); });
    path.frames.push_back(q);
  }
  return path;
}

Rot3 flow(const ThetaFunction& theta, double t, double s, const Rot3& q, const IntegratorOptions& opt) {
  Rot3 out = q;
  walk_lattice(s, s + t, opt.max_substep,
               [&](double a, double h) { out = lie_euler_midpoint_step(out, theta, a, h); });
  return out;
}

ArclengthCurve reconstruct_curve(const ThetaFunction& theta, const Vec3& x0, const Rot3& q0,
                                 std::span<const double> grid, const IntegratorOptions& opt) {
  require(!grid.empty(), "reconstruct_curve: empty grid");
  ArclengthCurve curve;
  curve.grid.assign(grid.begin(), grid.end());
  curve.points.reserve(grid.size());
  curve.length = 1.0;
  Rot3 q = q0;
  Vec3 x = x0;
  curve.points.push_back(x);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    require(grid[k] > grid[k - 1], "reconstruct_curve: grid must be increasing");
    walk_lattice(grid[k - 1], grid[k], opt.max_substep, [&](double s, double h) {
      const Vec3 t0 = q.col(0);
      q = lie_euler_midpoint_step(q, theta, s, h);
      x += 0.5 * h * (t0 + q.col(0));
    });
    curve.points.push_back(x);
  }
  return curve;
}

ThetaFunction rescale_theta(const ThetaFunction& theta, double length) {
  require(length > 0.0, "rescale_theta: length must be positive");
  return {theta.kappa.reparametrized(length, length), theta.tau.reparametrized(length, length)};
}

void sample_theta(const ThetaFunction& theta, std::span<const double> grid, std::vector<double>& kappa,
                  std::vector<double>& tau) {
  kappa.resize(grid.size());
  tau.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    kappa[k] = theta.kappa_at(grid[k]);
    tau[k] = theta.tau_at(grid[k]);
  }
}

}  // namespace fsmean
