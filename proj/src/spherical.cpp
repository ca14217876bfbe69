#include "fsmean/spherical.hpp"

#include <cmath>

#include "fsmean/errors.hpp"

namespace fsmean {

Skew3 spherical_a(double kg) { return hat(Vec3(1.0, kg, 0.0)); }

SphericalFramePath spherical_frames(const ArclengthCurve& curve, double bandwidth, KernelShape shape) {
  for (const Vec3& p : curve.points)
    require(std::abs(p.norm() - 1.0) <= 1e-3, "spherical_frames: points must lie on the unit sphere");
  const DerivativeJet jet = local_poly_derivatives(curve, bandwidth, shape);
  SphericalFramePath out;
  out.grid = curve.grid;
  out.length = curve.length;
  out.frames.reserve(curve.size());
  for (std::size_t j = 0; j < curve.size(); ++j) {
    const Vec3 a = curve.points[j].normalized();
    Vec3 b = jet.d1[j] - jet.d1[j].dot(a) * a;
    const double nb = b.norm();
    if (!(nb > 1e-12)) throw Error(ErrorKind::DegenerateSpeed, "spherical_frames: tangent vanishes");
    b /= nb;
    Mat3 m;
    m.col(0) = a;
    m.col(1) = b;
    m.col(2) = a.cross(b);
    out.frames.push_back(project_so3(m));
  }
  return out;
}

SphericalFramePath preprocess_spherical(const EuclideanCurve& curve, const PreprocessOptions& opt) {
  require(curve.size() >= 2, "preprocess_spherical: need >= 2 points");
  double radius = 0.0;
  for (const Vec3& p : curve.points) radius += p.norm();
  radius /= static_cast<double>(curve.size());
  require(radius > 0.0, "preprocess_spherical: zero radius");
  EuclideanCurve unit = curve;
  for (Vec3& p : unit.points) p /= radius;

  const double span = unit.times.back() - unit.times.front();
  const double tbw = opt.time_bandwidth > 0.0 ? opt.time_bandwidth : 0.05 * span;
  const ArclengthResult al = arclength(unit, tbw, opt.kernel);
  ArclengthCurve arc = normalize_to_unit_length(unit, al.s, al.length, opt.n_grid);
  for (Vec3& p : arc.points) p = (p * al.length).normalized();
  return spherical_frames(arc, opt.bandwidth, opt.kernel);
}

GeodesicCurvature estimate_mean_kg(std::span<const SphericalFramePath> paths, const Hyperparams& hp,
                                   const EstimateOptions& opt, double* unit_entry) {
  require(!paths.empty(), "estimate_mean_kg: no paths");
  std::vector<FrenetPath> frenet;
  double mean_length = 0.0;
  for (const auto& p : paths) {
    require(p.length > 0.0, "estimate_mean_kg: length must be positive");
    frenet.push_back(p.as_frenet());
    mean_length += p.length / static_cast<double>(paths.size());
  }
  PseudoObservationSet obs = raw_log_increments(frenet, hp.h, opt.obs);
  double w_sum = 0.0, r1_sum = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double len = paths[static_cast<std::size_t>(obs.curve[k])].length;
    obs.r1[k] /= len;
    obs.r2[k] /= len;
    obs.r3[k] /= len;
    w_sum += obs.w[k];
    r1_sum += obs.w[k] * obs.r1[k];
  }
  if (unit_entry) *unit_entry = w_sum > 0.0 ? r1_sum / w_sum : 0.0;
  const SplineFit fit = fit_penalized_spline(BSplineBasis(opt.n_knots), obs.v, obs.r2, obs.w, hp.lambda_tau);
  return {fit.spline, mean_length};
}

SphericalFramePath solve_spherical_path(const GeodesicCurvature& kg, const Rot3& frame0, std::span<const double> grid) {
  require(kg.length > 0.0, "solve_spherical_path: length must be positive");
  const ThetaFunction theta{CubicSpline::constant(kg.length), kg.kg.reparametrized(1.0, kg.length)};
  const FrenetPath p = solve_frenet_path(theta, frame0, grid);
  return {p.grid, p.frames, kg.length};
}

ArclengthCurve reconstruct_spherical_curve(const GeodesicCurvature& kg, const Rot3& frame0,
                                           std::span<const double> grid) {
  const SphericalFramePath p = solve_spherical_path(kg, frame0, grid);
  ArclengthCurve out;
  out.grid = p.grid;
  out.length = kg.length;
  for (const Rot3& q : p.frames) out.points.push_back(q.col(0));
  return out;
}

}  // namespace fsmean
