#include "fsmean/metrics.hpp"

#include <cmath>

#include "fsmean/errors.hpp"
#include "fsmean/interp.hpp"

namespace fsmean {

double l2_sq_distance(std::span<const double> grid, std::span<const double> f, std::span<const double> g) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw Error(ErrorKind::GridMismatch, "l2_sq_distance: functions are not on the same grid");
  std::vector<double> d(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) d[j] = (f[j] - g[j]) * (f[j] - g[j]);
  return trapezoid(grid, d);
}

double l2_sq_distance(std::span<const double> grid_f, std::span<const double> f, std::span<const double> grid_g,
                      std::span<const double> g) {
  if (g.size() != grid_g.size() || grid_g.size() < 2)
    throw Error(ErrorKind::GridMismatch, "l2_sq_distance: values do not match their grid");
  const MonotoneInterpolant interp(grid_g, g);
  std::vector<double> moved(grid_f.size());
  for (std::size_t j = 0; j < grid_f.size(); ++j) moved[j] = interp(grid_f[j]);
  return l2_sq_distance(grid_f, f, moved);
}

double d_norm(std::span<const Vec3> points) {
  double d = 0.0;
  for (const Vec3& p : points) d += std::abs(p.squaredNorm() - 1.0);
  return d;
}

RepetitionStats repetition_stats(std::span<const double> values) {
  require(!values.empty(), "repetition_stats: no values");
  RepetitionStats r;
  r.count = values.size();
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

RepetitionStats ErrorReport::stats(const std::string& metric) const {
  const auto it = values.find(metric);
  require(it != values.end(), "ErrorReport: unknown metric " + metric);
  return repetition_stats(it->second);
}

}  // namespace fsmean
