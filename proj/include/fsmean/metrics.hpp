#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fsmean/frenet.hpp"

namespace fsmean {

/// ∫ (f − g)² over the grid by the trapezoid rule. Throws GridMismatch when
/// the sizes differ.
double l2_sq_distance(std::span<const double> grid, std::span<const double> f, std::span<const double> g);

/// g given on grid_g, resampled onto grid_f by monotone interpolation first.
double l2_sq_distance(std::span<const double> grid_f, std::span<const double> f, std::span<const double> grid_g,
                      std::span<const double> g);

/// Σ_j |⟨X(s_j), X(s_j)⟩ − 1|.
double d_norm(std::span<const Vec3> points);
inline double d_norm(const ArclengthCurve& curve) { return d_norm(curve.points); }

struct RepetitionStats {
  double mean = 0.0;
  /// Sample standard deviation (n − 1 denominator); 0 for one value.
  double std = 0.0;
  std::size_t count = 0;
};

RepetitionStats repetition_stats(std::span<const double> values);

/// Per-metric values over repetitions, keyed by metric name.
struct ErrorReport {
  std::map<std::string, std::vector<double>> values;

  void add(const std::string& metric, double value) { values[metric].push_back(value); }
  RepetitionStats stats(const std::string& metric) const;
};

}  // namespace fsmean
