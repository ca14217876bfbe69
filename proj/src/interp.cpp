#include "fsmean/interp.hpp"

#include <algorithm>
#include <cmath>

#include "fsmean/errors.hpp"

namespace fsmean {

namespace {

// Derivative at x[at] of the cubic through four consecutive points.
double lagrange4_slope(const double* x, const double* y, int at) {
  double d = 0.0;
  for (int k = 0; k < 4; ++k) {
    double lk;
    if (k == at) {
      lk = 0.0;
      for (int m = 0; m < 4; ++m)
        if (m != k) lk += 1.0 / (x[k] - x[m]);
    } else {
      double num = 1.0, den = 1.0;
      for (int m = 0; m < 4; ++m) {
        if (m == k) continue;
        den *= x[k] - x[m];
        if (m != at) num *= x[at] - x[m];
      }
      lk = num / den;
    }
    d += y[k] * lk;
  }
  return d;
}

}  // namespace

CubicInterpolant::CubicInterpolant(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()), m_(x.size(), 0.0) {
  const std::size_t n = x_.size();
  require(n >= 2 && y_.size() == n, "CubicInterpolant: need >= 2 matching points");
  for (std::size_t i = 1; i < n; ++i) require(x_[i] > x_[i - 1], "CubicInterpolant: x not increasing");
  if (n == 2) return;

  // Clamped end conditions with slopes from the end cubics (natural for n = 3).
  const bool clamped = n >= 4;
  std::vector<double> sub(n, 0.0), diag(n, 0.0), sup(n, 0.0), rhs(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
    sub[i] = h0;
    diag[i] = 2.0 * (h0 + h1);
    sup[i] = h1;
    rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  if (clamped) {
    const double d0 = lagrange4_slope(x_.data(), y_.data(), 0);
    const double dn = lagrange4_slope(x_.data() + n - 4, y_.data() + n - 4, 3);
    const double h0 = x_[1] - x_[0], hn = x_[n - 1] - x_[n - 2];
    diag[0] = 2.0 * h0;
    sup[0] = h0;
    rhs[0] = 6.0 * ((y_[1] - y_[0]) / h0 - d0);
    sub[n - 1] = hn;
    diag[n - 1] = 2.0 * hn;
    rhs[n - 1] = 6.0 * (dn - (y_[n - 1] - y_[n - 2]) / hn);
  } else {
    diag[0] = diag[n - 1] = 1.0;
  }
  // Thomas algorithm.
  for (std::size_t i = 1; i < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
}

std::size_t CubicInterpolant::segment(double t) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), t);
  std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(i, x_.size() - 2);
}

double CubicInterpolant::operator()(double t) const {
  const std::size_t i = segment(t);
  const double h = x_[i + 1] - x_[i];
  const double a = x_[i + 1] - t, b = t - x_[i];
  return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) +
         (y_[i] / h - m_[i] * h / 6.0) * a + (y_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
}

double CubicInterpolant::derivative(double t) const {
  const std::size_t i = segment(t);
  const double h = x_[i + 1] - x_[i];
  const double a = x_[i + 1] - t, b = t - x_[i];
  return -m_[i] * a * a / (2.0 * h) + m_[i + 1] * b * b / (2.0 * h) - (y_[i] / h - m_[i] * h / 6.0) +
         (y_[i + 1] / h - m_[i + 1] * h / 6.0);
}

double interp_linear(std::span<const double> x, std::span<const double> y, double t) {
  if (t <= x.front()) return y.front();
  if (t >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
  const double w = (t - x[i]) / (x[i + 1] - x[i]);
  return (1.0 - w) * y[i] + w * y[i + 1];
}

MonotoneInterpolant::MonotoneInterpolant(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()), d_(x.size(), 0.0) {
  const std::size_t n = x_.size();
  require(n >= 2 && y_.size() == n, "MonotoneInterpolant: need >= 2 matching points");
  for (std::size_t i = 1; i < n; ++i) require(x_[i] > x_[i - 1], "MonotoneInterpolant: x not increasing");
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    delta[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  if (n == 2) {
    d_[0] = d_[1] = delta[0];
    return;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d_[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return d;
  };
  d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

double MonotoneInterpolant::operator()(double t) const {
  if (t <= x_.front()) return y_.front();
  if (t >= x_.back()) return y_.back();
  const auto it = std::upper_bound(x_.begin(), x_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  const double h = x_[i + 1] - x_[i], u = (t - x_[i]) / h;
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

std::vector<double> resample(std::span<const double> fx, std::span<const double> fy,
                             std::span<const double> at) {
  const CubicInterpolant f(fx, fy);
  std::vector<double> out(at.size());
  for (std::size_t k = 0; k < at.size(); ++k) out[k] = f(at[k]);
  return out;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = a;
    return g;
  }
  for (std::size_t k = 0; k < n; ++k) g[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
  g.back() = b;
  return g;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) s += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return s;
}

}  // namespace fsmean
