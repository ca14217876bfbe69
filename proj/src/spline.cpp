#include "fsmean/spline.hpp"

#include <algorithm>
#include <cmath>

#include "fsmean/errors.hpp"

namespace fsmean {

namespace {
constexpr int kDegree = 3;
}

BSplineBasis::BSplineBasis(int n_interior, double lo, double hi) : n_interior_(n_interior), lo_(lo), hi_(hi) {
  require(n_interior >= 0 && hi > lo, "BSplineBasis: invalid domain");
  knots_.assign(kDegree + 1, lo);
  for (int k = 1; k <= n_interior; ++k)
    knots_.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_interior + 1));
  knots_.insert(knots_.end(), kDegree + 1, hi);
}

int BSplineBasis::find_span(double x) const {
  // Uniform interior knots: the span follows from arithmetic.
  const int n_spans = n_interior_ + 1;
  int k = static_cast<int>(std::floor((x - lo_) / (hi_ - lo_) * n_spans));
  k = std::clamp(k, 0, n_spans - 1);
  return k + kDegree;
}

int BSplineBasis::eval(double x, int deriv, std::array<double, 4>& out) const {
  x = std::clamp(x, lo_, hi_);
  const int span = find_span(x);
  const auto& u = knots_;
  // Cox-de Boor table with derivatives.
  double ndu[4][4];
  double left[4], right[4];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= kDegree; ++j) {
    left[j] = x - u[span + 1 - j];
    right[j] = u[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  if (deriv == 0) {
    for (int j = 0; j <= kDegree; ++j) out[j] = ndu[j][kDegree];
    return span - kDegree;
  }
  double a[2][4];
  for (int r = 0; r <= kDegree; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    double value = 0.0;
    for (int k = 1; k <= deriv; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = kDegree - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : kDegree - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      value = d;
      std::swap(s1, s2);
    }
    double factor = 1.0;
    for (int k = 0; k < deriv; ++k) factor *= kDegree - k;
    out[r] = value * factor;
  }
  return span - kDegree;
}

Eigen::MatrixXd BSplineBasis::penalty() const {
  const int n = size();
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(n, n);
  // Second derivatives are linear on each span: 2-point Gauss is exact.
  const double g = 1.0 / std::sqrt(3.0);
  const int n_spans = n_interior_ + 1;
  std::array<double, 4> b{};
  for (int s = 0; s < n_spans; ++s) {
    const double a0 = knots_[s + kDegree], a1 = knots_[s + kDegree + 1];
    const double mid = 0.5 * (a0 + a1), half = 0.5 * (a1 - a0);
    for (double node : {-g, g}) {
      const int first = eval(mid + half * node, 2, b);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) omega(first + i, first + j) += half * b[i] * b[j];
    }
  }
  return omega;
}

Eigen::VectorXd BSplineBasis::greville() const {
  const int n = size();
  Eigen::VectorXd g(n);
  for (int j = 0; j < n; ++j) g(j) = (knots_[j + 1] + knots_[j + 2] + knots_[j + 3]) / 3.0;
  return g;
}

BSplineBasis BSplineBasis::scaled(double factor) const {
  return BSplineBasis(n_interior_, lo_ * factor, hi_ * factor);
}

CubicSpline::CubicSpline(BSplineBasis basis, Eigen::VectorXd coef) : basis_(std::move(basis)), coef_(std::move(coef)) {
  require(coef_.size() == basis_.size(), "CubicSpline: coefficient count mismatch");
}

CubicSpline CubicSpline::constant(double value, int n_interior, double lo, double hi) {
  BSplineBasis b(n_interior, lo, hi);
  return CubicSpline(b, Eigen::VectorXd::Constant(b.size(), value));
}

double CubicSpline::derivative(double x, int order) const {
  std::array<double, 4> b{};
  const int first = basis_.eval(x, order, b);
  double v = 0.0;
  for (int i = 0; i < 4; ++i) v += coef_(first + i) * b[i];
  return v;
}

double CubicSpline::roughness() const { return coef_.dot(basis_.penalty() * coef_); }

CubicSpline CubicSpline::reparametrized(double factor, double scale) const {
  return CubicSpline(basis_.scaled(1.0 / factor), coef_ * scale);
}

SplineFit fit_penalized_spline(const BSplineBasis& basis, std::span<const double> x, std::span<const double> y,
                               std::span<const double> w, double lambda) {
  require(x.size() == y.size() && x.size() == w.size(), "fit_penalized_spline: size mismatch");
  require(lambda >= 0.0, "fit_penalized_spline: negative lambda");
  const int n = basis.size();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  double wsum = 0.0;
  std::array<double, 4> b{};
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (w[k] <= 0.0) continue;
    const int first = basis.eval(x[k], 0, b);
    for (int i = 0; i < 4; ++i) {
      rhs(first + i) += w[k] * b[i] * y[k];
      for (int j = 0; j < 4; ++j) gram(first + i, first + j) += w[k] * b[i] * b[j];
    }
    wsum += w[k];
  }
  if (wsum <= 0.0) throw Error(ErrorKind::RankDeficient, "no positive weights");
  gram /= wsum;
  rhs /= wsum;
  const double lam = lambda / wsum;

  // Orthonormal split of coefficient space: null space of the penalty
  // (constants and linears) and its complement.
  Eigen::MatrixXd lin(n, 2);
  lin.col(0).setOnes();
  lin.col(1) = basis.greville();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(lin);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd nul = q.leftCols(2);
  const Eigen::MatrixXd comp = q.rightCols(n - 2);
  const Eigen::MatrixXd omega = basis.penalty();

  const Eigen::MatrixXd m = comp.transpose() * gram * comp + lam * (comp.transpose() * omega * comp);
  const Eigen::MatrixXd cross = comp.transpose() * gram * nul;  // (n-2) x 2
  Eigen::LDLT<Eigen::MatrixXd> m_ldlt(m);
  const Eigen::VectorXd d = m_ldlt.vectorD();
  if (m_ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-14 * std::max(d.maxCoeff(), 1e-300))
    throw Error(ErrorKind::RankDeficient, "penalized normal system is singular");

  const Eigen::VectorXd rhs_c = comp.transpose() * rhs;
  const Eigen::MatrixXd minv_cross = m_ldlt.solve(cross);
  const Eigen::VectorXd minv_rhs = m_ldlt.solve(rhs_c);
  const Eigen::Matrix2d schur = nul.transpose() * gram * nul - cross.transpose() * minv_cross;
  const Eigen::Vector2d rhs_n = nul.transpose() * rhs - cross.transpose() * minv_rhs;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(schur);
  const auto ev = es.eigenvalues();
  if (ev(0) <= 1e-13 * std::max(std::abs(ev(1)), 1e-300))
    throw Error(ErrorKind::RankDeficient, "data do not determine the linear part");
  const Eigen::Vector2d a = schur.ldlt().solve(rhs_n);
  const Eigen::VectorXd yc = minv_rhs - minv_cross * a;
  Eigen::VectorXd coef = nul * a + comp * yc;

  SplineFit fit{CubicSpline(basis, coef), 0.0};
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (w[k] <= 0.0) continue;
    const double r = fit.spline(x[k]) - y[k];
    fit.weighted_rss += w[k] * r * r;
  }
  return fit;
}

CubicSpline spline_from_samples(std::span<const double> x, std::span<const double> y, int n_interior, double lambda) {
  require(x.size() >= 2, "spline_from_samples: need samples");
  const BSplineBasis basis(n_interior, x.front(), x.back());
  const std::vector<double> w(x.size(), 1.0 / static_cast<double>(x.size()));
  return fit_penalized_spline(basis, x, y, w, lambda).spline;
}

}  // namespace fsmean
