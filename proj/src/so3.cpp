#include "fsmean/so3.hpp"

#include <cmath>
#include <numbers>

#include "fsmean/errors.hpp"

namespace fsmean {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AngleNearPi: return "AngleNearPi";
    case ErrorKind::SingularInput: return "SingularInput";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DegenerateSpeed: return "DegenerateSpeed";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::FrameDegenerate: return "FrameDegenerate";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::FoldTooSmall: return "FoldTooSmall";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

namespace {

// From the usual axis vector w, with [w]x x = w × x, to the (a, b, c) layout.
Vec3 axis_to_coords(const Vec3& w) { return {w.z(), w.x(), -w.y()}; }

constexpr double kPiGuard = 1e-6;

}  // namespace

Mat3 Skew3::matrix() const {
  const double a = coords.x(), b = coords.y(), c = coords.z();
  Mat3 m;
  m << 0.0, -a, -c,
       a, 0.0, -b,
       c, b, 0.0;
  return m;
}

Rot3 Rot3::checked(const Mat3& m, double tol) {
  Rot3 r(m);
  if (!m.allFinite() || r.orthogonality_error() > tol || std::abs(m.determinant() - 1.0) > tol)
    throw Error(ErrorKind::InvalidArgument, "matrix is not a rotation");
  return r;
}

double Rot3::orthogonality_error() const {
  return (m_.transpose() * m_ - Mat3::Identity()).norm();
}

Skew3 hat(const Vec3& v) { return Skew3{v}; }

Vec3 vee(const Skew3& s) { return s.coords; }

Skew3 skew_part(const Mat3& m) {
  const Mat3 k = 0.5 * (m - m.transpose());
  return Skew3{Vec3(k(1, 0), k(2, 1), k(2, 0))};
}

Rot3 exp_so3(const Skew3& s) {
  const double theta2 = s.coords.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = s.matrix();
  double a, b;  // sin(θ)/θ and (1 − cos θ)/θ²
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Rot3::unchecked(Mat3::Identity() + a * k + b * (k * k));
}

double rotation_angle(const Rot3& q) {
  const Mat3& m = q.matrix();
  const Vec3 w(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double s = 0.5 * w.norm();
  const double c = 0.5 * (m.trace() - 1.0);
  return std::atan2(s, c);
}

Skew3 log_so3(const Rot3& q) {
  const Mat3& m = q.matrix();
  const Vec3 w(0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1)));
  const double s = w.norm();
  const double c = 0.5 * (m.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (std::numbers::pi - theta < kPiGuard)
    throw Error(ErrorKind::AngleNearPi, "rotation angle within 1e-6 of pi");

  Vec3 axis_vec;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    axis_vec = w * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0);
  } else if (theta < 2.0) {
    axis_vec = w * (theta / s);
  } else {
    // Near pi the antisymmetric part vanishes; read the axis from the
    // symmetric part (1 − cos θ) n nᵀ and take the sign from w.
    const Mat3 sym = 0.5 * (m + m.transpose()) - c * Mat3::Identity();
    int k = 0;
    sym.diagonal().maxCoeff(&k);
    Vec3 n = sym.col(k) / std::sqrt(sym(k, k) * (1.0 - c));
    n.normalize();
    if (n.dot(w) < 0.0) n = -n;
    axis_vec = theta * n;
  }
  return Skew3{axis_to_coords(axis_vec)};
}

double geodesic_dist(const Rot3& m, const Rot3& n) {
  return std::sqrt(2.0) * log_so3(m.transpose() * n).angle();
}

Rot3 project_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (!m.allFinite() || svd.singularValues()(2) < 1e-12)
    throw Error(ErrorKind::SingularInput, "matrix is singular");
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return Rot3::unchecked(u * d * v.transpose());
}

Rot3 karcher_mean(std::span<const Rot3> rotations, double tol, int max_iter) {
  require(!rotations.empty(), "karcher_mean: empty input");
  Rot3 mean = rotations.front();
  for (int it = 0; it < max_iter; ++it) {
    Vec3 step = Vec3::Zero();
    for (const Rot3& r : rotations) step += log_so3(mean.transpose() * r).coords;
    step /= static_cast<double>(rotations.size());
    if (step.norm() <= tol) return mean;
    mean = mean * exp_so3(Skew3{step});
  }
  throw Error(ErrorKind::NoConvergence, "karcher_mean did not converge");
}

Rot3 sample_uniform_rotation(Rng& rng) {
  Eigen::Vector4d q;
  do {
    q << rng.normal(), rng.normal(), rng.normal(), rng.normal();
  } while (q.norm() < 1e-8);
  q.normalize();
  const Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));
  return Rot3::unchecked(quat.toRotationMatrix());
}

Rot3 sample_fisher_langevin(const Rot3& mean, double concentration, Rng& rng) {
  require(concentration >= 0.0, "concentration must be nonnegative");
  for (;;) {
    const Rot3 q = sample_uniform_rotation(rng);
    // tr(meanᵀ · mean q) = tr(q); envelope exp(c (tr − 3)) <= 1.
    const double log_accept = concentration * (q.matrix().trace() - 3.0);
    if (std::log(rng.uniform()) < log_accept) return mean * q;
  }
}

}  // namespace fsmean
