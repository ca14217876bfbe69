#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "fsmean/rng.hpp"

namespace fsmean {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Skew-symmetric 3x3 matrix stored by its coordinates (a, b, c):
///
///     [ 0  -a  -c ]
///     [ a   0  -b ]
///     [ c   b   0 ]
///
/// With this layout the Frenet generator for curvature k and torsion t is
/// Skew3{(k, t, 0)}, and the third coordinate is the slot that exact Frenet
/// data leaves at zero.
struct Skew3 {
  Vec3 coords = Vec3::Zero();

  Mat3 matrix() const;
  /// Angle of the rotation exp(*this); equals the Euclidean norm of coords.
  double angle() const { return coords.norm(); }

  Skew3 operator*(double s) const { return {coords * s}; }
  Skew3 operator+(const Skew3& o) const { return {coords + o.coords}; }
  Skew3 operator-(const Skew3& o) const { return {coords - o.coords}; }
};

/// Rotation matrix. Construct through identity(), exp_so3(), project_so3()
/// or checked(); the invariant QᵀQ = I, det Q = 1 then holds to 1e-9.
class Rot3 {
 public:
  Rot3() : m_(Mat3::Identity()) {}

  static Rot3 identity() { return Rot3(); }
  /// Validates the SO(3) invariants and throws InvalidArgument otherwise.
  static Rot3 checked(const Mat3& m, double tol = 1e-9);
  /// Trusted constructor for matrices that are rotations by construction.
  static Rot3 unchecked(const Mat3& m) { return Rot3(m); }

  const Mat3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }
  Vec3 col(int c) const { return m_.col(c); }

  Rot3 transpose() const { return Rot3(m_.transpose()); }
  Rot3 operator*(const Rot3& o) const { return Rot3(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// ‖QᵀQ − I‖_F.
  double orthogonality_error() const;

 private:
  explicit Rot3(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

Skew3 hat(const Vec3& v);
Vec3 vee(const Skew3& s);
/// Reads the coordinates of an arbitrary 3x3 matrix's skew part.
Skew3 skew_part(const Mat3& m);

/// Rodrigues closed form.
Rot3 exp_so3(const Skew3& s);

/// Principal logarithm. Throws AngleNearPi when the rotation angle is within
/// 1e-6 of pi.
Skew3 log_so3(const Rot3& q);

/// Rotation angle in [0, pi], computed without the branch check.
double rotation_angle(const Rot3& q);

/// ‖log(MᵀN)‖_F = √2 · angle(MᵀN).
double geodesic_dist(const Rot3& m, const Rot3& n);

/// Nearest rotation in Frobenius norm (polar factor with determinant
/// correction). Throws SingularInput if the smallest singular value < 1e-12.
Rot3 project_so3(const Mat3& m);

/// Intrinsic (Karcher) mean by the log-mean fixed-point iteration.
/// Throws NoConvergence after max_iter iterations.
Rot3 karcher_mean(std::span<const Rot3> rotations, double tol = 1e-12, int max_iter = 100);

/// Haar-uniform rotation.
Rot3 sample_uniform_rotation(Rng& rng);

/// Matrix Fisher (Langevin) distribution with density proportional to
/// exp(concentration · tr(meanᵀQ)), by rejection from the Haar measure.
Rot3 sample_fisher_langevin(const Rot3& mean, double concentration, Rng& rng);

}  // namespace fsmean
