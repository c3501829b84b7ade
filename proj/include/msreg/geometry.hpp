#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "msreg/core.hpp"

namespace msreg {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Closest rotation (in Frobenius norm) to an arbitrary 3x3 matrix.
template <typename Derived>
Matrix3<typename Derived::Scalar> nearest_rotation(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Matrix3<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<Scalar> d = Matrix3<Scalar>::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1 : 1;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

template <typename Scalar>
Matrix3<Scalar> rotation_about_z(Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, Vector3<Scalar>::UnitZ()).toRotationMatrix();
}

/// Rotation + translation, p -> R p + t. R is kept orthonormal with det +1.
template <typename Scalar>
class RigidTransform {
 public:
  static constexpr Scalar kTolerance = Scalar(1e-9);

  RigidTransform() : rotation_(Matrix3<Scalar>::Identity()), translation_(Vector3<Scalar>::Zero()) {}

  RigidTransform(const Matrix3<Scalar>& rotation, const Vector3<Scalar>& translation)
      : rotation_(rotation), translation_(translation) {
    if (!is_rotation(rotation_)) {
      throw Error(ErrorKind::InvalidArgument, "rotation is not orthonormal with det +1");
    }
    if (!translation_.allFinite()) {
      throw Error(ErrorKind::InvalidArgument, "translation is not finite");
    }
  }

  static RigidTransform identity() { return RigidTransform(); }

  static RigidTransform from_matrix(const Matrix4<Scalar>& m) {
    if (!m.row(3).isApprox(Eigen::Matrix<Scalar, 1, 4>(0, 0, 0, 1), kTolerance)) {
      throw Error(ErrorKind::InvalidArgument, "bottom row of a rigid transform must be 0 0 0 1");
    }
    return RigidTransform(m.template topLeftCorner<3, 3>(), m.template topRightCorner<3, 1>());
  }

  /// exp of the twist (omega, v) using the decoupled update
  /// R = exp([omega]x), t = v, as used by Gauss-Newton increments.
  static RigidTransform from_twist(const Eigen::Matrix<Scalar, 6, 1>& xi) {
    const Vector3<Scalar> omega = xi.template head<3>();
    const Scalar angle = omega.norm();
    Matrix3<Scalar> r = Matrix3<Scalar>::Identity();
    if (angle > Scalar(0)) r = Eigen::AngleAxis<Scalar>(angle, omega / angle).toRotationMatrix();
    return RigidTransform(r, xi.template tail<3>());
  }

  static bool is_rotation(const Matrix3<Scalar>& r, Scalar tol = kTolerance) {
    if (!r.allFinite()) return false;
    const Scalar ortho = (r.transpose() * r - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(r.determinant() - Scalar(1)) <= tol;
  }

  const Matrix3<Scalar>& rotation() const { return rotation_; }
  const Vector3<Scalar>& translation() const { return translation_; }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotation_;
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  Vector3<Scalar> operator*(const Vector3<Scalar>& p) const { return rotation_ * p + translation_; }

  RigidTransform operator*(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation_ = rotation_ * rhs.rotation_;
    out.translation_ = rotation_ * rhs.translation_ + translation_;
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(rotation_.transpose() * translation_);
    return out;
  }

  template <typename Other>
  RigidTransform<Other> cast() const {
    return RigidTransform<Other>(rotation_.template cast<Other>(), translation_.template cast<Other>());
  }

  bool operator==(const RigidTransform& o) const {
    return rotation_ == o.rotation_ && translation_ == o.translation_;
  }

 private:
  Matrix3<Scalar> rotation_;
  Vector3<Scalar> translation_;
};

using RigidTransformd = RigidTransform<double>;

/// In-plane (about z) component of a rotation: the 2D Procrustes angle of its
/// upper-left 2x2 block.
template <typename Scalar>
Scalar inplane_angle(const Matrix3<Scalar>& r) {
  return std::atan2(r(1, 0) - r(0, 1), r(0, 0) + r(1, 1));
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

}  // namespace msreg

#include <span>

namespace msreg {

/// Least-squares rigid fit dst ~ R src + t (Kabsch, reflection-corrected).
/// Needs at least three non-collinear pairs.
inline RigidTransformd fit_rigid(std::span<const Eigen::Vector3d> src,
                                 std::span<const Eigen::Vector3d> dst) {
  if (src.size() != dst.size() || src.size() < 3) {
    throw Error(ErrorKind::InvalidArgument, "rigid fit needs >= 3 paired points");
  }
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(src.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) cov += (dst[i] - cd) * (src[i] - cs).transpose();
  const Eigen::Matrix3d r = nearest_rotation(cov);
  return RigidTransformd(r, cd - r * cs);
}

}  // namespace msreg
