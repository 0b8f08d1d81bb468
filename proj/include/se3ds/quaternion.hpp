#pragma once

#include <Eigen/Core>
#include <cmath>

namespace se3ds {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/**
 * Unit quaternion q = w + x i + y j + z k stored w-first.
 *
 * Every constructor renormalizes, so a UnitQuaternion always lies on S^3 to
 * machine precision. q and -q are distinct points of S^3 but the same
 * rotation; callers that care about rotations use same_rotation() or align
 * signs explicitly.
 */
class UnitQuaternion {
 public:
  UnitQuaternion() : coeffs_(1.0, 0.0, 0.0, 0.0) {}

  UnitQuaternion(double w, double x, double y, double z)
      : UnitQuaternion(Vec4(w, x, y, z)) {}

  /// Normalizes the given w-first 4-vector. A zero vector yields identity.
  explicit UnitQuaternion(const Vec4& wxyz) : coeffs_(wxyz) {
    const double n = coeffs_.norm();
    if (n > 0.0 && std::isfinite(n)) {
      coeffs_ /= n;
    } else {
      coeffs_ = Vec4(1.0, 0.0, 0.0, 0.0);
    }
  }

  [[nodiscard]] static UnitQuaternion identity() { return {}; }

  /// Keeps `wxyz` bit-for-bit when its norm is within 1e-12 of 1, so
  /// serialized quaternions reload unchanged. Otherwise normalizes.
  [[nodiscard]] static UnitQuaternion from_unit(const Vec4& wxyz) {
    if (std::abs(wxyz.norm() - 1.0) <= 1e-12) {
      UnitQuaternion r;
      r.coeffs_ = wxyz;
      return r;
    }
    return UnitQuaternion(wxyz);
  }

  /// Rotation of `angle` radians about `axis` (need not be unit length).
  [[nodiscard]] static UnitQuaternion from_axis_angle(const Vec3& axis,
                                                      double angle) {
    const double n = axis.norm();
    if (n < 1e-300) return identity();
    const Vec3 u = axis / n;
    const double s = std::sin(0.5 * angle);
    return UnitQuaternion(std::cos(0.5 * angle), s * u.x(), s * u.y(),
                          s * u.z());
  }

  [[nodiscard]] double w() const { return coeffs_[0]; }
  [[nodiscard]] double x() const { return coeffs_[1]; }
  [[nodiscard]] double y() const { return coeffs_[2]; }
  [[nodiscard]] double z() const { return coeffs_[3]; }

  [[nodiscard]] const Vec4& coeffs() const { return coeffs_; }
  [[nodiscard]] Vec3 vec() const { return coeffs_.tail<3>(); }

  [[nodiscard]] double dot(const UnitQuaternion& other) const {
    return coeffs_.dot(other.coeffs_);
  }

  [[nodiscard]] UnitQuaternion operator-() const {
    UnitQuaternion r;
    r.coeffs_ = -coeffs_;
    return r;
  }

  /// Equality as rotations (double cover aware).
  [[nodiscard]] bool same_rotation(const UnitQuaternion& other,
                                   double tol = 1e-9) const {
    return std::abs(dot(other)) > 1.0 - tol;
  }

  /// Rotation matrix acting on body-frame vectors.
  [[nodiscard]] Mat3 to_rotation_matrix() const {
    const double w = coeffs_[0], x = coeffs_[1], y = coeffs_[2],
                 z = coeffs_[3];
    Mat3 r;
    // clang-format off
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y);
    // clang-format on
    return r;
  }

 private:
  Vec4 coeffs_;
};

/// Vector in the tangent space T_base S^3. `v` is orthogonal to base.
struct TangentVector {
  UnitQuaternion base;
  Vec4 v = Vec4::Zero();

  TangentVector() = default;
  TangentVector(const UnitQuaternion& b, const Vec4& vec) : base(b), v(vec) {}

  /// Removes the component of `vec` along `b`.
  [[nodiscard]] static TangentVector projected(const UnitQuaternion& b,
                                               const Vec4& vec) {
    return {b, vec - b.coeffs().dot(vec) * b.coeffs()};
  }

  [[nodiscard]] double norm() const { return v.norm(); }
};

/// Angular velocity in rad/s, always expressed in the body frame.
struct AngularVelocity {
  Vec3 body = Vec3::Zero();

  AngularVelocity() = default;
  explicit AngularVelocity(const Vec3& w) : body(w) {}
  AngularVelocity(double wx, double wy, double wz) : body(wx, wy, wz) {}

  [[nodiscard]] double wx() const { return body.x(); }
  [[nodiscard]] double wy() const { return body.y(); }
  [[nodiscard]] double wz() const { return body.z(); }
};

}  // namespace se3ds
