#pragma once

// Quaternion arithmetic and Riemannian geometry of the unit 3-sphere.
//
// All functions are pure. Distances are quaternion-space geodesic distances
// (half the rotation angle), in [0, pi].

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "se3ds/errors.hpp"
#include "se3ds/quaternion.hpp"

namespace se3ds {

namespace manifold_constants {
/// log and transport refuse points closer than this to the antipode.
inline constexpr double kAntipodalMargin = 1e-6;
/// Below this norm a tangent vector or vector part is treated as zero.
inline constexpr double kSmallAngle = 1e-12;
inline constexpr int kFrechetMaxIterations = 100;
inline constexpr double kFrechetTolerance = 1e-10;
}  // namespace manifold_constants

[[nodiscard]] inline UnitQuaternion conjugate(const UnitQuaternion& q) {
  return {q.w(), -q.x(), -q.y(), -q.z()};
}

[[nodiscard]] inline UnitQuaternion hamilton_product(const UnitQuaternion& a,
                                                     const UnitQuaternion& b) {
  const double aw = a.w(), ax = a.x(), ay = a.y(), az = a.z();
  const double bw = b.w(), bx = b.x(), by = b.y(), bz = b.z();
  return {aw * bw - ax * bx - ay * by - az * bz,
          aw * bx + ax * bw + ay * bz - az * by,
          aw * by - ax * bz + ay * bw + az * bx,
          aw * bz + ax * by - ay * bx + az * bw};
}

[[nodiscard]] inline UnitQuaternion operator*(const UnitQuaternion& a,
                                              const UnitQuaternion& b) {
  return hamilton_product(a, b);
}

/// d(p, q) = arccos(p.q), evaluated as atan2(|q - (p.q)p|, p.q) which is the
/// same angle for unit vectors and stays accurate near 0 and pi.
[[nodiscard]] inline double geodesic_distance(const UnitQuaternion& p,
                                              const UnitQuaternion& q) {
  const double c = std::clamp(p.dot(q), -1.0, 1.0);
  const double s = (q.coeffs() - c * p.coeffs()).norm();
  return std::atan2(s, c);
}

/// Rotation-level distance: geodesic distance to the nearer of q, -q.
[[nodiscard]] inline double rotation_distance(const UnitQuaternion& p,
                                              const UnitQuaternion& q) {
  return p.dot(q) >= 0.0 ? geodesic_distance(p, q) : geodesic_distance(p, -q);
}

/// q or -q, whichever lies in the closed hemisphere centred at `ref`.
[[nodiscard]] inline UnitQuaternion align_hemisphere(const UnitQuaternion& q,
                                                     const UnitQuaternion& ref) {
  return q.dot(ref) < 0.0 ? -q : q;
}

[[nodiscard]] inline TangentVector log_map(const UnitQuaternion& p,
                                           const UnitQuaternion& q) {
  using namespace manifold_constants;
  const double c = std::clamp(p.dot(q), -1.0, 1.0);
  const Vec4 u = q.coeffs() - c * p.coeffs();
  const double s = u.norm();
  const double d = std::atan2(s, c);
  if (d > std::numbers::pi - kAntipodalMargin) {
    throw AntipodalError("log map undefined: points are antipodal (d = " +
                         std::to_string(d) + ")");
  }
  if (s < kSmallAngle) return {p, Vec4::Zero()};
  return TangentVector::projected(p, (d / s) * u);
}

[[nodiscard]] inline UnitQuaternion exp_map(const TangentVector& t) {
  const double n = t.v.norm();
  if (n < manifold_constants::kSmallAngle) return t.base;
  return UnitQuaternion(std::cos(n) * t.base.coeffs() +
                        (std::sin(n) / n) * t.v);
}

/// Transports `t` from its base point to `dest` along the connecting
/// geodesic.
[[nodiscard]] inline TangentVector parallel_transport(
    const TangentVector& t, const UnitQuaternion& dest) {
  const TangentVector forward = log_map(t.base, dest);
  const double d2 = forward.v.squaredNorm();
  if (d2 < manifold_constants::kSmallAngle * manifold_constants::kSmallAngle) {
    return TangentVector::projected(dest, t.v);
  }
  const TangentVector backward = log_map(dest, t.base);
  const Vec4 moved =
      t.v - (forward.v.dot(t.v) / d2) * (forward.v + backward.v);
  return TangentVector::projected(dest, moved);
}

/// Orthonormal basis of T_p S^3 given by the columns p*i, p*j, p*k.
[[nodiscard]] inline Eigen::Matrix<double, 4, 3> tangent_basis(
    const UnitQuaternion& p) {
  Eigen::Matrix<double, 4, 3> b;
  b.col(0) = (p * UnitQuaternion(0, 1, 0, 0)).coeffs();
  b.col(1) = (p * UnitQuaternion(0, 0, 1, 0)).coeffs();
  b.col(2) = (p * UnitQuaternion(0, 0, 0, 1)).coeffs();
  return b;
}

/// Makes consecutive quaternions of a trajectory lie in the same hemisphere.
/// The first element gets w >= 0 (ties broken on x, then y, then z).
[[nodiscard]] inline std::vector<UnitQuaternion> canonicalize_signs(
    std::span<const UnitQuaternion> trajectory) {
  std::vector<UnitQuaternion> out;
  out.reserve(trajectory.size());
  if (trajectory.empty()) return out;

  UnitQuaternion first = trajectory.front();
  for (int i = 0; i < 4; ++i) {
    const double c = first.coeffs()[i];
    if (c > 0.0) break;
    if (c < 0.0) {
      first = -first;
      break;
    }
  }
  out.push_back(first);
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    out.push_back(align_hemisphere(trajectory[i], out.back()));
  }
  return out;
}

/// Karcher iteration for the Frechet mean. Inputs are aligned to the
/// hemisphere of the first element; the mean starts at their normalized
/// Euclidean average.
[[nodiscard]] inline UnitQuaternion frechet_mean(
    std::span<const UnitQuaternion> qs) {
  using namespace manifold_constants;
  if (qs.empty()) throw InsufficientData("frechet_mean of empty set");

  std::vector<UnitQuaternion> aligned;
  aligned.reserve(qs.size());
  Vec4 sum = Vec4::Zero();
  for (const auto& q : qs) {
    aligned.push_back(align_hemisphere(q, qs.front()));
    sum += aligned.back().coeffs();
  }
  UnitQuaternion mean = sum.norm() > 0.0 ? UnitQuaternion(sum) : qs.front();

  double step_norm = 0.0;
  for (int it = 0; it < kFrechetMaxIterations; ++it) {
    Vec4 step = Vec4::Zero();
    for (const auto& q : aligned) step += log_map(mean, q).v;
    step /= static_cast<double>(aligned.size());
    step_norm = step.norm();
    if (step_norm < 1e-3 * kFrechetTolerance) return mean;
    mean = exp_map({mean, step});
  }
  // Re-evaluate the stationarity residual at the final iterate.
  Vec4 residual = Vec4::Zero();
  for (const auto& q : aligned) residual += log_map(mean, q).v;
  residual /= static_cast<double>(aligned.size());
  if (residual.norm() < kFrechetTolerance) return mean;
  throw NoConvergence("frechet_mean did not converge in " +
                      std::to_string(kFrechetMaxIterations) +
                      " iterations (residual " +
                      std::to_string(residual.norm()) + ")");
}

/// (1/(N-1)) sum log_mean(q_i) log_mean(q_i)^T. Rank <= 3.
[[nodiscard]] inline Mat4 tangent_covariance(std::span<const UnitQuaternion> qs,
                                             const UnitQuaternion& mean) {
  if (qs.size() < 2) {
    throw InsufficientData("tangent_covariance needs at least 2 points");
  }
  Mat4 cov = Mat4::Zero();
  for (const auto& q : qs) {
    const Vec4 l = log_map(mean, q).v;
    cov.noalias() += l * l.transpose();
  }
  return cov / static_cast<double>(qs.size() - 1);
}

/// Body-frame angular velocity carrying q1 onto q2 in time dt.
[[nodiscard]] inline AngularVelocity displacement_to_angular_velocity(
    const UnitQuaternion& q1, const UnitQuaternion& q2, double dt) {
  const UnitQuaternion dq = conjugate(q1) * q2;
  const Vec3 v = dq.vec();
  const double n = v.norm();
  if (n < manifold_constants::kSmallAngle) return {};
  // 2 atan2(|v|, w) == 2 arccos(w) on S^3.
  const double angle = 2.0 * std::atan2(n, dq.w());
  return AngularVelocity((angle / (dt * n)) * v);
}

/// Quaternion of the rotation |w| dt about w / |w|.
[[nodiscard]] inline UnitQuaternion angular_velocity_to_increment(
    const AngularVelocity& w, double dt) {
  const double rate = w.body.norm();
  if (rate < manifold_constants::kSmallAngle) return UnitQuaternion::identity();
  return UnitQuaternion::from_axis_angle(w.body, rate * dt);
}

}  // namespace se3ds
