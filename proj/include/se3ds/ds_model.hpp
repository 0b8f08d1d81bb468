#pragma once

// Pose dynamical system: a discrete orientation policy in the tangent space
// of the attractor and a continuous position LPV-DS, blended by one mixture.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "se3ds/dataset.hpp"
#include "se3ds/errors.hpp"
#include "se3ds/manifold.hpp"
#include "se3ds/mixture.hpp"

namespace se3ds {

struct LearnOptions {
  int max_iterations = 5000;
  /// Definiteness margin: symmetric parts of every A stay below -epsilon.
  double epsilon = 1e-4;
  double relative_tolerance = 1e-8;
};

/// Learned pose policy. Immutable after learn(); safe to share across
/// threads.
struct Se3Policy {
  MixtureModel mixture;
  std::vector<Mat4> A_ori;  ///< discrete maps on T_{q_att} S^3
  std::vector<Mat3> A_pos;  ///< continuous maps, b_k = -A_k xi*
  Vec3 attractor_pos = Vec3::Zero();
  UnitQuaternion attractor_ori;
  double dt = 0.01;

  double epsilon = 1e-4;
  double residual_ori = 0.0;  ///< mean squared training error
  double residual_pos = 0.0;
  bool converged = true;  ///< false when the optimizer hit its budget

  [[nodiscard]] std::size_t size() const { return A_ori.size(); }
  [[nodiscard]] Vec3 b_pos(std::size_t k) const {
    return -A_pos.at(k) * attractor_pos;
  }
};

/// Largest eigenvalue of (A + A^T) / 2.
template <typename Derived>
[[nodiscard]] double max_symmetric_eigenvalue(
    const Eigen::MatrixBase<Derived>& a) {
  const Eigen::MatrixXd s = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s,
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// Throws ValidationError unless every linear map is negative definite with
/// margin epsilon and the shapes agree with the mixture.
inline void validate_policy(const Se3Policy& policy) {
  const std::size_t k = policy.mixture.size();
  if (policy.A_ori.size() != k || policy.A_pos.size() != k) {
    throw ValidationError("policy has " + std::to_string(policy.A_ori.size()) +
                          "/" + std::to_string(policy.A_pos.size()) +
                          " linear maps for " + std::to_string(k) +
                          " components");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!(max_symmetric_eigenvalue(policy.A_ori[i]) < -policy.epsilon)) {
      throw ValidationError("A_ori[" + std::to_string(i) +
                            "] is not negative definite");
    }
    if (!(max_symmetric_eigenvalue(policy.A_pos[i]) < -policy.epsilon)) {
      throw ValidationError("A_pos[" + std::to_string(i) +
                            "] is not negative definite");
    }
  }
  if (!(policy.dt > 0.0)) throw ValidationError("policy dt must be positive");
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Turns demonstrations into attractor-tangent regression data.
///
/// Orientation: feature log_{q_att}(q_i); target is the one-step body-frame
/// displacement log_{q_i}(q_i * exp(w_i dt)) transported to q_att. The last
/// sample of each demo has a zero target. Position: velocities by central
/// differences on the recorded timestamps (one-sided at the ends).
/// The attractor is the mean final pose unless `attractor` is given.
[[nodiscard]] inline PreprocessedDataset preprocess(
    std::span<const Demonstration> demos,
    const std::optional<AttractorPose>& attractor = std::nullopt) {
  if (demos.empty()) throw InsufficientData("preprocess needs a demonstration");

  std::vector<std::vector<UnitQuaternion>> quats;
  quats.reserve(demos.size());
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const auto& s = demos[d].samples;
    if (s.size() < 3) {
      throw TooShort("demonstration " + std::to_string(d) + " has " +
                     std::to_string(s.size()) + " samples (need 3)");
    }
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (!(s[i].t > s[i - 1].t)) {
        throw ValidationError("timestamps of demonstration " +
                              std::to_string(d) + " are not increasing");
      }
    }
    std::vector<UnitQuaternion> q;
    q.reserve(s.size());
    for (const auto& sample : s) q.push_back(sample.q);
    quats.push_back(canonicalize_signs(q));
  }

  // Put every demo's end in the hemisphere of the reference end.
  const UnitQuaternion ref =
      attractor ? attractor->orientation : quats.front().back();
  std::vector<UnitQuaternion> finals;
  Vec3 final_pos = Vec3::Zero();
  for (std::size_t d = 0; d < demos.size(); ++d) {
    if (quats[d].back().dot(ref) < 0.0) {
      for (auto& q : quats[d]) q = -q;
    }
    finals.push_back(quats[d].back());
    final_pos += demos[d].samples.back().p;
  }

  PreprocessedDataset out;
  if (attractor) {
    out.attractor_ori = attractor->orientation;
    out.attractor_pos = attractor->position;
  } else {
    out.attractor_ori = frechet_mean(finals);
    out.attractor_pos = final_pos / static_cast<double>(demos.size());
  }
  out.dt = demos.front().dt;
  if (!(out.dt > 0.0)) {
    const auto& s = demos.front().samples;
    out.dt = (s.back().t - s.front().t) / static_cast<double>(s.size() - 1);
  }

  for (std::size_t d = 0; d < demos.size(); ++d) {
    const auto& s = demos[d].samples;
    const auto& q = quats[d];
    const std::size_t n = s.size();
    for (std::size_t i = 0; i < n; ++i) {
      out.positions.push_back(s[i].p);
      if (i == 0) {
        out.velocities.push_back((s[1].p - s[0].p) / (s[1].t - s[0].t));
      } else if (i + 1 == n) {
        out.velocities.push_back((s[i].p - s[i - 1].p) /
                                 (s[i].t - s[i - 1].t));
      } else {
        out.velocities.push_back((s[i + 1].p - s[i - 1].p) /
                                 (s[i + 1].t - s[i - 1].t));
      }

      out.orientations.push_back(q[i]);
      out.features.push_back(log_map(out.attractor_ori, q[i]).v);
      if (i + 1 == n) {
        out.targets.push_back(Vec4::Zero());
      } else {
        const double step = s[i + 1].t - s[i].t;
        const AngularVelocity w =
            displacement_to_angular_velocity(q[i], q[i + 1], step);
        const UnitQuaternion desired =
            q[i] * angular_velocity_to_increment(w, step);
        const TangentVector body = log_map(q[i], desired);
        out.targets.push_back(parallel_transport(body, out.attractor_ori).v);
      }
      out.demo_index.push_back(d);
      out.progress.push_back(static_cast<double>(i) /
                             static_cast<double>(n - 1));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Learning
// ---------------------------------------------------------------------------

namespace detail {

/// Sufficient statistics of sum_i |y_i - sum_k g_ik A_k x_i|^2:
/// m[a][b] = sum_i g_ia g_ib x_i x_i^T, c[a] = sum_i g_ia y_i x_i^T.
struct Moments {
  std::vector<std::vector<Mat3>> m;
  std::vector<Mat3> c;
  double c0 = 0.0;

  [[nodiscard]] std::size_t size() const { return c.size(); }

  /// Objective value; fills dF/dA_k into `grad` when given.
  double evaluate(const std::vector<Mat3>& a, std::vector<Mat3>* grad) const {
    double f = c0;
    for (std::size_t j = 0; j < size(); ++j) {
      Mat3 h = Mat3::Zero();
      for (std::size_t b = 0; b < size(); ++b) h.noalias() += a[b] * m[b][j];
      f += a[j].cwiseProduct(h).sum() - 2.0 * a[j].cwiseProduct(c[j]).sum();
      if (grad) (*grad)[j] = 2.0 * (h - c[j]);
    }
    return std::max(f, 0.0);
  }

  /// Block matrix with block (a, b) = m[a][b].
  [[nodiscard]] Eigen::MatrixXd stacked() const {
    const auto k = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd big(3 * k, 3 * k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        big.block<3, 3>(3 * a, 3 * b) =
            m[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      }
    }
    return big;
  }
};

inline Moments moments(std::span<const Vec3> x, std::span<const Vec3> y,
                       const Eigen::MatrixXd& gamma) {
  const std::size_t n = x.size();
  const auto k = static_cast<std::size_t>(gamma.cols());
  if (y.size() != n || static_cast<std::size_t>(gamma.rows()) != n) {
    throw DimensionMismatch("features, targets and weights differ in length");
  }
  Moments s;
  s.m.assign(k, std::vector<Mat3>(k, Mat3::Zero()));
  s.c.assign(k, Mat3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Mat3 xx = x[i] * x[i].transpose();
    const Mat3 yx = y[i] * x[i].transpose();
    for (std::size_t a = 0; a < k; ++a) {
      const double ga = gamma(row, static_cast<Eigen::Index>(a));
      s.c[a].noalias() += ga * yx;
      for (std::size_t b = a; b < k; ++b) {
        s.m[a][b].noalias() +=
            (ga * gamma(row, static_cast<Eigen::Index>(b))) * xx;
      }
    }
    s.c0 += y[i].squaredNorm();
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < a; ++b) s.m[a][b] = s.m[b][a];
  }
  return s;
}

/// Margin used in construction so that checks against epsilon hold strictly
/// after rounding.
inline double strict_margin(double epsilon) { return 1.01 * epsilon; }

/// Nearest matrix (Frobenius) whose symmetric part is <= -margin I.
inline Mat3 project_negative_definite(const Mat3& a, double margin) {
  const Mat3 sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> es(sym);
  const Vec3 lambda = es.eigenvalues().cwiseMin(-margin);
  return es.eigenvectors() * lambda.asDiagonal() *
             es.eigenvectors().transpose() +
         0.5 * (a - a.transpose());
}

/// Nearest matrix (Frobenius) with |I + A|_2 <= 1 - margin. Its symmetric
/// part is then <= -margin I as well.
inline Mat3 project_contraction(const Mat3& a, double margin) {
  Eigen::JacobiSVD<Mat3> svd(Mat3::Identity() + a,
                             Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues().cwiseMin(1.0 - margin);
  return svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose() -
         Mat3::Identity();
}

inline double spectral_norm(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(m.transpose() * m,
                                         Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

enum class Constraint {
  kNegativeDefinite,  ///< sym(A) <= -m I (continuous systems)
  kContraction,       ///< |I + A|_2 <= 1 - m (discrete systems x' = x + A x)
};

struct StableMapFit {
  std::vector<Mat3> A;
  double initial_objective = 0.0;  ///< at A = -I
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Least squares over K maps restricted to a closed convex stability set.
/// The unconstrained solution is used when it is already admissible;
/// otherwise monotone FISTA with exact projection, started from the better
/// of -I and the projected unconstrained solution.
inline StableMapFit fit_stable_maps(const Moments& s, Constraint constraint,
                                    const LearnOptions& opt) {
  const std::size_t k = s.size();
  const double margin = strict_margin(opt.epsilon);
  const auto project_one = [&](const Mat3& a) {
    return constraint == Constraint::kContraction
               ? project_contraction(a, margin)
               : project_negative_definite(a, margin);
  };
  const auto admissible = [&](const Mat3& a) {
    if (constraint == Constraint::kContraction) {
      return spectral_norm(Mat3::Identity() + a) <= 1.0 - margin;
    }
    return max_symmetric_eigenvalue(a) <= -margin;
  };

  StableMapFit out;
  const std::vector<Mat3> minus_identity(k, -Mat3::Identity());
  out.initial_objective = s.evaluate(minus_identity, nullptr);

  const Eigen::MatrixXd big = s.stacked();
  Eigen::MatrixXd rhs(3 * k, 3);
  for (std::size_t j = 0; j < k; ++j) {
    rhs.block<3, 3>(static_cast<Eigen::Index>(3 * j), 0) = s.c[j].transpose();
  }
  const double ridge = 1e-12 * std::max(big.trace(), 1e-300);
  const Eigen::MatrixXd regular =
      big + ridge * Eigen::MatrixXd::Identity(big.rows(), big.cols());
  const Eigen::MatrixXd solution = regular.ldlt().solve(rhs);
  std::vector<Mat3> ls(k);
  bool feasible = solution.allFinite();
  for (std::size_t j = 0; j < k && feasible; ++j) {
    ls[j] = solution.block<3, 3>(static_cast<Eigen::Index>(3 * j), 0)
                .transpose();
    feasible = admissible(ls[j]);
  }
  if (feasible) {
    out.A = std::move(ls);
    out.objective = s.evaluate(out.A, nullptr);
    out.converged = true;
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(big,
                                                    Eigen::EigenvaluesOnly);
  const double lipschitz =
      2.0 * std::max(es.eigenvalues().maxCoeff(), 1e-300);
  const double step = 1.0 / lipschitz;
  const auto project = [&](std::vector<Mat3>& a) {
    for (auto& m : a) m = project_one(m);
  };

  std::vector<Mat3> x = minus_identity;
  double f = out.initial_objective;
  if (solution.allFinite()) {
    for (std::size_t j = 0; j < k; ++j) {
      ls[j] = solution.block<3, 3>(static_cast<Eigen::Index>(3 * j), 0)
                  .transpose();
    }
    project(ls);
    const double f_ls = s.evaluate(ls, nullptr);
    if (f_ls < f) {
      x = ls;
      f = f_ls;
    }
  }

  std::vector<Mat3> y = x, grad(k), z(k);
  double t = 1.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it + 1;
    s.evaluate(y, &grad);
    for (std::size_t j = 0; j < k; ++j) z[j] = y[j] - step * grad[j];
    project(z);
    const double f_z = s.evaluate(z, nullptr);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    std::vector<Mat3> x_next = f_z <= f ? z : x;
    const double f_next = std::min(f_z, f);
    for (std::size_t j = 0; j < k; ++j) {
      y[j] = x_next[j] + (t / t_next) * (z[j] - x_next[j]) +
             ((t - 1.0) / t_next) * (x_next[j] - x[j]);
    }
    const double rel = f > 0.0 ? (f - f_next) / f : 0.0;
    const bool moved = f_z <= f;
    x = std::move(x_next);
    f = f_next;
    t = t_next;
    if (moved && rel < opt.relative_tolerance) {
      out.converged = true;
      break;
    }
  }
  out.A = std::move(x);
  out.objective = f;
  return out;
}

}  // namespace detail

/// Learns A_ori (discrete: x' = x + A x in the attractor tangent space) and
/// A_pos (continuous) for every mixture component.
[[nodiscard]] inline Se3Policy learn(const PreprocessedDataset& data,
                                     const MixtureModel& mixture,
                                     const LearnOptions& opt = {}) {
  const std::size_t n = data.size();
  if (n == 0) throw InsufficientData("empty dataset");
  if (data.targets.size() != n || data.positions.size() != n ||
      data.velocities.size() != n || data.orientations.size() != n) {
    throw DimensionMismatch("dataset arrays differ in length");
  }
  if (!(opt.epsilon > 0.0 && opt.epsilon < 0.5)) {
    throw ValidationError("epsilon must lie in (0, 0.5)");
  }
  const std::size_t k = mixture.size();

  Eigen::MatrixXd gamma(static_cast<Eigen::Index>(n),
                        static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i) {
    gamma.row(static_cast<Eigen::Index>(i)) =
        mixture.mixing_function(data.positions[i], data.orientations[i])
            .transpose();
  }

  // Orientation maps act on the tangent space only (predictions are
  // projected), so they are fitted in tangent coordinates B^T x.
  const Eigen::Matrix<double, 4, 3> basis = tangent_basis(data.attractor_ori);
  std::vector<Vec3> xt(n), yt(n), rel(n);
  for (std::size_t i = 0; i < n; ++i) {
    xt[i] = basis.transpose() * data.features[i];
    yt[i] = basis.transpose() * data.targets[i];
    rel[i] = data.positions[i] - data.attractor_pos;
  }
  const auto ori = detail::fit_stable_maps(detail::moments(xt, yt, gamma),
                                           detail::Constraint::kContraction,
                                           opt);
  const auto pos = detail::fit_stable_maps(
      detail::moments(rel, data.velocities, gamma),
      detail::Constraint::kNegativeDefinite, opt);

  Se3Policy policy;
  policy.mixture = mixture;
  policy.attractor_ori = data.attractor_ori;
  policy.attractor_pos = data.attractor_pos;
  policy.dt = data.dt;
  policy.epsilon = opt.epsilon;
  policy.A_pos = pos.A;
  const Vec4 qa = data.attractor_ori.coeffs();
  policy.A_ori.reserve(k);
  for (const Mat3& b : ori.A) {
    policy.A_ori.push_back(basis * b * basis.transpose() - qa * qa.transpose());
  }
  policy.residual_ori = ori.objective / static_cast<double>(n);
  policy.residual_pos = pos.objective / static_cast<double>(n);
  policy.converged = ori.converged && pos.converged;
  return policy;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Desired one-step displacement expressed at q_att:
/// P sum_k gamma_k A_k log_{q_att}(q).
[[nodiscard]] inline TangentVector predict_orientation_step(
    const Se3Policy& policy, const Vec3& p, const UnitQuaternion& q) {
  const UnitQuaternion qc = align_hemisphere(q, policy.attractor_ori);
  const Vec4 x = log_map(policy.attractor_ori, qc).v;
  const Eigen::VectorXd g = policy.mixture.mixing_function(p, qc);
  Vec4 y = Vec4::Zero();
  for (std::size_t k = 0; k < policy.size(); ++k) {
    y.noalias() += g[static_cast<Eigen::Index>(k)] * (policy.A_ori[k] * x);
  }
  return TangentVector::projected(policy.attractor_ori, y);
}

/// sum_k gamma_k (A_k p + b_k), evaluated as A_k (p - xi*).
[[nodiscard]] inline Vec3 predict_position_velocity(const Se3Policy& policy,
                                                    const Vec3& p,
                                                    const UnitQuaternion& q) {
  const Eigen::VectorXd g = policy.mixture.mixing_function(p, q);
  const Vec3 e = p - policy.attractor_pos;
  Vec3 v = Vec3::Zero();
  for (std::size_t k = 0; k < policy.size(); ++k) {
    v.noalias() += g[static_cast<Eigen::Index>(k)] * (policy.A_pos[k] * e);
  }
  return v;
}

/// Next desired orientation: transport the predicted step to q and exp-map.
struct OrientationStep {
  TangentVector at_attractor;
  TangentVector body;
  UnitQuaternion desired;
};

[[nodiscard]] inline OrientationStep next_orientation(const Se3Policy& policy,
                                                      const Vec3& p,
                                                      const UnitQuaternion& q) {
  const UnitQuaternion qc = align_hemisphere(q, policy.attractor_ori);
  OrientationStep s;
  s.at_attractor = predict_orientation_step(policy, p, qc);
  s.body = parallel_transport(s.at_attractor, qc);
  s.desired = exp_map(s.body);
  if (q.dot(qc) < 0.0) s.desired = -s.desired;
  return s;
}

/// V(q) = log_{q_att}(q)^T log_{q_att}(q) with q taken in the attractor's
/// hemisphere.
[[nodiscard]] inline double lyapunov_value(const Se3Policy& policy,
                                           const UnitQuaternion& q) {
  const UnitQuaternion qc = align_hemisphere(q, policy.attractor_ori);
  return log_map(policy.attractor_ori, qc).v.squaredNorm();
}

[[nodiscard]] inline double lyapunov_difference(const Se3Policy& policy,
                                                const Vec3& p,
                                                const UnitQuaternion& q) {
  const OrientationStep s = next_orientation(policy, p, q);
  return lyapunov_value(policy, s.desired) - lyapunov_value(policy, q);
}

}  // namespace se3ds
