#pragma once

// Riemannian Gaussian mixture over orientation tangent vectors, optionally
// augmented with position (coupled SE(3) mode).
//
// Each component k has a Frechet mean orientation mu_k and a covariance over
// [p - mu_p; log_{mu_k}(q)] (coupled) or log_{mu_k}(q) (orientation only). The
// Gaussian mean in tangent coordinates is zero. Every component has a
// mirrored twin at -mu_k so that both hemispheres of S^3 are covered.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "se3ds/dataset.hpp"
#include "se3ds/errors.hpp"
#include "se3ds/gaussian_em.hpp"
#include "se3ds/manifold.hpp"

namespace se3ds {

enum class MixtureMode { kOrientation, kCoupled };

[[nodiscard]] inline std::string_view to_string(MixtureMode mode) {
  return mode == MixtureMode::kCoupled ? "se3" : "quat-only";
}

[[nodiscard]] inline MixtureMode parse_mixture_mode(std::string_view s) {
  if (s == "se3") return MixtureMode::kCoupled;
  if (s == "quat-only") return MixtureMode::kOrientation;
  throw ValidationError("unknown mode '" + std::string(s) +
                        "' (expected quat-only or se3)");
}

struct GaussianComponent {
  double prior = 1.0;
  UnitQuaternion mean_ori;
  std::optional<Vec3> mean_pos;  ///< coupled mode only
  Eigen::MatrixXd covariance;    ///< 4x4 or 7x7, regularized
  bool mirrored = false;
};

struct KRange {
  int min = 1;
  int max = 1;
};

struct MixtureFitOptions {
  gmm::EmOptions em;
  /// Scale of the trace-proportional ridge added to component covariances.
  double reg_scale = 1e-6;
  double reg_floor = 1e-12;
};

class MixtureModel {
 public:
  MixtureModel() = default;

  /// `originals` are the K unmirrored components; twins are derived here.
  MixtureModel(MixtureMode mode, const UnitQuaternion& attractor_ori,
               std::vector<GaussianComponent> originals)
      : mode_(mode), attractor_ori_(attractor_ori) {
    if (originals.empty()) {
      throw ValidationError("mixture needs at least one component");
    }
    const Eigen::Index dim = mode == MixtureMode::kCoupled ? 7 : 4;
    double prior_sum = 0.0;
    for (auto& c : originals) {
      if (c.covariance.rows() != dim || c.covariance.cols() != dim) {
        throw DimensionMismatch("component covariance must be " +
                                std::to_string(dim) + "x" +
                                std::to_string(dim));
      }
      if ((mode == MixtureMode::kCoupled) != c.mean_pos.has_value()) {
        throw DimensionMismatch("position mean presence must match mode");
      }
      if (!(c.prior > 0.0 && c.prior <= 1.0)) {
        throw ValidationError("component prior out of (0, 1]");
      }
      c.mirrored = false;
      prior_sum += c.prior;
    }
    if (std::abs(prior_sum - 1.0) > 1e-12) {
      throw ValidationError("component priors must sum to 1");
    }
    k_ = originals.size();
    components_ = std::move(originals);
    components_.reserve(2 * k_);
    // Coupled twins flip the sign of the position/orientation cross terms.
    for (std::size_t k = 0; k < k_; ++k) {
      GaussianComponent twin = components_[k];
      twin.mean_ori = -twin.mean_ori;
      twin.mirrored = true;
      if (mode_ == MixtureMode::kCoupled) {
        twin.covariance.topRightCorner<3, 4>() *= -1.0;
        twin.covariance.bottomLeftCorner<4, 3>() *= -1.0;
      }
      components_.push_back(std::move(twin));
    }
    build_cache();
  }

  [[nodiscard]] MixtureMode mode() const { return mode_; }
  [[nodiscard]] const UnitQuaternion& attractor_ori() const {
    return attractor_ori_;
  }
  /// Number of logical (unmirrored) components.
  [[nodiscard]] std::size_t size() const { return k_; }
  /// Originals at [0, K), mirrored twins at [K, 2K).
  [[nodiscard]] const std::vector<GaussianComponent>& components() const {
    return components_;
  }
  [[nodiscard]] const GaussianComponent& component(std::size_t k) const {
    return components_.at(k);
  }

  /// log N([p - mu_p; log_mu(q)] | 0, Sigma) for component `index` in
  /// [0, 2K). `p` is ignored in orientation-only mode.
  [[nodiscard]] double log_density(std::size_t index, const Vec3& p,
                                   const UnitQuaternion& q) const {
    const GaussianComponent& c = components_.at(index);
    const Cache& cache = cache_[index];
    const Vec4 l = log_map(c.mean_ori, q).v;
    Eigen::VectorXd z(cache.reduced_dim);
    if (mode_ == MixtureMode::kCoupled) {
      z.head<3>() = p - *c.mean_pos;
      z.tail<3>() = cache.basis.transpose() * l;
    } else {
      z = cache.basis.transpose() * l;
    }
    const Eigen::VectorXd w = cache.chol.matrixL().solve(z);
    return cache.log_norm - 0.5 * w.squaredNorm();
  }

  [[nodiscard]] double density(std::size_t index, const Vec3& p,
                               const UnitQuaternion& q) const {
    return std::exp(log_density(index, p, q));
  }

  /// Index of the twin of component k whose mean lies in q's hemisphere.
  [[nodiscard]] std::size_t hemisphere_component(std::size_t k,
                                                 const UnitQuaternion& q) const {
    return q.dot(components_[k].mean_ori) >= 0.0 ? k : k + k_;
  }

  /// Posterior weights gamma_k over the K logical components.
  [[nodiscard]] Eigen::VectorXd mixing_function(const Vec3& p,
                                                const UnitQuaternion& q) const {
    Eigen::VectorXd logw(static_cast<Eigen::Index>(k_));
    for (std::size_t k = 0; k < k_; ++k) {
      logw[static_cast<Eigen::Index>(k)] =
          std::log(components_[k].prior) +
          log_density(hemisphere_component(k, q), p, q);
    }
    const double m = logw.maxCoeff();
    Eigen::VectorXd w = (logw.array() - m).exp();
    return w / w.sum();
  }

  [[nodiscard]] Eigen::VectorXd mixing_function(const UnitQuaternion& q) const {
    return mixing_function(Vec3::Zero(), q);
  }

 private:
  struct Cache {
    Eigen::Matrix<double, 4, 3> basis;
    Eigen::LLT<Eigen::MatrixXd> chol;
    double log_norm = 0.0;
    Eigen::Index reduced_dim = 3;
  };

  // The covariance is evaluated on the tangent subspace at mu_k: the
  // direction along mu_k carries no data, only the ridge.
  void build_cache() {
    cache_.clear();
    cache_.reserve(components_.size());
    for (const auto& c : components_) {
      Cache cache;
      cache.basis = tangent_basis(c.mean_ori);
      Eigen::MatrixXd reduced;
      if (mode_ == MixtureMode::kCoupled) {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(7, 6);
        t.topLeftCorner<3, 3>().setIdentity();
        t.bottomRightCorner<4, 3>() = cache.basis;
        reduced = t.transpose() * c.covariance * t;
        cache.reduced_dim = 6;
      } else {
        reduced = cache.basis.transpose() * c.covariance * cache.basis;
        cache.reduced_dim = 3;
      }
      reduced = 0.5 * (reduced + reduced.transpose());
      cache.chol.compute(reduced);
      if (cache.chol.info() != Eigen::Success) {
        throw ValidationError("component covariance is not positive definite");
      }
      const Eigen::MatrixXd l = cache.chol.matrixL();
      const double logdet = 2.0 * l.diagonal().array().log().sum();
      cache.log_norm =
          -0.5 * (static_cast<double>(cache.reduced_dim) *
                      std::log(2.0 * std::numbers::pi) +
                  logdet);
      cache_.push_back(std::move(cache));
    }
  }

  MixtureMode mode_ = MixtureMode::kOrientation;
  UnitQuaternion attractor_ori_;
  std::size_t k_ = 0;
  std::vector<GaussianComponent> components_;
  std::vector<Cache> cache_;
};

[[nodiscard]] inline double component_density(const MixtureModel& model,
                                              std::size_t k, const Vec3& p,
                                              const UnitQuaternion& q) {
  return model.density(k, p, q);
}

[[nodiscard]] inline Eigen::VectorXd mixing_function(const MixtureModel& model,
                                                     const Vec3& p,
                                                     const UnitQuaternion& q) {
  return model.mixing_function(p, q);
}

/// Everything fit() decides, for diagnostics and tests.
struct MixtureFit {
  MixtureModel model;
  /// Hard label of every training sample, in the model's component order.
  std::vector<int> labels;
  /// (K, BIC) of every candidate that produced a usable clustering.
  std::vector<std::pair<int, double>> bic;
};

namespace detail {

/// EM features: intrinsic coordinates in T_{q_att} S^3, prefixed by position
/// in coupled mode.
inline Eigen::MatrixXd mixture_features(const PreprocessedDataset& data,
                                        MixtureMode mode) {
  const auto basis = tangent_basis(data.attractor_ori);
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index d = mode == MixtureMode::kCoupled ? 6 : 3;
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 z = basis.transpose() * data.features[i];
    if (mode == MixtureMode::kCoupled) {
      x.row(i).head<3>() = data.positions[i].transpose();
      x.row(i).tail<3>() = z.transpose();
    } else {
      x.row(i) = z.transpose();
    }
  }
  return x;
}

}  // namespace detail

/// Fits EM for every K in `k_range`, keeps the lowest BIC, and rebuilds each
/// cluster as a Riemannian Gaussian (Frechet mean + tangent covariance).
/// Components are ordered by the mean trajectory progress of their members.
[[nodiscard]] inline MixtureFit fit_mixture_detailed(const PreprocessedDataset& data,
                                             MixtureMode mode, KRange k_range,
                                             std::uint64_t seed,
                                             const MixtureFitOptions& opt = {}) {
  if (k_range.min < 1 || k_range.max < k_range.min) {
    throw ValidationError("invalid k range");
  }
  if (data.size() == 0) throw InsufficientData("empty dataset");

  const std::size_t dim = mode == MixtureMode::kCoupled ? 7 : 4;
  const Eigen::MatrixXd x = detail::mixture_features(data, mode);

  MixtureFit out;
  std::optional<gmm::EmResult> best;
  bool any_converged = false;
  std::string last_problem;
  for (int k = k_range.min; k <= k_range.max; ++k) {
    if (static_cast<std::size_t>(k) * (dim + 1) > data.size()) {
      last_problem = "K=" + std::to_string(k) + " exceeds data size";
      continue;
    }
    gmm::EmResult r = gmm::fit_em(x, k, seed, opt.em);
    if (!r.converged) {
      last_problem = "EM did not converge for K=" + std::to_string(k);
      continue;
    }
    any_converged = true;
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int l : r.labels) ++counts[static_cast<std::size_t>(l)];
    const bool degenerate = std::any_of(
        counts.begin(), counts.end(), [&](std::size_t c) { return c < dim + 1; });
    if (degenerate) {
      last_problem = "K=" + std::to_string(k) +
                     " leaves a component with fewer than " +
                     std::to_string(dim + 1) + " members";
      continue;
    }
    out.bic.emplace_back(k, r.bic);
    if (!best || r.bic < best->bic) best = std::move(r);
  }
  if (!best) {
    if (!any_converged) throw NoConvergence(last_problem);
    throw DegenerateCluster(last_problem);
  }

  // Order clusters along the trajectory.
  const int k = best->k;
  std::vector<double> progress(static_cast<std::size_t>(k), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto l = static_cast<std::size_t>(best->labels[i]);
    progress[l] += data.progress.empty() ? 0.0 : data.progress[i];
    ++counts[l];
  }
  std::vector<int> order(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return progress[a] / counts[a] < progress[b] / counts[b];
  });
  std::vector<int> rank(static_cast<std::size_t>(k));
  for (int r = 0; r < k; ++r) rank[static_cast<std::size_t>(order[r])] = r;

  out.labels.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.labels[i] = rank[static_cast<std::size_t>(best->labels[i])];
  }

  std::vector<GaussianComponent> comps;
  comps.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    std::vector<UnitQuaternion> members_q;
    std::vector<Vec3> members_p;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (out.labels[i] != c) continue;
      members_q.push_back(data.orientations[i]);
      members_p.push_back(data.positions[i]);
    }
    GaussianComponent g;
    g.prior = static_cast<double>(members_q.size()) /
              static_cast<double>(data.size());
    g.mean_ori =
        align_hemisphere(frechet_mean(members_q), data.attractor_ori);
    for (auto& q : members_q) q = align_hemisphere(q, g.mean_ori);

    const double denom = static_cast<double>(members_q.size() - 1);
    if (mode == MixtureMode::kCoupled) {
      Vec3 mu_p = Vec3::Zero();
      for (const auto& p : members_p) mu_p += p;
      mu_p /= static_cast<double>(members_p.size());
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(7, 7);
      Eigen::VectorXd f(7);
      for (std::size_t i = 0; i < members_q.size(); ++i) {
        f.head<3>() = members_p[i] - mu_p;
        f.tail<4>() = log_map(g.mean_ori, members_q[i]).v;
        cov.noalias() += f * f.transpose();
      }
      g.mean_pos = mu_p;
      g.covariance = gmm::regularize(cov / denom, opt.reg_scale, opt.reg_floor);
    } else {
      g.covariance = gmm::regularize(tangent_covariance(members_q, g.mean_ori),
                                     opt.reg_scale, opt.reg_floor);
    }
    comps.push_back(std::move(g));
  }
  // Hard-count priors can miss 1 by an ulp; fold the remainder into the last.
  double sum = 0.0;
  for (std::size_t c = 0; c + 1 < comps.size(); ++c) sum += comps[c].prior;
  comps.back().prior = 1.0 - sum;

  out.model = MixtureModel(mode, data.attractor_ori, std::move(comps));
  return out;
}

[[nodiscard]] inline MixtureModel fit_mixture(const PreprocessedDataset& data,
                                      MixtureMode mode, KRange k_range,
                                      std::uint64_t seed,
                                      const MixtureFitOptions& opt = {}) {
  return fit_mixture_detailed(data, mode, k_range, seed, opt).model;
}

}  // namespace se3ds
