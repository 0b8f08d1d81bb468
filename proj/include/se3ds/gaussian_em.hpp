#pragma once

// Euclidean Gaussian mixture fitted by EM with k-means++ seeding.
// Used by the quaternion mixture on tangent-space coordinates.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "se3ds/random.hpp"

namespace se3ds::gmm {

struct EmOptions {
  int max_iterations = 1000;
  /// Stop when the mean per-sample log-likelihood improves by less than this.
  double tolerance = 1e-9;
  int n_init = 3;
  int kmeans_iterations = 100;
  /// Covariances get reg_scale * trace(cov) added to the diagonal.
  double reg_scale = 1e-6;
  double reg_floor = 1e-12;
};

struct EmResult {
  int k = 0;
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;  ///< k x d
  std::vector<Eigen::MatrixXd> covariances;
  std::vector<int> labels;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  double bic = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

/// cov + (reg_scale * trace(cov) + reg_floor) I, symmetrized.
[[nodiscard]] inline Eigen::MatrixXd regularize(const Eigen::MatrixXd& cov,
                                                double reg_scale,
                                                double reg_floor) {
  Eigen::MatrixXd out = 0.5 * (cov + cov.transpose());
  out.diagonal().array() += reg_scale * out.trace() + reg_floor;
  return out;
}

[[nodiscard]] inline int parameter_count(int k, int d) {
  return k * d + k * d * (d + 1) / 2 + (k - 1);
}

namespace detail {

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// k-means++ seeding followed by Lloyd iterations; returns labels.
inline std::vector<int> kmeans(const Eigen::MatrixXd& x, int k, Rng& rng,
                               int iterations) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.index(n)));

  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2[i] = (x.row(i) - centers.row(0)).squaredNorm();
  }
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(n));
    }
    centers.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(i) - centers.row(c)).squaredNorm());
    }
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += x.row(i);
      counts[labels[i]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
    }
  }
  return labels;
}

struct Params {
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;
  std::vector<Eigen::MatrixXd> covs;
};

inline void m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp,
                   const EmOptions& opt, Params& p) {
  const Eigen::Index n = x.rows(), k = resp.cols();
  const double tiny = 10.0 * std::numeric_limits<double>::epsilon();
  Eigen::VectorXd nk = resp.colwise().sum().transpose().array() + tiny;
  p.weights = nk / static_cast<double>(n);
  p.means = (resp.transpose() * x).array().colwise() / nk.array();
  p.covs.resize(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::MatrixXd centered = x.rowwise() - p.means.row(c);
    const Eigen::MatrixXd weighted =
        centered.array().colwise() * resp.col(c).array();
    Eigen::MatrixXd cov = (weighted.transpose() * centered) / nk[c];
    p.covs[c] = regularize(cov, opt.reg_scale, opt.reg_floor);
  }
}

/// Fills log(pi_k N(x_i | k)) into `logp` (n x k).
inline void weighted_log_densities(const Eigen::MatrixXd& x, const Params& p,
                                   Eigen::MatrixXd& logp) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const Eigen::Index k = p.weights.size();
  logp.resize(n, k);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::LLT<Eigen::MatrixXd> llt(p.covs[c]);
    const Eigen::MatrixXd l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    const Eigen::MatrixXd centered =
        (x.rowwise() - p.means.row(c)).transpose();
    const Eigen::MatrixXd z = llt.matrixL().solve(centered);
    const Eigen::VectorXd maha = z.colwise().squaredNorm().transpose();
    logp.col(c) = (-0.5 * (static_cast<double>(d) * log2pi + logdet) +
                   std::log(p.weights[c])) -
                  0.5 * maha.array();
  }
}

inline EmResult run_once(const Eigen::MatrixXd& x, int k, Rng& rng,
                         const EmOptions& opt) {
  const Eigen::Index n = x.rows();
  const std::vector<int> init = kmeans(x, k, rng, opt.kmeans_iterations);
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) resp(i, init[i]) = 1.0;

  Params p;
  m_step(x, resp, opt, p);

  EmResult result;
  result.k = k;
  Eigen::MatrixXd logp;
  double prev = -std::numeric_limits<double>::infinity();
  double ll = prev;
  for (int it = 0; it < opt.max_iterations; ++it) {
    weighted_log_densities(x, p, logp);
    ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = log_sum_exp(logp.row(i).transpose());
      ll += lse;
      resp.row(i) = (logp.row(i).array() - lse).exp();
    }
    result.iterations = it + 1;
    if (std::abs(ll - prev) / static_cast<double>(n) < opt.tolerance) {
      result.converged = true;
      break;
    }
    prev = ll;
    m_step(x, resp, opt, p);
  }

  result.weights = p.weights;
  result.means = p.means;
  result.covariances = p.covs;
  result.log_likelihood = ll;
  result.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    resp.row(i).maxCoeff(&best);
    result.labels[i] = static_cast<int>(best);
  }
  const int params = parameter_count(k, static_cast<int>(x.cols()));
  result.bic = -2.0 * ll + params * std::log(static_cast<double>(n));
  return result;
}

}  // namespace detail

/// Best of `opt.n_init` seeded EM runs (highest log-likelihood).
[[nodiscard]] inline EmResult fit_em(const Eigen::MatrixXd& x, int k,
                                     std::uint64_t seed,
                                     const EmOptions& opt = {}) {
  EmResult best;
  for (int run = 0; run < opt.n_init; ++run) {
    Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(k) * 7919ULL +
            static_cast<std::uint64_t>(run));
    EmResult r = detail::run_once(x, k, rng, opt);
    if (r.log_likelihood > best.log_likelihood) best = std::move(r);
  }
  return best;
}

}  // namespace se3ds::gmm
