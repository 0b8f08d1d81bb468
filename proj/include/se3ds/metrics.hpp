#pragma once

// Trajectory comparison: position DTW and orientation error along the DTW
// alignment.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "se3ds/errors.hpp"
#include "se3ds/manifold.hpp"

namespace se3ds {

using AlignmentPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct DtwResult {
  double cost = 0.0;  ///< sum of matched Euclidean distances (m)
  AlignmentPath path;
};

/// Full-window DTW with Euclidean point cost. The path runs from (0, 0) to
/// (n-1, m-1); ties in backtracking prefer the diagonal.
[[nodiscard]] inline DtwResult dtw_position(std::span<const Vec3> ref,
                                            std::span<const Vec3> test) {
  if (ref.empty() || test.empty()) {
    throw EmptySequence("dtw_position needs non-empty sequences");
  }
  const std::size_t n = ref.size(), m = test.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(n * m, inf);
  const auto at = [&](std::size_t i, std::size_t j) -> double& {
    return acc[i * m + j];
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = (ref[i] - test[j]).norm();
      double best = 0.0;
      if (i > 0 || j > 0) {
        best = inf;
        if (i > 0 && j > 0) best = at(i - 1, j - 1);
        if (i > 0) best = std::min(best, at(i - 1, j));
        if (j > 0) best = std::min(best, at(i, j - 1));
      }
      at(i, j) = best + d;
    }
  }

  DtwResult out;
  out.cost = at(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  out.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = at(i - 1, j - 1);
      const double up = at(i - 1, j);
      const double left = at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    out.path.emplace_back(i, j);
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

/// Throws InvalidPath unless `path` is a monotone, boundary-aligned
/// alignment of sequences of lengths n and m.
inline void validate_path(const AlignmentPath& path, std::size_t n,
                          std::size_t m) {
  if (path.empty()) throw InvalidPath("alignment path is empty");
  if (path.front() != std::pair<std::size_t, std::size_t>{0, 0} ||
      path.back() != std::pair<std::size_t, std::size_t>{n - 1, m - 1}) {
    throw InvalidPath("alignment path must start at (0,0) and end at (" +
                      std::to_string(n - 1) + "," + std::to_string(m - 1) +
                      ")");
  }
  for (std::size_t s = 1; s < path.size(); ++s) {
    const auto [i0, j0] = path[s - 1];
    const auto [i1, j1] = path[s];
    const bool ok = i1 >= i0 && j1 >= j0 && i1 - i0 <= 1 && j1 - j0 <= 1 &&
                    (i1 != i0 || j1 != j0);
    if (!ok) {
      throw InvalidPath("alignment path is not monotone at entry " +
                        std::to_string(s));
    }
  }
}

/// Mean rotation angle between matched pairs of `path`, in [0, pi]. This is
/// twice the sign-invariant geodesic distance on S^3.
[[nodiscard]] inline double quaternion_error(std::span<const UnitQuaternion> ref,
                                             std::span<const UnitQuaternion> test,
                                             const AlignmentPath& path) {
  if (ref.empty() || test.empty()) {
    throw EmptySequence("quaternion_error needs non-empty sequences");
  }
  validate_path(path, ref.size(), test.size());
  double sum = 0.0;
  for (const auto& [i, j] : path) sum += 2.0 * rotation_distance(ref[i], test[j]);
  return sum / static_cast<double>(path.size());
}

[[nodiscard]] inline double arc_length(std::span<const Vec3> points) {
  double len = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    len += (points[i] - points[i - 1]).norm();
  }
  return len;
}

enum class Scenario { kFromDemoStart, kUnmodeledStart, kPerturbed };

[[nodiscard]] inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kFromDemoStart: return "from-demo-start";
    case Scenario::kUnmodeledStart: return "unmodeled-start";
    case Scenario::kPerturbed: return "perturbed";
  }
  return "";
}

[[nodiscard]] inline Scenario parse_scenario(std::string_view s) {
  if (s == "from-demo-start") return Scenario::kFromDemoStart;
  if (s == "unmodeled-start") return Scenario::kUnmodeledStart;
  if (s == "perturbed") return Scenario::kPerturbed;
  throw ValidationError("unknown scenario '" + std::string(s) + "'");
}

struct EvalReport {
  Scenario scenario = Scenario::kFromDemoStart;
  int trial = 0;
  std::size_t demo = 0;  ///< reference demo (nearest by DTW)
  double dtw_pos = 0.0;
  double dtw_per_pair = 0.0;  ///< dtw_pos / path length
  double quat_err = 0.0;
  int n_steps = 0;
  bool converged = false;
};

struct SummaryStats {
  std::size_t count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
[[nodiscard]] inline SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double f) {
    const double pos = f * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

}  // namespace se3ds
