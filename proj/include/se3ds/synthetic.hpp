#pragma once

// Synthetic SE(3) demonstration tasks with known segmentation and attractor.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "se3ds/dataset.hpp"
#include "se3ds/errors.hpp"
#include "se3ds/manifold.hpp"
#include "se3ds/random.hpp"

namespace se3ds::synthetic {

enum class Task { kArcRotate, kTwoSegment, kPourLike };

[[nodiscard]] inline Task parse_task(std::string_view name) {
  if (name == "arc-rotate") return Task::kArcRotate;
  if (name == "two-segment") return Task::kTwoSegment;
  if (name == "pour-like") return Task::kPourLike;
  throw ValidationError("unknown task '" + std::string(name) +
                        "' (expected arc-rotate, two-segment or pour-like)");
}

[[nodiscard]] inline std::string_view to_string(Task task) {
  switch (task) {
    case Task::kArcRotate: return "arc-rotate";
    case Task::kTwoSegment: return "two-segment";
    case Task::kPourLike: return "pour-like";
  }
  return "";
}

struct GenerateOptions {
  int demos = 3;
  int samples_per_segment = 250;
  double dt = 0.01;
  /// Standard deviation of i.i.d. noise on positions (m) and on attractor
  /// tangent coordinates of orientation (rad).
  double noise = 0.005;
  std::uint64_t seed = 0;
};

struct SyntheticSet {
  Task task = Task::kTwoSegment;
  std::vector<Demonstration> demos;
  /// Generating segment of every sample.
  std::vector<std::vector<int>> labels;
  Vec3 attractor_pos = Vec3::Zero();
  UnitQuaternion attractor_ori;
};

namespace detail {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Phase in [0, 1] that dwells in the middle of a segment: the sample times
/// are truncated-normal quantiles on [-width, width].
inline double dwell_profile(double u, double width = 2.0) {
  const double a = normal_cdf(-width);
  return (normal_quantile(a + (1.0 - 2.0 * a) * u) + width) / (2.0 * width);
}

inline double min_jerk(double u) {
  return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

struct Leg {
  Vec3 p0, p1;  ///< positions
  Vec3 z0, z1;  ///< orientation in attractor tangent coordinates
};

/// Samples consecutive straight legs (in position and tangent coordinates)
/// with the given phase profile; the joint sample is not repeated.
template <typename Profile>
void sample_legs(const std::vector<Leg>& legs, const UnitQuaternion& q_att,
                 const GenerateOptions& opt, Profile profile, Rng& rng,
                 Demonstration& demo, std::vector<int>& labels) {
  const auto basis = tangent_basis(q_att);
  const int n = opt.samples_per_segment;
  for (std::size_t leg = 0; leg < legs.size(); ++leg) {
    for (int i = leg == 0 ? 0 : 1; i < n; ++i) {
      const double s = profile(static_cast<double>(i) / (n - 1));
      Vec3 p = legs[leg].p0 + s * (legs[leg].p1 - legs[leg].p0);
      Vec3 z = legs[leg].z0 + s * (legs[leg].z1 - legs[leg].z0);
      if (opt.noise > 0.0) {
        p += opt.noise * rng.normal3();
        z += opt.noise * rng.normal3();
      }
      PoseSample sample;
      sample.t = static_cast<double>(demo.samples.size()) * opt.dt;
      sample.p = p;
      sample.q = exp_map({q_att, basis * z});
      demo.samples.push_back(sample);
      labels.push_back(static_cast<int>(leg));
    }
  }
}

}  // namespace detail

/// Two straight legs whose orientation changes about orthogonal axes, 90
/// degrees each. All demos share the path and differ by noise only.
[[nodiscard]] inline SyntheticSet two_segment(const GenerateOptions& opt) {
  SyntheticSet out;
  out.task = Task::kTwoSegment;
  out.attractor_pos = Vec3(0.5, 0.0, 0.3);
  out.attractor_ori = UnitQuaternion::from_axis_angle(Vec3(0.2, 1.0, 0.3), 0.6);
  const double a = std::numbers::pi / 4.0;
  const Vec3& xs = out.attractor_pos;
  const std::vector<detail::Leg> legs = {
      {xs + Vec3(0.4, 0.3, 0.0), xs + Vec3(0.0, 0.3, 0.0), Vec3(a, 0.0, a),
       Vec3(0.0, 0.0, a)},
      {xs + Vec3(0.0, 0.3, 0.0), xs, Vec3(0.0, 0.0, a), Vec3::Zero()},
  };
  Rng rng(opt.seed);
  for (int d = 0; d < opt.demos; ++d) {
    Demonstration demo;
    demo.dt = opt.dt;
    std::vector<int> labels;
    detail::sample_legs(legs, out.attractor_ori, opt,
                        [](double u) { return detail::dwell_profile(u); },
                        rng, demo, labels);
    out.demos.push_back(std::move(demo));
    out.labels.push_back(std::move(labels));
  }
  return out;
}

/// Quarter-circle position arc ending at the attractor while rotating about
/// a fixed axis. Demos differ in arc radius and initial angle.
[[nodiscard]] inline SyntheticSet arc_rotate(const GenerateOptions& opt) {
  SyntheticSet out;
  out.task = Task::kArcRotate;
  out.attractor_pos = Vec3(0.4, 0.2, 0.25);
  out.attractor_ori =
      UnitQuaternion::from_axis_angle(Vec3(1.0, 0.0, 0.0), 0.4);
  const Vec3 axis = Vec3(0.3, -0.2, 1.0).normalized();
  const int n = 2 * opt.samples_per_segment - 1;
  Rng rng(opt.seed);
  for (int d = 0; d < opt.demos; ++d) {
    const double radius = 0.3 + 0.03 * (d - 1);
    const double angle = std::numbers::pi / 2.0 + 0.1 * (d - 1);
    Demonstration demo;
    demo.dt = opt.dt;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      const double s = detail::min_jerk(static_cast<double>(i) / (n - 1));
      const double phi = 0.5 * std::numbers::pi * (1.0 - s);
      Vec3 p = out.attractor_pos +
               radius * Vec3(std::sin(phi), std::cos(phi) - 1.0, 0.0);
      UnitQuaternion q =
          out.attractor_ori *
          UnitQuaternion::from_axis_angle(axis, angle * (1.0 - s));
      if (opt.noise > 0.0) {
        p += opt.noise * rng.normal3();
        q = exp_map({q, tangent_basis(q) * (opt.noise * rng.normal3())});
      }
      demo.samples.push_back({i * opt.dt, p, q});
      labels.push_back(0);
    }
    out.demos.push_back(std::move(demo));
    out.labels.push_back(std::move(labels));
  }
  return out;
}

/// A horizontal carrying leg with a small orientation change, then a
/// lowering leg that tilts the tool by about 80 degrees. Demos differ in the
/// carrying start point.
[[nodiscard]] inline SyntheticSet pour_like(const GenerateOptions& opt) {
  SyntheticSet out;
  out.task = Task::kPourLike;
  out.attractor_pos = Vec3(0.45, -0.1, 0.35);
  out.attractor_ori =
      UnitQuaternion::from_axis_angle(Vec3(0.0, 1.0, 0.2), -0.5);
  const Vec3& xs = out.attractor_pos;
  const Vec3 tilted(0.7, 0.0, 0.0);
  const Vec3 spout = xs + Vec3(0.0, 0.0, 0.2);
  Rng rng(opt.seed);
  for (int d = 0; d < opt.demos; ++d) {
    const Vec3 start = xs + Vec3(-0.35, 0.1 + 0.04 * (d - 1), 0.2);
    const std::vector<detail::Leg> legs = {
        {start, spout, tilted + Vec3(0.0, 0.2, 0.0), tilted},
        {spout, xs, tilted, Vec3::Zero()},
    };
    Demonstration demo;
    demo.dt = opt.dt;
    std::vector<int> labels;
    detail::sample_legs(legs, out.attractor_ori, opt,
                        [](double u) { return detail::dwell_profile(u); },
                        rng, demo, labels);
    out.demos.push_back(std::move(demo));
    out.labels.push_back(std::move(labels));
  }
  return out;
}

[[nodiscard]] inline SyntheticSet generate(Task task,
                                           const GenerateOptions& opt) {
  if (opt.demos < 1 || opt.samples_per_segment < 3 || !(opt.dt > 0.0) ||
      !(opt.noise >= 0.0)) {
    throw ValidationError("invalid generator options");
  }
  switch (task) {
    case Task::kArcRotate: return arc_rotate(opt);
    case Task::kTwoSegment: return two_segment(opt);
    case Task::kPourLike: return pour_like(opt);
  }
  throw ValidationError("unknown task");
}

}  // namespace se3ds::synthetic
