#pragma once

#include <cstddef>
#include <vector>

#include "se3ds/quaternion.hpp"

namespace se3ds {

struct PoseSample {
  double t = 0.0;  ///< seconds
  Vec3 p = Vec3::Zero();  ///< meters
  UnitQuaternion q;
};

/// One demonstrated pose trajectory. Timestamps are strictly increasing.
/// Trajectories are assumed not to self-intersect (not checked).
struct Demonstration {
  std::vector<PoseSample> samples;
  double dt = 0.0;  ///< nominal sample period
};

/// Target pose of a policy.
struct AttractorPose {
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;
};

/// Regression data derived from demonstrations. All orientation features and
/// targets live in the tangent space of `attractor_ori`.
struct PreprocessedDataset {
  Vec3 attractor_pos = Vec3::Zero();
  UnitQuaternion attractor_ori;
  double dt = 0.0;

  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  /// Sign-canonicalized sample orientations.
  std::vector<UnitQuaternion> orientations;
  /// log_{q_att}(q_i).
  std::vector<Vec4> features;
  /// Desired one-step displacement transported to q_att.
  std::vector<Vec4> targets;
  /// Demonstration each sample came from.
  std::vector<std::size_t> demo_index;
  /// Sample index within its demonstration, scaled to [0, 1].
  std::vector<double> progress;

  [[nodiscard]] std::size_t size() const { return features.size(); }
};

}  // namespace se3ds
