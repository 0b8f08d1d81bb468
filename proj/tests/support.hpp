#pragma once

#include <cmath>
#include <numbers>

#include "se3ds/manifold.hpp"
#include "se3ds/random.hpp"

namespace se3ds::testing {

/// Random unit tangent direction at p.
inline Vec4 random_tangent_direction(const UnitQuaternion& p, Rng& rng) {
  return tangent_basis(p) * rng.unit3();
}

/// q at geodesic distance in [0, max_angle) from p.
inline UnitQuaternion random_near(const UnitQuaternion& p, double max_angle,
                                  Rng& rng) {
  const double a = rng.uniform(0.0, max_angle);
  return exp_map({p, a * random_tangent_direction(p, rng)});
}

/// Random pair at distance below pi - 1e-3.
inline std::pair<UnitQuaternion, UnitQuaternion> random_pair(Rng& rng) {
  const UnitQuaternion p = rng.uniform_quaternion();
  return {p, random_near(p, std::numbers::pi - 1e-3, rng)};
}

inline double max_abs(const Vec4& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace se3ds::testing
