#pragma once

#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "se3ds/dataset.hpp"
#include "se3ds/manifold.hpp"
#include "se3ds/random.hpp"

namespace se3ds::testing {

/// Single-component ground truth. The orientation map acts on attractor
/// tangent coordinates; its 4x4 form is B A B^T - q q^T.
struct PlantedModel {
  Mat3 a_tangent;
  Mat3 a_pos;
  Vec3 attractor_pos;
  UnitQuaternion attractor_ori;

  [[nodiscard]] Mat4 a_ori() const {
    const auto b = tangent_basis(attractor_ori);
    const Vec4 q = attractor_ori.coeffs();
    return b * a_tangent * b.transpose() - q * q.transpose();
  }
};

inline PlantedModel default_planted() {
  PlantedModel m;
  Mat3 skew;
  skew << 0.0, 0.03, -0.02, -0.03, 0.0, 0.01, 0.02, -0.01, 0.0;
  Mat3 sym;
  sym << -0.12, 0.01, 0.0, 0.01, -0.09, 0.015, 0.0, 0.015, -0.15;
  m.a_tangent = sym + skew;
  Mat3 pskew;
  pskew << 0.0, 0.2, 0.0, -0.2, 0.0, 0.1, 0.0, -0.1, 0.0;
  Mat3 psym;
  psym << -0.8, 0.1, 0.05, 0.1, -0.5, 0.0, 0.05, 0.0, -1.0;
  m.a_pos = psym + pskew;
  m.attractor_pos = Vec3(0.3, -0.2, 0.5);
  m.attractor_ori = UnitQuaternion::from_axis_angle(Vec3(0.5, -1.0, 0.2), 0.9);
  return m;
}

/// Noiseless demos from the planted dynamics: orientation by the discrete
/// map, position by the exact flow of the linear system.
inline std::vector<Demonstration> planted_demos(const PlantedModel& m,
                                                int demos, int samples,
                                                double dt, std::uint64_t seed) {
  Rng rng(seed);
  const auto b = tangent_basis(m.attractor_ori);
  const Mat4 a4 = m.a_ori();
  std::vector<Demonstration> out;
  for (int d = 0; d < demos; ++d) {
    Demonstration demo;
    demo.dt = dt;
    UnitQuaternion q =
        exp_map({m.attractor_ori, b * (rng.uniform(0.6, 1.2) * rng.unit3())});
    const Vec3 e0 = rng.uniform(0.2, 0.4) * rng.unit3();
    for (int i = 0; i < samples; ++i) {
      const double t = i * dt;
      const Mat3 flow = (m.a_pos * t).exp();
      demo.samples.push_back({t, m.attractor_pos + flow * e0, q});
      const Vec4 x = log_map(m.attractor_ori, q).v;
      const TangentVector step = TangentVector::projected(m.attractor_ori, a4 * x);
      q = exp_map(parallel_transport(step, q));
    }
    out.push_back(std::move(demo));
  }
  return out;
}

}  // namespace se3ds::testing
