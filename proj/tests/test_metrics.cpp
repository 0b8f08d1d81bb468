#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "se3ds/metrics.hpp"
#include "se3ds/random.hpp"

using namespace se3ds;

namespace {

/// Minimum over every monotone (0,0)->(n-1,m-1) path, by exhaustive search.
double brute_force_dtw(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk =
      [&](std::size_t i, std::size_t j, double cost) {
        cost += (a[i] - b[j]).norm();
        if (i + 1 == a.size() && j + 1 == b.size()) {
          best = std::min(best, cost);
          return;
        }
        if (i + 1 < a.size()) walk(i + 1, j, cost);
        if (j + 1 < b.size()) walk(i, j + 1, cost);
        if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, cost);
      };
  walk(0, 0, 0.0);
  return best;
}

std::vector<Vec3> line(std::initializer_list<double> xs) {
  std::vector<Vec3> out;
  for (double x : xs) out.emplace_back(x, 0.0, 0.0);
  return out;
}

}  // namespace

TEST(Dtw, IdenticalSequencesCostZero) {
  const auto a = line({0.0, 0.5, 1.0, 2.0});
  const DtwResult r = dtw_position(a, a);
  EXPECT_EQ(r.cost, 0.0);
  ASSERT_EQ(r.path.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(r.path[i], std::make_pair(i, i));
  }
}

TEST(Dtw, RepeatedSamplesCostZero) {
  const auto a = line({0.0, 1.0, 2.0});
  const auto b = line({0.0, 0.0, 1.0, 2.0, 2.0});
  EXPECT_EQ(dtw_position(a, b).cost, 0.0);
}

TEST(Dtw, HandComputedExample) {
  const auto a = line({0.0, 1.0, 2.0});
  const auto b = line({0.0, 2.0});
  // Best alignment (0,0) (1,0) (2,1) or (0,0) (1,1) (2,1): each costs 1.
  const DtwResult r = dtw_position(a, b);
  EXPECT_DOUBLE_EQ(r.cost, 1.0);
  EXPECT_NO_THROW(validate_path(r.path, a.size(), b.size()));
}

TEST(Dtw, OrthogonalStepsEndOnDiagonalPair) {
  const std::vector<Vec3> a = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const std::vector<Vec3> b = {Vec3(0, 0, 0), Vec3(0, 1, 0)};
  // Every path ends on the last pair, so the cost is |(1,0,0) - (0,1,0)|.
  EXPECT_DOUBLE_EQ(dtw_position(a, b).cost, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(brute_force_dtw(a, b), std::sqrt(2.0));
}

TEST(Dtw, MatchesExhaustiveSearch) {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 5, m = 1 + (trial / 5) % 6;
    std::vector<Vec3> a, b;
    for (int i = 0; i < n; ++i) a.push_back(rng.normal3());
    for (int j = 0; j < m; ++j) b.push_back(rng.normal3());
    const DtwResult r = dtw_position(a, b);
    EXPECT_NEAR(r.cost, brute_force_dtw(a, b), 1e-12);
    validate_path(r.path, a.size(), b.size());
    double along = 0.0;
    for (const auto& [i, j] : r.path) along += (a[i] - b[j]).norm();
    EXPECT_NEAR(along, r.cost, 1e-12);
  }
}

TEST(Dtw, Symmetric) {
  Rng rng(18);
  std::vector<Vec3> a, b;
  for (int i = 0; i < 30; ++i) a.push_back(rng.normal3());
  for (int i = 0; i < 45; ++i) b.push_back(rng.normal3());
  EXPECT_NEAR(dtw_position(a, b).cost, dtw_position(b, a).cost, 1e-12);
}

TEST(Dtw, EmptyInputThrows) {
  const std::vector<Vec3> empty;
  const auto a = line({1.0});
  EXPECT_THROW((void)dtw_position(empty, a), EmptySequence);
  EXPECT_THROW((void)dtw_position(a, empty), EmptySequence);
}

TEST(QuaternionError, SignInvariant) {
  Rng rng(19);
  std::vector<UnitQuaternion> a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(rng.uniform_quaternion());
    b.push_back(-a.back());
  }
  AlignmentPath path;
  for (std::size_t i = 0; i < a.size(); ++i) path.emplace_back(i, i);
  EXPECT_LT(quaternion_error(a, b, path), 1e-7);
}

TEST(QuaternionError, ConstantOffset) {
  const double angle = 10.0 * std::numbers::pi / 180.0;
  const UnitQuaternion off = UnitQuaternion::from_axis_angle(Vec3(1, -1, 2), angle);
  Rng rng(20);
  std::vector<UnitQuaternion> a, b;
  for (int i = 0; i < 8; ++i) {
    a.push_back(rng.uniform_quaternion());
    b.push_back(a.back() * off);
  }
  AlignmentPath path;
  for (std::size_t i = 0; i < a.size(); ++i) path.emplace_back(i, i);
  EXPECT_NEAR(quaternion_error(a, b, path), angle, 1e-9);
}

TEST(QuaternionError, InvalidPaths) {
  const std::vector<UnitQuaternion> a(3), b(2);
  EXPECT_THROW((void)quaternion_error(a, b, {}), InvalidPath);
  EXPECT_THROW((void)quaternion_error(a, b, {{0, 0}, {2, 0}, {2, 1}}), InvalidPath);
  EXPECT_THROW((void)quaternion_error(a, b, {{0, 0}, {1, 1}}), InvalidPath);
  EXPECT_THROW((void)quaternion_error(a, b, {{0, 0}, {1, 1}, {1, 0}, {2, 1}}),
               InvalidPath);
  EXPECT_THROW((void)quaternion_error(a, b, {{0, 0}, {0, 0}, {1, 1}, {2, 1}}),
               InvalidPath);
  EXPECT_NO_THROW((void)quaternion_error(a, b, {{0, 0}, {1, 1}, {2, 1}}));
  const std::vector<UnitQuaternion> empty;
  EXPECT_THROW((void)quaternion_error(empty, b, {{0, 0}}), EmptySequence);
}

TEST(ArcLength, Polyline) {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(3, 4, 0), Vec3(3, 4, 1)};
  EXPECT_DOUBLE_EQ(arc_length(pts), 6.0);
  EXPECT_EQ(arc_length(std::vector<Vec3>{Vec3(1, 2, 3)}), 0.0);
}

TEST(Summarize, Quartiles) {
  const SummaryStats s = summarize({5.0, 1.0, 3.0, 2.0, 4.0});
  EXPECT_EQ(s.count, 5u);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.q1, 2.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.q3, 4.0);
  EXPECT_DOUBLE_EQ(s.max, 5.0);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);

  const SummaryStats e = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(e.q1, 1.75);
  EXPECT_DOUBLE_EQ(e.median, 2.5);
  EXPECT_DOUBLE_EQ(e.q3, 3.25);

  EXPECT_EQ(summarize({}).count, 0u);
}

TEST(ScenarioNames, RoundTrip) {
  for (const Scenario s :
       {Scenario::kFromDemoStart, Scenario::kUnmodeledStart, Scenario::kPerturbed}) {
    EXPECT_EQ(parse_scenario(to_string(s)), s);
  }
  EXPECT_THROW((void)parse_scenario("sideways"), ValidationError);
}
