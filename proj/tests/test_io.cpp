#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "se3ds/io.hpp"
#include "se3ds/rollout.hpp"
#include "se3ds/synthetic.hpp"
#include "support.hpp"

using namespace se3ds;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("se3ds_io_" + std::string(::testing::UnitTest::GetInstance()
                                          ->current_test_info()
                                          ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const fs::path& p, const std::string& text) const {
    std::ofstream(p) << text;
  }

  fs::path dir_;
};

Se3Policy train(MixtureMode mode) {
  synthetic::GenerateOptions opt;
  opt.seed = 4;
  opt.samples_per_segment = 100;
  const auto set = synthetic::generate(synthetic::Task::kTwoSegment, opt);
  const PreprocessedDataset data = preprocess(set.demos);
  return learn(data, fit_mixture(data, mode, KRange{2, 2}, 4), {});
}

const Se3Policy& coupled_policy() {
  static const Se3Policy p = train(MixtureMode::kCoupled);
  return p;
}

const Se3Policy& orientation_policy() {
  static const Se3Policy p = train(MixtureMode::kOrientation);
  return p;
}

}  // namespace

TEST_F(IoTest, TrajectoryRoundTrip) {
  synthetic::GenerateOptions opt;
  opt.seed = 9;
  const auto set = synthetic::generate(synthetic::Task::kArcRotate, opt);
  io::save_trajectories(path("demos.json"), set.demos);
  const auto back = io::load_trajectories(path("demos.json"));
  ASSERT_EQ(back.size(), set.demos.size());
  for (std::size_t d = 0; d < back.size(); ++d) {
    EXPECT_EQ(back[d].dt, set.demos[d].dt);
    ASSERT_EQ(back[d].samples.size(), set.demos[d].samples.size());
    for (std::size_t i = 0; i < back[d].samples.size(); ++i) {
      const auto& a = back[d].samples[i];
      const auto& b = set.demos[d].samples[i];
      EXPECT_EQ(a.t, b.t);
      EXPECT_EQ(a.p, b.p);
      EXPECT_EQ(a.q.coeffs(), b.q.coeffs());
    }
  }
  EXPECT_FALSE(fs::exists(path("demos.json.tmp")));
}

TEST_F(IoTest, TrajectoryValidation) {
  const std::string good_sample = R"({"t":0,"p":[0,0,0],"q":[1,0,0,0]})";
  write(path("norm.json"),
        R"({"dt":0.1,"demos":[[{"t":0,"p":[0,0,0],"q":[1,0.1,0,0]}]]})");
  EXPECT_THROW((void)io::load_trajectories(path("norm.json")), ValidationError);

  write(path("time.json"), R"({"dt":0.1,"demos":[[)" + good_sample + "," +
                               good_sample + "]]}");
  EXPECT_THROW((void)io::load_trajectories(path("time.json")), ValidationError);

  write(path("dt.json"), R"({"dt":0,"demos":[]})");
  EXPECT_THROW((void)io::load_trajectories(path("dt.json")), ValidationError);

  write(path("broken.json"), R"({"dt":0.1,"demos":[)");
  EXPECT_THROW((void)io::load_trajectories(path("broken.json")), ParseError);

  write(path("field.json"), R"({"dt":0.1,"demos":[[{"t":0,"q":[1,0,0,0]}]]})");
  EXPECT_THROW((void)io::load_trajectories(path("field.json")), ParseError);

  write(path("short.json"),
        R"({"dt":0.1,"demos":[[{"t":0,"p":[0,0],"q":[1,0,0,0]}]]})");
  EXPECT_THROW((void)io::load_trajectories(path("short.json")), Error);

  EXPECT_THROW((void)io::load_trajectories(path("missing.json")), IoError);
}

TEST_F(IoTest, NearUnitQuaternionIsRenormalized) {
  write(path("near.json"),
        R"({"dt":0.1,"demos":[[{"t":0,"p":[0,0,0],"q":[1.0000001,0,0,0]}]]})");
  const auto demos = io::load_trajectories(path("near.json"));
  EXPECT_NEAR(demos[0].samples[0].q.coeffs().norm(), 1.0, 1e-15);
}

TEST_F(IoTest, ModelRoundTripIsBitExact) {
  for (const Se3Policy* policy : {&coupled_policy(), &orientation_policy()}) {
    io::TrainingInfo info;
    info.seed = 4;
    info.k_range = {2, 2};
    io::save_model(path("model.json"), *policy, info);
    const io::ModelFile back = io::load_model(path("model.json"));
    io::save_model(path("again.json"), back.policy, back.training);
    EXPECT_EQ(io::read_file(path("model.json")), io::read_file(path("again.json")));
    EXPECT_EQ(back.training.seed, 4u);
    EXPECT_EQ(back.training.k_range.min, 2);

    Rng rng(31);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vec3 p = policy->attractor_pos + 0.4 * rng.normal3();
      const UnitQuaternion q =
          se3ds::testing::random_near(policy->attractor_ori, 2.5, rng);
      const Vec4 a = predict_orientation_step(*policy, p, q).v;
      const Vec4 b = predict_orientation_step(back.policy, p, q).v;
      const Vec3 va = predict_position_velocity(*policy, p, q);
      const Vec3 vb = predict_position_velocity(back.policy, p, q);
      worst = std::max({worst, (a - b).cwiseAbs().maxCoeff(),
                        (va - vb).cwiseAbs().maxCoeff()});
    }
    EXPECT_LE(worst, 1e-12);
  }
}

TEST_F(IoTest, ModeIsRecorded) {
  const io::Json a = io::model_to_json(coupled_policy(), {});
  const io::Json b = io::model_to_json(orientation_policy(), {});
  EXPECT_EQ(a["mode"], "se3");
  EXPECT_EQ(b["mode"], "quat-only");
  EXPECT_TRUE(a["components"][0].contains("mean_pos"));
  EXPECT_FALSE(b["components"][0].contains("mean_pos"));
  EXPECT_EQ(a["components"][0]["covariance"].size(), 49u);
  EXPECT_EQ(b["components"][0]["covariance"].size(), 16u);
}

TEST_F(IoTest, LoadRunsPolicyValidation) {
  io::Json model = io::model_to_json(coupled_policy(), {});
  model["A_pos"][0] = {1, 0, 0, 0, -1, 0, 0, 0, -1};
  write(path("unstable.json"), model.dump());
  EXPECT_THROW((void)io::load_model(path("unstable.json")), ValidationError);

  model = io::model_to_json(coupled_policy(), {});
  model["format"] = "something-else";
  write(path("format.json"), model.dump());
  EXPECT_THROW((void)io::load_model(path("format.json")), ParseError);

  model = io::model_to_json(coupled_policy(), {});
  model["K"] = 3;
  write(path("count.json"), model.dump());
  EXPECT_THROW((void)io::load_model(path("count.json")), DimensionMismatch);

  model = io::model_to_json(coupled_policy(), {});
  model["attractor"]["q"] = {1.0, 0.01, 0.0, 0.0};
  write(path("quat.json"), model.dump());
  EXPECT_THROW((void)io::load_model(path("quat.json")), ValidationError);
}

TEST_F(IoTest, TraceCsv) {
  const Se3Policy& policy = coupled_policy();
  RolloutConfig config;
  config.max_steps = 200;
  const RolloutTrace trace =
      run(policy, {policy.attractor_pos + Vec3(0.1, 0.1, 0.0),
                   UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.8)},
          config);
  io::save_trace(path("trace.csv"), trace, policy.size());
  const io::CsvTable table = io::load_trace(path("trace.csv"));
  EXPECT_EQ(io::trace_header(2),
            "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,gamma_1,gamma_2,V,dV");
  ASSERT_EQ(table.header.size(), 18u);
  ASSERT_EQ(table.rows.size(), trace.rows.size());
  const std::size_t g1 = table.column("gamma_1"), g2 = table.column("gamma_2");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    EXPECT_NEAR(row[g1] + row[g2], 1.0, 1e-12);
    EXPECT_EQ(row[table.column("px")], trace.rows[i].p.x());
    EXPECT_EQ(row[table.column("qw")], trace.rows[i].q.w());
    EXPECT_EQ(row[table.column("V")], trace.rows[i].V);
  }
  EXPECT_THROW((void)table.column("nope"), ParseError);
}

TEST_F(IoTest, CsvParseErrors) {
  EXPECT_THROW((void)io::parse_csv(""), ParseError);
  EXPECT_THROW((void)io::parse_csv("a,b\n1\n"), ParseError);
  EXPECT_THROW((void)io::parse_csv("a,b\n1,x\n"), ParseError);
  const io::CsvTable t = io::parse_csv("a,b\n1,2.5\n");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][1], 2.5);
}

TEST_F(IoTest, FormatDoubleRoundTrips) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20.0, 20.0));
    const std::string s = io::format_double(v);
    EXPECT_EQ(std::stod(s), v);
  }
}

TEST_F(IoTest, FailedWriteLeavesNothing) {
  const fs::path target = dir_ / "no_such_dir" / "model.json";
  EXPECT_THROW(io::write_atomic(target, "x"), IoError);
  EXPECT_FALSE(fs::exists(target));

  // An existing file is only replaced by a complete write.
  io::write_atomic(path("keep.txt"), "first");
  fs::create_directory(path("blocker"));
  EXPECT_THROW(io::write_atomic(path("blocker"), "second"), IoError);
  EXPECT_FALSE(fs::exists(path("blocker.tmp")));
  EXPECT_EQ(io::read_file(path("keep.txt")), "first");
}
