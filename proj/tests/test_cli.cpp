#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "se3ds/cli.hpp"

using namespace se3ds;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

class CliTool : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "se3ds_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string file(const std::string& name) {
    return (dir_ / name).string();
  }

  static Result run(const std::string& args, const std::string& env = "") {
    const std::string log = file("stdout.txt");
    const std::string cmd = env + " \"" SE3DS_TOOL "\" " + args + " > \"" + log +
                            "\" 2> \"" + file("stderr.txt") + "\"";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    r.out.assign(std::istreambuf_iterator<char>(in), {});
    return r;
  }

  static std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  static const std::string& dataset() {
    static const std::string path = [] {
      const std::string p = file("two_segment.json");
      const Result r = run("generate --task two-segment --samples-per-segment 100 "
                           "--seed 3 --out " + p);
      EXPECT_EQ(r.code, 0);
      return p;
    }();
    return path;
  }

  static const std::string& model() {
    static const std::string path = [] {
      const std::string p = file("model.json");
      const Result r = run("learn --data " + dataset() + " --k-range 1..4 --out " + p);
      EXPECT_EQ(r.code, 0);
      EXPECT_NE(r.out.find("K=2 "), std::string::npos) << r.out;
      return p;
    }();
    return path;
  }

  static inline fs::path dir_;
};

}  // namespace

TEST(Parsers, KRange) {
  EXPECT_EQ(cli::parse_k_range("3").min, 3);
  EXPECT_EQ(cli::parse_k_range("3").max, 3);
  const KRange r = cli::parse_k_range("1..6");
  EXPECT_EQ(r.min, 1);
  EXPECT_EQ(r.max, 6);
  EXPECT_THROW((void)cli::parse_k_range("0"), ValidationError);
  EXPECT_THROW((void)cli::parse_k_range("4..2"), ValidationError);
  EXPECT_THROW((void)cli::parse_k_range("a..2"), Error);
  EXPECT_THROW((void)cli::parse_k_range(""), Error);
}

TEST(Parsers, Perturbation) {
  const Perturbation a = cli::parse_perturbation("120:0.1,0,-0.05");
  EXPECT_EQ(a.step, 120);
  EXPECT_EQ(a.delta_p, Vec3(0.1, 0.0, -0.05));
  EXPECT_EQ(a.delta_q.coeffs(), UnitQuaternion().coeffs());

  const Perturbation b = cli::parse_perturbation("5:0,0,0:z,0.4");
  EXPECT_LT(rotation_distance(b.delta_q,
                              UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.4)),
            1e-15);
  const Perturbation c = cli::parse_perturbation("5:0,0,0:1,1,0,0.3");
  EXPECT_LT(rotation_distance(
                c.delta_q, UnitQuaternion::from_axis_angle(Vec3(1, 1, 0), 0.3)),
            1e-15);

  EXPECT_THROW((void)cli::parse_perturbation("5"), ParseError);
  EXPECT_THROW((void)cli::parse_perturbation("5:1,2"), ParseError);
  EXPECT_THROW((void)cli::parse_perturbation("5:1,2,3:w,0.1"), ParseError);
  EXPECT_THROW((void)cli::parse_perturbation("5:1,2,3:0,0,0,0.1"), ValidationError);
  EXPECT_THROW((void)cli::parse_perturbation("x:1,2,3"), Error);
}

TEST(Parsers, Pose) {
  const AttractorPose p = cli::parse_pose("1,2,3,0,0,1,0");
  EXPECT_EQ(p.position, Vec3(1, 2, 3));
  EXPECT_EQ(p.orientation.coeffs(), Vec4(0, 0, 1, 0));
  EXPECT_THROW((void)cli::parse_pose("1,2,3,1,1,0,0"), ValidationError);
  EXPECT_THROW((void)cli::parse_pose("1,2,3"), ParseError);
}

TEST(Parsers, Scenarios) {
  const auto s = cli::parse_scenarios("perturbed,from-demo-start");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], Scenario::kPerturbed);
  EXPECT_EQ(s[1], Scenario::kFromDemoStart);
  EXPECT_THROW((void)cli::parse_scenarios("perturbed,bogus"), ValidationError);
}

TEST(Parsers, ExitCodes) {
  EXPECT_EQ(cli::exit_code(Error::Category::kValidation), 2);
  EXPECT_EQ(cli::exit_code(Error::Category::kNumeric), 3);
  EXPECT_EQ(cli::exit_code(Error::Category::kIo), 4);
}

TEST(Parsers, SeedResolution) {
  ::setenv("SEED", "77", 1);
  EXPECT_EQ(cli::resolve_seed(std::nullopt), 77u);
  EXPECT_EQ(cli::resolve_seed(5), 5u);
  ::setenv("SEED", "nope", 1);
  EXPECT_THROW((void)cli::resolve_seed(std::nullopt), Error);
  ::unsetenv("SEED");
  EXPECT_EQ(cli::resolve_seed(std::nullopt), 0u);
}

TEST_F(CliTool, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("learn --out x.json").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTool, GenerateIsDeterministic) {
  const std::string a = file("gen_a.json"), b = file("gen_b.json"),
                    c = file("gen_c.json");
  ASSERT_EQ(run("generate --task arc-rotate --seed 12 --out " + a).code, 0);
  ASSERT_EQ(run("generate --task arc-rotate --out " + b, "SEED=12").code, 0);
  ASSERT_EQ(run("generate --task arc-rotate --seed 13 --out " + c).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
  EXPECT_EQ(run("generate --task sideways --out " + file("bad.json")).code, 2);
}

TEST_F(CliTool, LearnErrors) {
  EXPECT_EQ(run("learn --data " + file("absent.json") + " --out " +
                file("m.json"))
                .code,
            4);
  std::ofstream(file("broken.json")) << "{\"dt\": 0.1, \"demos\": [";
  EXPECT_EQ(run("learn --data " + file("broken.json") + " --out " +
                file("never.json"))
                .code,
            2);
  EXPECT_FALSE(fs::exists(file("never.json")));
  EXPECT_EQ(run("learn --data " + dataset() + " --mode other --out " +
                file("never.json"))
                .code,
            2);
  EXPECT_FALSE(fs::exists(file("never.json")));
}

TEST_F(CliTool, LearnIsReproducibleAndRecordsMode) {
  const std::string again = file("model_again.json");
  ASSERT_EQ(run("learn --data " + dataset() + " --k-range 1..4 --out " + again).code,
            0);
  EXPECT_EQ(slurp(model()), slurp(again));
  const std::string quat = file("model_quat.json");
  const Result r = run("learn --data " + dataset() +
                       " --mode quat-only --k-range 2 --out " + quat);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("mode=quat-only"), std::string::npos);
  EXPECT_NE(slurp(model()).find("\"mode\": \"se3\""), std::string::npos);
  EXPECT_NE(slurp(quat).find("\"mode\": \"quat-only\""), std::string::npos);
}

TEST_F(CliTool, RolloutWritesTrace) {
  const std::string trace = file("trace.csv");
  const Result r = run("rollout --model " + model() + " --from-demo 0 --data " +
                       dataset() + " --perturb 50:0.05,0,0 --out " + trace);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("status=converged"), std::string::npos) << r.out;
  const std::string csv = slurp(trace);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,gamma_1,gamma_2,V,dV");

  EXPECT_EQ(run("rollout --model " + model() + " --from-demo 0 --out " + trace).code,
            2);
  EXPECT_EQ(run("rollout --model " + model() + " --out " + trace).code, 2);
  EXPECT_EQ(run("rollout --model " + model() +
                " --start 0,0,0,1,0,0,0 --perturb 9:0,0,0 --max-steps 5 --out " +
                trace)
                .code,
            2);
}

TEST_F(CliTool, EvalWithoutTrialsIsEmpty) {
  const std::string report = file("report.json");
  ASSERT_EQ(run("eval --model " + model() + " --data " + dataset() +
                " --trials 0 --out " + report)
                .code,
            0);
  const auto json = nlohmann::json::parse(slurp(report));
  ASSERT_TRUE(json.contains("reports"));
  EXPECT_TRUE(json["reports"].empty());
}

TEST_F(CliTool, EvalReportsEveryScenario) {
  const std::string report = file("report_full.json");
  const Result r = run("eval --model " + model() + " --data " + dataset() +
                       " --trials 2 --seed 1 --out " + report);
  ASSERT_EQ(r.code, 0);
  for (const char* name : {"from-demo-start", "unmodeled-start", "perturbed"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << r.out;
  }
  const auto json = nlohmann::json::parse(slurp(report));
  EXPECT_EQ(json["reports"].size(), 6u);
}
