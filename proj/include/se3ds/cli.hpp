#pragma once

// Command implementations behind the se3ds tool. Argument parsing lives in
// tools/se3ds.cpp; everything here throws se3ds::Error on failure.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "se3ds/ds_model.hpp"
#include "se3ds/errors.hpp"
#include "se3ds/evaluation.hpp"
#include "se3ds/io.hpp"
#include "se3ds/mixture.hpp"
#include "se3ds/rollout.hpp"
#include "se3ds/synthetic.hpp"

namespace se3ds::cli {

inline constexpr int kExitOk = 0;

[[nodiscard]] inline int exit_code(Error::Category category) {
  switch (category) {
    case Error::Category::kValidation: return 2;
    case Error::Category::kNumeric: return 3;
    case Error::Category::kIo: return 4;
  }
  return 1;
}

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() ||
      !std::isfinite(v)) {
    throw ParseError("bad number '" + std::string(s) + "' in " +
                     std::string(what));
  }
  return v;
}

template <typename Int>
Int to_int(std::string_view s, std::string_view what) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("bad integer '" + std::string(s) + "' in " +
                     std::string(what));
  }
  return v;
}

inline std::vector<double> numbers(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(part, what));
  return out;
}

}  // namespace detail

/// --seed wins; otherwise the SEED environment variable; otherwise 0.
[[nodiscard]] inline std::uint64_t resolve_seed(
    const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  const char* env = std::getenv("SEED");
  if (env == nullptr || *env == '\0') return 0;
  return detail::to_int<std::uint64_t>(env, "SEED");
}

/// "3" or "1..6".
[[nodiscard]] inline KRange parse_k_range(std::string_view s) {
  KRange r;
  const std::size_t dots = s.find("..");
  if (dots == std::string_view::npos) {
    r.min = r.max = detail::to_int<int>(s, "k-range");
  } else {
    r.min = detail::to_int<int>(s.substr(0, dots), "k-range");
    r.max = detail::to_int<int>(s.substr(dots + 2), "k-range");
  }
  if (r.min < 1 || r.max < r.min) {
    throw ValidationError("k-range must satisfy 1 <= min <= max");
  }
  return r;
}

/// "step:dx,dy,dz" with an optional ":axis,angle" rotation, where axis is
/// x, y, z or three components and angle is in radians.
[[nodiscard]] inline Perturbation parse_perturbation(std::string_view spec) {
  const auto parts = detail::split(spec, ':');
  if (parts.size() != 2 && parts.size() != 3) {
    throw ParseError("perturbation '" + std::string(spec) +
                     "' must look like step:dx,dy,dz[:axis,angle]");
  }
  Perturbation p;
  p.step = detail::to_int<int>(parts[0], "perturbation step");
  const auto d = detail::numbers(parts[1], "perturbation offset");
  if (d.size() != 3) throw ParseError("perturbation offset needs dx,dy,dz");
  p.delta_p = Vec3(d[0], d[1], d[2]);
  if (parts.size() == 3) {
    const auto rot = detail::split(parts[2], ',');
    Vec3 axis;
    double angle = 0.0;
    if (rot.size() == 2) {
      if (rot[0] == "x") {
        axis = Vec3::UnitX();
      } else if (rot[0] == "y") {
        axis = Vec3::UnitY();
      } else if (rot[0] == "z") {
        axis = Vec3::UnitZ();
      } else {
        throw ParseError("rotation axis must be x, y, z or ax,ay,az");
      }
      angle = detail::to_double(rot[1], "perturbation angle");
    } else if (rot.size() == 4) {
      axis = Vec3(detail::to_double(rot[0], "perturbation axis"),
                  detail::to_double(rot[1], "perturbation axis"),
                  detail::to_double(rot[2], "perturbation axis"));
      angle = detail::to_double(rot[3], "perturbation angle");
      if (axis.norm() < 1e-12) throw ValidationError("rotation axis is zero");
    } else {
      throw ParseError("perturbation rotation must be axis,angle");
    }
    p.delta_q = UnitQuaternion::from_axis_angle(axis, angle);
  }
  return p;
}

/// "px,py,pz,qw,qx,qy,qz".
[[nodiscard]] inline AttractorPose parse_pose(std::string_view s) {
  const auto v = detail::numbers(s, "pose");
  if (v.size() != 7) throw ParseError("pose needs px,py,pz,qw,qx,qy,qz");
  const Vec4 q(v[3], v[4], v[5], v[6]);
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    throw ValidationError("pose quaternion is not unit length");
  }
  return {Vec3(v[0], v[1], v[2]), UnitQuaternion(q)};
}

[[nodiscard]] inline std::vector<Scenario> parse_scenarios(std::string_view s) {
  std::vector<Scenario> out;
  for (const auto& part : detail::split(s, ',')) {
    out.push_back(parse_scenario(part));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string task = "two-segment";
  double noise = 0.005;
  int demos = 3;
  int samples_per_segment = 250;
  double dt = 0.01;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

inline int cmd_generate(const GenerateArgs& args, std::ostream& log) {
  synthetic::GenerateOptions opt;
  opt.demos = args.demos;
  opt.samples_per_segment = args.samples_per_segment;
  opt.dt = args.dt;
  opt.noise = args.noise;
  opt.seed = args.seed;
  const auto set = synthetic::generate(synthetic::parse_task(args.task), opt);
  io::save_trajectories(args.out, set.demos);
  std::size_t n = 0;
  for (const auto& d : set.demos) n += d.samples.size();
  log << "wrote " << set.demos.size() << " demos (" << n << " samples) of "
      << args.task << " to " << args.out.string() << "\n";
  return kExitOk;
}

struct LearnArgs {
  std::filesystem::path data;
  std::string mode = "se3";
  std::string k_range = "1..6";
  std::uint64_t seed = 0;
  std::optional<std::string> attractor;
  int max_iterations = 5000;
  double epsilon = 1e-4;
  std::filesystem::path out;
};

struct LearnOutcome {
  Se3Policy policy;
  io::TrainingInfo training;
  double seconds = 0.0;
};

/// preprocess, mixture fit and constrained regression.
[[nodiscard]] inline LearnOutcome learn_from_file(const LearnArgs& args) {
  const MixtureMode mode = parse_mixture_mode(args.mode);
  const KRange range = parse_k_range(args.k_range);
  std::optional<AttractorPose> attractor;
  if (args.attractor) attractor = parse_pose(*args.attractor);
  const auto demos = io::load_trajectories(args.data);

  const auto t0 = std::chrono::steady_clock::now();
  const PreprocessedDataset data = preprocess(demos, attractor);
  const MixtureModel mixture = fit_mixture(data, mode, range, args.seed);
  LearnOptions opt;
  opt.max_iterations = args.max_iterations;
  opt.epsilon = args.epsilon;
  LearnOutcome out;
  out.policy = learn(data, mixture, opt);
  out.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  out.training.seed = args.seed;
  out.training.k_range = range;
  return out;
}

inline int cmd_learn(const LearnArgs& args, std::ostream& log) {
  const LearnOutcome r = learn_from_file(args);
  io::save_model(args.out, r.policy, r.training);
  log << "K=" << r.policy.size() << " mode=" << to_string(r.policy.mixture.mode())
      << " residual_ori=" << r.policy.residual_ori
      << " residual_pos=" << r.policy.residual_pos
      << " converged=" << (r.policy.converged ? "true" : "false")
      << " time=" << r.seconds << "s\n";
  return kExitOk;
}

struct RolloutArgs {
  std::filesystem::path model;
  std::optional<std::string> start;
  std::optional<int> from_demo;
  std::optional<std::filesystem::path> data;
  std::vector<std::string> perturbations;
  std::optional<double> dt;
  int max_steps = 5000;
  double tol_pos = 1e-2;
  double tol_ori = 1e-2;
  std::filesystem::path out;
};

inline int cmd_rollout(const RolloutArgs& args, std::ostream& log) {
  if (args.start.has_value() == args.from_demo.has_value()) {
    throw ValidationError("give exactly one of --start or --from-demo");
  }
  if (args.from_demo && !args.data) {
    throw ValidationError("--from-demo needs --data");
  }
  RolloutConfig config;
  for (const auto& spec : args.perturbations) {
    config.perturbations.push_back(parse_perturbation(spec));
  }
  const io::ModelFile model = io::load_model(args.model);
  config.dt = args.dt.value_or(model.policy.dt);
  config.max_steps = args.max_steps;
  config.convergence_tol_pos = args.tol_pos;
  config.convergence_tol_ori = args.tol_ori;

  Pose start;
  if (args.start) {
    const AttractorPose p = parse_pose(*args.start);
    start = {p.position, p.orientation};
  } else {
    const auto demos = io::load_trajectories(*args.data);
    const int i = *args.from_demo;
    if (i < 0 || static_cast<std::size_t>(i) >= demos.size() ||
        demos[static_cast<std::size_t>(i)].samples.empty()) {
      throw ValidationError("--from-demo " + std::to_string(i) +
                            " is out of range");
    }
    const auto& s = demos[static_cast<std::size_t>(i)].samples.front();
    start = {s.p, s.q};
  }

  const RolloutTrace trace = run(model.policy, start, config);
  io::save_trace(args.out, trace, model.policy.size());
  log << "status=" << to_string(trace.status) << " steps=" << trace.steps;
  if (!trace.rows.empty()) {
    const auto& last = trace.rows.back();
    log << " pos_err=" << (last.p - model.policy.attractor_pos).norm()
        << " ori_err=" << rotation_distance(last.q, model.policy.attractor_ori);
  }
  log << "\n";
  if (trace.status == RolloutStatus::kError) {
    log << "error: " << trace.error << "\n";
    return exit_code(Error::Category::kNumeric);
  }
  return kExitOk;
}

struct EvalArgs {
  std::filesystem::path model;
  std::filesystem::path data;
  std::string scenarios = "from-demo-start,unmodeled-start,perturbed";
  int trials = 10;
  std::uint64_t seed = 0;
  double perturbation = 0.1;
  int max_steps = 5000;
  std::filesystem::path out;
};

inline int cmd_eval(const EvalArgs& args, std::ostream& log) {
  EvalConfig config;
  config.scenarios = parse_scenarios(args.scenarios);
  config.trials = args.trials;
  config.seed = args.seed;
  config.perturbation = args.perturbation;
  config.max_steps = args.max_steps;
  if (config.trials < 0) throw ValidationError("trials must be >= 0");
  const io::ModelFile model = io::load_model(args.model);
  const auto demos = io::load_trajectories(args.data);
  const EvalResult result = evaluate(model.policy, demos, config);
  io::write_atomic(args.out, eval_to_json(result, config).dump(1) + "\n");
  for (const auto& s : result.summaries) {
    log << to_string(s.scenario) << ": trials=" << s.trials
        << " converged=" << s.converged
        << " quat_err_median=" << s.quat_err.median
        << " dtw_per_pair_median=" << s.dtw_per_pair.median << "\n";
  }
  return kExitOk;
}

}  // namespace se3ds::cli
