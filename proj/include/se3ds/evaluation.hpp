#pragma once

// Scenario evaluation of a learned policy against its demonstrations.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "se3ds/dataset.hpp"
#include "se3ds/ds_model.hpp"
#include "se3ds/errors.hpp"
#include "se3ds/metrics.hpp"
#include "se3ds/random.hpp"
#include "se3ds/rollout.hpp"

namespace se3ds {

struct BoundingBox {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  [[nodiscard]] Vec3 center() const { return 0.5 * (lo + hi); }
  [[nodiscard]] Vec3 extent() const { return hi - lo; }
};

[[nodiscard]] inline BoundingBox demo_bounding_box(
    std::span<const Demonstration> demos) {
  BoundingBox box;
  box.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  box.hi = -box.lo;
  bool any = false;
  for (const auto& d : demos) {
    for (const auto& s : d.samples) {
      box.lo = box.lo.cwiseMin(s.p);
      box.hi = box.hi.cwiseMax(s.p);
      any = true;
    }
  }
  if (!any) throw InsufficientData("no demonstration samples");
  return box;
}

/// Uniform position in the box scaled by `scale` about its center.
[[nodiscard]] inline Vec3 sample_in_box(const BoundingBox& box, double scale,
                                        Rng& rng) {
  const Vec3 c = box.center();
  const Vec3 h = 0.5 * scale * box.extent();
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = c[a] + h[a] * rng.uniform(-1.0, 1.0);
  return p;
}

/// Haar-uniform orientation at least `margin` away from the antipode of
/// `attractor` (on S^3, after hemisphere alignment).
[[nodiscard]] inline UnitQuaternion sample_orientation(
    const UnitQuaternion& attractor, Rng& rng, double margin = 1e-3) {
  for (;;) {
    const UnitQuaternion q = rng.uniform_quaternion();
    if (rotation_distance(q, attractor) < std::numbers::pi / 2.0 - margin) {
      return q;
    }
  }
}

struct EvalConfig {
  std::vector<Scenario> scenarios = {Scenario::kFromDemoStart,
                                     Scenario::kUnmodeledStart,
                                     Scenario::kPerturbed};
  int trials = 10;
  std::uint64_t seed = 0;
  double perturbation = 0.1;  ///< position offset magnitude (m)
  double box_scale = 2.0;
  int max_steps = 5000;
  double tol_pos = 1e-2;
  double tol_ori = 1e-2;
};

struct ScenarioSummary {
  Scenario scenario = Scenario::kFromDemoStart;
  SummaryStats dtw_pos, dtw_per_pair, quat_err;
  std::size_t converged = 0;
  std::size_t trials = 0;
};

struct EvalResult {
  std::vector<EvalReport> reports;
  std::vector<ScenarioSummary> summaries;
};

/// Scores `trace` against the demo with the lowest position DTW cost.
[[nodiscard]] inline EvalReport score_rollout(
    const RolloutTrace& trace, std::span<const Demonstration> demos) {
  if (trace.rows.empty()) throw EmptySequence("rollout trace is empty");
  std::vector<Vec3> tp;
  std::vector<UnitQuaternion> tq;
  for (const auto& r : trace.rows) {
    tp.push_back(r.p);
    tq.push_back(r.q);
  }
  EvalReport best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < demos.size(); ++d) {
    std::vector<Vec3> dp;
    std::vector<UnitQuaternion> dq;
    for (const auto& s : demos[d].samples) {
      dp.push_back(s.p);
      dq.push_back(s.q);
    }
    const DtwResult dtw = dtw_position(dp, tp);
    if (dtw.cost < best_cost) {
      best_cost = dtw.cost;
      best.demo = d;
      best.dtw_pos = dtw.cost;
      best.dtw_per_pair = dtw.cost / static_cast<double>(dtw.path.size());
      best.quat_err = quaternion_error(dq, tq, dtw.path);
    }
  }
  best.n_steps = trace.steps;
  best.converged = trace.status == RolloutStatus::kConverged;
  return best;
}

/// Runs `config.trials` rollouts per scenario. Trial i of from-demo-start and
/// perturbed starts at demo i mod N; perturbed adds one position offset at a
/// uniform step in [n/4, 3n/4] of that demo's length n.
[[nodiscard]] inline EvalResult evaluate(const Se3Policy& policy,
                                         std::span<const Demonstration> demos,
                                         const EvalConfig& config) {
  if (config.trials < 0) throw ValidationError("trials must be >= 0");
  if (!(config.perturbation >= 0.0) || !(config.box_scale > 0.0)) {
    throw ValidationError("invalid evaluation options");
  }
  if (demos.empty()) throw InsufficientData("evaluation needs demonstrations");
  for (const auto& d : demos) {
    if (d.samples.empty()) throw InsufficientData("empty demonstration");
  }
  const BoundingBox box = demo_bounding_box(demos);

  EvalResult out;
  for (const Scenario scenario : config.scenarios) {
    ScenarioSummary summary;
    summary.scenario = scenario;
    std::vector<double> dtw, per_pair, qerr;
    for (int trial = 0; trial < config.trials; ++trial) {
      Rng rng(config.seed * 1000003ULL +
              static_cast<std::uint64_t>(scenario) * 7919ULL +
              static_cast<std::uint64_t>(trial));
      const Demonstration& demo =
          demos[static_cast<std::size_t>(trial) % demos.size()];
      RolloutConfig rc;
      rc.dt = policy.dt;
      rc.max_steps = config.max_steps;
      rc.convergence_tol_pos = config.tol_pos;
      rc.convergence_tol_ori = config.tol_ori;
      Pose start{demo.samples.front().p, demo.samples.front().q};
      if (scenario == Scenario::kUnmodeledStart) {
        start.p = sample_in_box(box, config.box_scale, rng);
        start.q = sample_orientation(policy.attractor_ori, rng);
      } else if (scenario == Scenario::kPerturbed) {
        const int n = static_cast<int>(demo.samples.size());
        const int lo = n / 4, hi = std::max(lo, 3 * n / 4);
        Perturbation pert;
        pert.step = lo + static_cast<int>(rng.index(
                             static_cast<std::uint64_t>(hi - lo + 1)));
        pert.delta_p = config.perturbation * rng.unit3();
        if (pert.step < rc.max_steps) rc.perturbations.push_back(pert);
      }
      const RolloutTrace trace = run(policy, start, rc);
      if (trace.status == RolloutStatus::kError) {
        throw NoConvergence("rollout failed in " +
                            std::string(to_string(scenario)) + " trial " +
                            std::to_string(trial) + ": " + trace.error);
      }
      EvalReport report = score_rollout(trace, demos);
      report.scenario = scenario;
      report.trial = trial;
      dtw.push_back(report.dtw_pos);
      per_pair.push_back(report.dtw_per_pair);
      qerr.push_back(report.quat_err);
      summary.converged += report.converged ? 1 : 0;
      out.reports.push_back(report);
    }
    summary.trials = static_cast<std::size_t>(config.trials);
    summary.dtw_pos = summarize(dtw);
    summary.dtw_per_pair = summarize(per_pair);
    summary.quat_err = summarize(qerr);
    out.summaries.push_back(summary);
  }
  return out;
}

[[nodiscard]] inline nlohmann::json stats_to_json(const SummaryStats& s) {
  return {{"count", s.count}, {"min", s.min},       {"q1", s.q1},
          {"median", s.median}, {"q3", s.q3},       {"max", s.max},
          {"mean", s.mean}};
}

[[nodiscard]] inline nlohmann::json eval_to_json(const EvalResult& result,
                                                 const EvalConfig& config) {
  nlohmann::json root;
  root["seed"] = config.seed;
  root["trials"] = config.trials;
  root["perturbation"] = config.perturbation;
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : result.reports) {
    reports.push_back({{"scenario", std::string(to_string(r.scenario))},
                       {"trial", r.trial},
                       {"demo", r.demo},
                       {"dtw_pos", r.dtw_pos},
                       {"dtw_per_pair", r.dtw_per_pair},
                       {"quat_err", r.quat_err},
                       {"n_steps", r.n_steps},
                       {"converged", r.converged}});
  }
  root["reports"] = std::move(reports);
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& s : result.summaries) {
    summary[std::string(to_string(s.scenario))] = {
        {"trials", s.trials},
        {"converged", s.converged},
        {"dtw_pos", stats_to_json(s.dtw_pos)},
        {"dtw_per_pair", stats_to_json(s.dtw_per_pair)},
        {"quat_err", stats_to_json(s.quat_err)}};
  }
  root["summary"] = std::move(summary);
  return root;
}

}  // namespace se3ds
