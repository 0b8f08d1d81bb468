#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "se3ds/cli.hpp"

namespace {

namespace cli = se3ds::cli;

void add_seed(CLI::App* cmd, std::optional<std::uint64_t>& seed) {
  cmd->add_option("--seed", seed, "RNG seed (default: $SEED, else 0)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stable SE(3) motion policies from demonstrations"};
  app.require_subcommand(1);

  cli::GenerateArgs gen;
  std::optional<std::uint64_t> gen_seed;
  auto* generate = app.add_subcommand("generate", "write a synthetic dataset");
  generate->add_option("--task", gen.task, "arc-rotate | two-segment | pour-like")
      ->capture_default_str();
  generate->add_option("--noise", gen.noise, "noise std-dev (m, rad)")
      ->capture_default_str();
  generate->add_option("--demos", gen.demos)->capture_default_str();
  generate->add_option("--samples-per-segment", gen.samples_per_segment)
      ->capture_default_str();
  generate->add_option("--dt", gen.dt)->capture_default_str();
  generate->add_option("--out,-o", gen.out, "trajectory JSON")->required();
  add_seed(generate, gen_seed);

  cli::LearnArgs lrn;
  std::optional<std::uint64_t> lrn_seed;
  auto* learn = app.add_subcommand("learn", "fit a policy to a dataset");
  learn->add_option("--data,-d", lrn.data, "trajectory JSON")->required();
  learn->add_option("--mode", lrn.mode, "quat-only | se3")->capture_default_str();
  learn->add_option("--k-range", lrn.k_range, "K or Kmin..Kmax")
      ->capture_default_str();
  learn->add_option("--attractor", lrn.attractor,
                    "override attractor px,py,pz,qw,qx,qy,qz");
  learn->add_option("--max-iterations", lrn.max_iterations)
      ->capture_default_str();
  learn->add_option("--epsilon", lrn.epsilon)->capture_default_str();
  learn->add_option("--out,-o", lrn.out, "model JSON")->required();
  add_seed(learn, lrn_seed);

  cli::RolloutArgs roll;
  auto* rollout = app.add_subcommand("rollout", "simulate a learned policy");
  rollout->add_option("--model,-m", roll.model)->required();
  rollout->add_option("--start", roll.start, "px,py,pz,qw,qx,qy,qz");
  rollout->add_option("--from-demo", roll.from_demo, "start at demo i");
  rollout->add_option("--data,-d", roll.data, "trajectory JSON for --from-demo");
  rollout->add_option("--perturb", roll.perturbations,
                      "step:dx,dy,dz[:axis,angle] (repeatable)");
  rollout->add_option("--dt", roll.dt, "default: model dt");
  rollout->add_option("--max-steps", roll.max_steps)->capture_default_str();
  rollout->add_option("--tol-pos", roll.tol_pos)->capture_default_str();
  rollout->add_option("--tol-ori", roll.tol_ori)->capture_default_str();
  rollout->add_option("--out,-o", roll.out, "trace CSV")->required();

  cli::EvalArgs ev;
  std::optional<std::uint64_t> ev_seed;
  auto* eval = app.add_subcommand("eval", "score rollouts against demos");
  eval->add_option("--model,-m", ev.model)->required();
  eval->add_option("--data,-d", ev.data)->required();
  eval->add_option("--scenarios", ev.scenarios)->capture_default_str();
  eval->add_option("--trials", ev.trials)->capture_default_str();
  eval->add_option("--perturbation", ev.perturbation, "offset magnitude (m)")
      ->capture_default_str();
  eval->add_option("--max-steps", ev.max_steps)->capture_default_str();
  eval->add_option("--out,-o", ev.out, "report JSON")->required();
  add_seed(eval, ev_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::exit_code(se3ds::Error::Category::kValidation);
  }

  try {
    if (*generate) {
      gen.seed = cli::resolve_seed(gen_seed);
      return cli::cmd_generate(gen, std::cout);
    }
    if (*learn) {
      lrn.seed = cli::resolve_seed(lrn_seed);
      return cli::cmd_learn(lrn, std::cout);
    }
    if (*rollout) return cli::cmd_rollout(roll, std::cout);
    if (*eval) {
      ev.seed = cli::resolve_seed(ev_seed);
      return cli::cmd_eval(ev, std::cout);
    }
  } catch (const se3ds::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
