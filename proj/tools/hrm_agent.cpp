// hrm_agent: train, evaluate, probe and render recurrent DQN agents.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hrm/error.hpp"
#include "hrm/run/commands.hpp"
#include "hrm/run/config.hpp"

namespace {

using hrm::run::RunConfig;

struct CommonFlags {
  std::string config_path;
  std::string env, variant, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<int> workers;
  std::optional<int> episodes;
  std::vector<std::string> sets;
  std::vector<std::string> checkpoints;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_steps) {
  cmd->add_option("--config", f.config_path, "flat key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--env", f.env, "four_rooms or random_maze")
      ->check(CLI::IsMember({"four_rooms", "random_maze"}));
  cmd->add_option("--variant", f.variant, "carry_z or reset_z")->check(CLI::IsMember({"carry_z", "reset_z"}));
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory (default: $HRM_AGENT_OUT or ./runs)");
  cmd->add_option("--set", f.sets, "extra key=value override, repeatable");
  if (with_steps) {
    cmd->add_option("--steps", f.steps, "training budget in env steps");
    cmd->add_option("--workers", f.workers, "collector threads (1 = deterministic)");
  }
}

// defaults < checkpoint config < --config file < flags < --set
RunConfig resolve(const CommonFlags& f, std::optional<RunConfig> from_checkpoint, const char* episodes_key) {
  RunConfig cfg = from_checkpoint.value_or(RunConfig{});
  if (!from_checkpoint) cfg.out_dir = hrm::run::default_out_dir();
  if (!f.config_path.empty()) cfg = hrm::run::load_config_file(f.config_path, cfg);
  if (!f.env.empty()) hrm::run::set_value(cfg, "env", f.env);
  if (!f.variant.empty()) hrm::run::set_value(cfg, "variant", f.variant);
  if (f.seed) cfg.seed = *f.seed;
  if (f.steps) hrm::run::set_value(cfg, "steps", std::to_string(*f.steps));
  if (f.workers) hrm::run::set_value(cfg, "collector_workers", std::to_string(*f.workers));
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.episodes && episodes_key) hrm::run::set_value(cfg, episodes_key, std::to_string(*f.episodes));
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw hrm::ConfigError("--set expects key=value, got '" + s + "'");
    auto trim = [](std::string t) {
      t.erase(0, t.find_first_not_of(' '));
      t.erase(t.find_last_not_of(' ') + 1);
      return t;
    };
    hrm::run::set_value(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

std::optional<RunConfig> checkpoint_config(const std::vector<std::string>& checkpoints) {
  if (checkpoints.empty()) return std::nullopt;
  return hrm::run::restore_agent(hrm::run::load_checkpoint(checkpoints.front())).config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent-latent DQN agent for dynamic gridworlds"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, probe_f, render_f;

  auto* train = app.add_subcommand("train", "train an agent; writes metrics.csv and checkpoints");
  add_common(train, train_f, true);

  auto* eval = app.add_subcommand("eval", "greedy validation episodes");
  add_common(eval, eval_f, false);
  eval->add_option("--checkpoint", eval_f.checkpoints, "trained checkpoint (default: untrained model)")
      ->expected(0, 1)
      ->check(CLI::ExistingFile);
  eval->add_option("--episodes", eval_f.episodes, "number of episodes");

  auto* probe = app.add_subcommand("probe", "latent convergence/divergence analysis");
  add_common(probe, probe_f, false);
  probe->add_option("--checkpoint", probe_f.checkpoints, "checkpoint to probe, repeatable")
      ->required()
      ->check(CLI::ExistingFile);
  probe->add_option("--episodes", probe_f.episodes, "episodes per checkpoint");

  auto* render = app.add_subcommand("render", "print one greedy episode as ASCII");
  add_common(render, render_f, false);
  render->add_option("--checkpoint", render_f.checkpoints, "trained checkpoint (default: untrained model)")
      ->expected(0, 1)
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const RunConfig cfg = resolve(train_f, std::nullopt, nullptr);
      const auto summary = hrm::run::run_train(cfg, std::cout);
      std::cout << "trained " << summary.env_steps << " env steps, " << summary.batches << " batches; checkpoint "
                << summary.final_checkpoint << '\n';
    } else if (*eval) {
      const RunConfig cfg = resolve(eval_f, checkpoint_config(eval_f.checkpoints), "validation_episodes");
      const std::optional<std::string> ckpt =
          eval_f.checkpoints.empty() ? std::nullopt : std::optional(eval_f.checkpoints.front());
      const auto r = hrm::run::run_eval(cfg, ckpt, cfg.validation_episodes);
      std::printf("episodes %d  success_frac %.4f  mean_ep_len %.3f\n", r.episodes, r.success_frac, r.mean_ep_len);
    } else if (*probe) {
      const RunConfig cfg = resolve(probe_f, checkpoint_config(probe_f.checkpoints), "probe_episodes");
      const auto r =
          hrm::run::run_probe_command(probe_f.checkpoints, cfg.env, cfg.probe_episodes, cfg.seed, cfg.out_dir);
      std::printf("probe: %zu records, carry fidelity %zu/%zu exact; wrote %s\n", r.records,
                  r.carry_checks - r.carry_violations, r.carry_checks, cfg.out_dir.c_str());
      for (const auto& s : r.convergence) {
        std::printf("  %-18s %s  n=%-6zu step1 median mse %.6g\n", s.condition.label().c_str(),
                    hrm::probe::to_string(s.level).c_str(), s.n_samples, s.median.front());
      }
      if (r.carry_violations != 0) return 3;
    } else if (*render) {
      const RunConfig cfg = resolve(render_f, checkpoint_config(render_f.checkpoints), nullptr);
      const std::optional<std::string> ckpt =
          render_f.checkpoints.empty() ? std::nullopt : std::optional(render_f.checkpoints.front());
      hrm::run::run_render(cfg, ckpt, std::cout);
    }
  } catch (const hrm::Error& e) {
    std::cerr << "hrm_agent: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "hrm_agent: unexpected failure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
