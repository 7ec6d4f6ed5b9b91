#include "hrm/run/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include "hrm/error.hpp"

namespace hrm::run {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEvalStream = 3;
constexpr std::uint64_t kProbeStream = 4;
constexpr std::uint64_t kRenderStream = 5;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

model::HrmModel load_or_init(const RunConfig& config, const std::optional<std::string>& checkpoint) {
  if (!checkpoint) return model::HrmModel(config.model, config.seed);
  RestoredAgent agent = restore_agent(load_checkpoint(*checkpoint));
  if (!(agent.config.model == config.model)) {
    throw CheckpointError("checkpoint '" + *checkpoint + "' was trained with a different model shape");
  }
  return std::move(agent.online);
}

}  // namespace

void write_resolved_config(const RunConfig& config, const std::string& dir) {
  fs::create_directories(dir);
  auto out = open_out(fs::path(dir) / "config_resolved");
  out << format_documented_config(config);
}

TrainSummary run_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir(config.out_dir);
  fs::create_directories(dir / "checkpoints");
  write_resolved_config(config, config.out_dir);
  auto csv_file = open_out(dir / "metrics.csv");
  dqn::MetricsCsvWriter csv(csv_file);

  TrainSummary summary;
  dqn::Trainer trainer(config.training_options());
  const auto start = std::chrono::steady_clock::now();
  auto on_metrics = [&](const dqn::TrainMetrics& m) {
    csv.write(m);
    summary.rows.push_back(m);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[200];
    std::snprintf(buf, sizeof buf, "step %lld  batches %lld  eps %.3f  success %.3f  len %.2f  loss %.5f  %.0fs",
                  static_cast<long long>(m.env_steps), static_cast<long long>(m.batches), m.epsilon,
                  m.success_frac, m.mean_ep_len, m.mean_loss, secs);
    log << buf << std::endl;
  };
  auto on_checkpoint = [&](const dqn::Trainer& t, bool final) {
    char name[64];
    std::snprintf(name, sizeof name, "step_%09lld.hrma", static_cast<long long>(t.env_steps()));
    const fs::path path = final ? dir / "final.hrma" : dir / "checkpoints" / name;
    save_checkpoint(path.string(), snapshot_trainer(config, t));
    if (final) summary.final_checkpoint = path.string();
  };
  trainer.run(on_metrics, on_checkpoint);
  summary.env_steps = trainer.env_steps();
  summary.batches = trainer.learner().batches();
  return summary;
}

dqn::ValidationResult run_eval(const RunConfig& config, const std::optional<std::string>& checkpoint, int episodes) {
  config.validate();
  const model::HrmModel net = load_or_init(config, checkpoint);
  return dqn::validate(net, config.env, config.variant, episodes, dqn::derive_seed(config.seed, kEvalStream));
}

probe::ProbeResult run_probe_command(const std::vector<std::string>& checkpoints, const grid::EnvConfig& env,
                                     int episodes, std::uint64_t seed, const std::string& out_dir) {
  if (checkpoints.empty()) throw UsageError("probe needs at least one --checkpoint");
  std::vector<RestoredAgent> agents;
  for (const auto& path : checkpoints) {
    agents.push_back(restore_agent(load_checkpoint(path)));
    if (agents.back().config.env.kind != env.kind) {
      throw CheckpointError("checkpoint '" + path + "' was trained on " + dqn::to_string(agents.back().config.env.kind) +
                            ", probe requested " + dqn::to_string(env.kind));
    }
  }
  std::vector<probe::ProbeSubject> subjects;
  for (const auto& a : agents) subjects.push_back({&a.online, a.config.variant});
  probe::ProbeResult result = probe::run_probe(subjects, env, episodes, dqn::derive_seed(seed, kProbeStream));
  probe::write_probe_outputs(result, out_dir);
  return result;
}

void run_render(const RunConfig& config, const std::optional<std::string>& checkpoint, std::ostream& out) {
  config.validate();
  auto net = std::make_shared<const model::HrmModel>(load_or_init(config, checkpoint));
  dqn::Collector c(config.env, dqn::derive_seed(config.seed, kRenderStream), config.variant, false);
  c.set_snapshot(net);
  static const char* kNames[] = {"north", "south", "east", "west"};
  for (;;) {
    const dqn::Transition t = c.step(0.0, dqn::ActionMode::Validate);
    if (t.step == 0) out << "t=0\n" << grid::render_ascii(t.obs) << '\n';
    out << "t=" << t.step + 1 << "  action " << kNames[t.action] << "  reward " << t.reward
        << (t.env_changed ? "  doors changed" : "") << '\n'
        << grid::render_ascii(t.next_obs) << '\n';
    if (const auto& e = c.last_episode()) {
      out << (e->success ? "reached the goal" : "step limit reached") << " after " << e->length << " steps\n";
      return;
    }
  }
}

}  // namespace hrm::run
