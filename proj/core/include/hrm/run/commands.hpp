#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hrm/dqn/collector.hpp"
#include "hrm/probe/probe.hpp"
#include "hrm/run/checkpoint.hpp"
#include "hrm/run/config.hpp"

namespace hrm::run {

struct TrainSummary {
  std::int64_t env_steps = 0;
  std::int64_t batches = 0;
  std::vector<dqn::TrainMetrics> rows;
  std::string final_checkpoint;
};

/// Trains per `config`, writing into config.out_dir:
///   config_resolved, metrics.csv, checkpoints/step_<n>.hrma, final.hrma
/// Progress lines go to `log`.
TrainSummary run_train(const RunConfig& config, std::ostream& log);

/// Writes `config_resolved` into `dir`.
void write_resolved_config(const RunConfig& config, const std::string& dir);

/// Greedy episodes with the model from `checkpoint`, or an untrained model
/// seeded from config.seed.
dqn::ValidationResult run_eval(const RunConfig& config, const std::optional<std::string>& checkpoint, int episodes);

/// Probes each checkpoint on `env` and writes CSV and SVG files into out_dir.
/// Every checkpoint must have been trained on the same environment kind.
probe::ProbeResult run_probe_command(const std::vector<std::string>& checkpoints, const grid::EnvConfig& env,
                                     int episodes, std::uint64_t seed, const std::string& out_dir);

/// Prints one greedy episode as ASCII frames.
void run_render(const RunConfig& config, const std::optional<std::string>& checkpoint, std::ostream& out);

}  // namespace hrm::run
