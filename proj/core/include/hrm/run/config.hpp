#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hrm/dqn/trainer.hpp"
#include "hrm/gridworld/maze.hpp"
#include "hrm/model/hrm_model.hpp"

namespace hrm::run {

/// Every tunable of a run. Defaults reproduce the reference hyperparameters.
struct RunConfig {
  grid::EnvConfig env;
  model::ModelConfig model;
  dqn::TrainerConfig trainer;
  model::LatentMode variant = model::LatentMode::CarryZ;
  std::uint64_t seed = 1;
  std::string out_dir = "runs";
  std::int64_t steps = 2000000;
  std::int64_t validation_interval = 10000;
  int validation_episodes = 100;
  std::int64_t checkpoint_interval = 50000;
  int probe_episodes = 200;

  dqn::TrainingOptions training_options() const;
  /// Cross-field checks; single values are range-checked when set.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string doc;
};

/// All accepted keys in file order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its text form. Throws ConfigError for unknown keys,
/// unparsable values or out-of-range values.
void set_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_value(const RunConfig& config, std::string_view key);

/// Parses `key = value` lines over `base`. `#` starts a comment.
/// Keys with the `state.` prefix are returned in `state` when given, and
/// rejected otherwise.
RunConfig parse_config(std::string_view text, RunConfig base = {},
                       std::map<std::string, std::string>* state = nullptr);
RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// Canonical text: one `key = value` line per key, no comments. Parsing the
/// result gives back an equal configuration.
std::string format_config(const RunConfig& config);
/// As format_config, with each key's documentation as a comment.
std::string format_documented_config(const RunConfig& config);

/// `HRM_AGENT_OUT` when set, else "runs".
std::string default_out_dir();

}  // namespace hrm::run
