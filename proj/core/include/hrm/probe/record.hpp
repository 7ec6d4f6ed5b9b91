#pragma once

#include <cstdint>
#include <optional>

#include "hrm/model/hrm_model.hpp"

namespace hrm::probe {

/// Recurrent trace of one environment step, labelled for bucketing.
struct ProbeRecord {
  std::uint64_t episode = 0;
  int step = 0;
  model::LatentMode variant = model::LatentMode::CarryZ;
  bool env_changed = false;  // doors changed since the previous step
  model::RecurrentTrace trace;
  model::LatentState z_init;
  std::optional<model::LatentState> previous_final;  // carried-from latent, when any
};

}  // namespace hrm::probe
