#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hrm/dqn/trainer.hpp"
#include "hrm/model/hrm_model.hpp"
#include "hrm/numerics/tensor.hpp"
#include "hrm/run/config.hpp"

namespace hrm::run {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  num::Tensor value;
};

/// On-disk contents: configuration text plus named float tensors.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_block;
  std::vector<NamedTensor> tensors;

  const num::Tensor* find(const std::string& name) const;
};

/// Little-endian layout: "HRMA", u32 version, u32 config length, config
/// bytes, u32 tensor count, then per tensor u32 name length, name, u32 rank,
/// u32 dims, f32 data.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Full trainer state: config with counters and RNG state as `state.*` lines,
/// online and target parameters, z0 and optimizer moments.
Checkpoint snapshot_trainer(const RunConfig& config, const dqn::Trainer& trainer);

/// A trained agent restored from a checkpoint.
struct RestoredAgent {
  RunConfig config;
  std::map<std::string, std::string> state;
  model::HrmModel online;
  model::HrmModel target;
  num::AdamWState model_optimizer;
  num::AdamWState embedding_optimizer;
};

/// Checks every tensor name and shape against the embedded configuration.
RestoredAgent restore_agent(const Checkpoint& ckpt);

/// Rebuilds a checkpoint from restored state; equal to the original encoding.
Checkpoint snapshot_agent(const RestoredAgent& agent);

}  // namespace hrm::run
