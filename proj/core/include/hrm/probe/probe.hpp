#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hrm/gridworld/maze.hpp"
#include "hrm/model/hrm_model.hpp"
#include "hrm/probe/record.hpp"

namespace hrm::probe {

/// Mean of squared elementwise differences.
double mse(const num::Tensor& a, const num::Tensor& b);

enum class Level { L, H };
std::string to_string(Level level);

struct Condition {
  model::LatentMode variant = model::LatentMode::CarryZ;
  bool env_changed = false;

  /// carry_z_changed, carry_z_unchanged, reset_z_changed, reset_z_unchanged
  std::string label() const;
  friend bool operator==(const Condition&, const Condition&) = default;
};

inline constexpr std::array<Condition, 4> kConditions{{{model::LatentMode::CarryZ, true},
                                                       {model::LatentMode::CarryZ, false},
                                                       {model::LatentMode::ResetZ, true},
                                                       {model::LatentMode::ResetZ, false}}};

/// Per-record distances: convergence[i] = mse(z^(i+1), z^T) for i < T-1 and
/// divergence[i] = mse(z^(i+1), z^1) for i < T.
struct DistanceRecord {
  Condition condition;
  int step = 0;
  std::array<std::vector<double>, 2> convergence;  // indexed by Level
  std::array<std::vector<double>, 2> divergence;
};

DistanceRecord distances(const ProbeRecord& record);

struct ConditionSeries {
  Condition condition;
  Level level = Level::L;
  std::vector<double> median;  // one value per recurrent step, step 1 first
  std::size_t n_samples = 0;

  bool empty() const { return n_samples == 0; }
};

/// Lower median: element (n-1)/2 of the sorted values. NaN when empty.
double lower_median(std::vector<double> values);

ConditionSeries convergence_series(std::span<const ProbeRecord> records, Level level, Condition condition);
ConditionSeries divergence_series(std::span<const ProbeRecord> records, Level level, Condition condition);
ConditionSeries convergence_series(std::span<const DistanceRecord> records, Level level, Condition condition);
ConditionSeries divergence_series(std::span<const DistanceRecord> records, Level level, Condition condition);

/// A trained network together with the latent variant it uses.
struct ProbeSubject {
  const model::HrmModel* model = nullptr;
  model::LatentMode variant = model::LatentMode::CarryZ;
};

struct ProbeResult {
  std::vector<ConditionSeries> convergence;  // non-empty conditions only
  std::vector<ConditionSeries> divergence;
  std::size_t records = 0;
  std::size_t carry_checks = 0;
  std::size_t carry_violations = 0;  // CarryZ steps whose z_init differs from the previous z_final

  const ConditionSeries* find(bool convergence_kind, Level level, Condition condition) const;
};

/// Greedy episodes for each subject. The first step of an episode has no
/// previous step and is left out of the condition buckets.
ProbeResult run_probe(std::span<const ProbeSubject> subjects, const grid::EnvConfig& env, int episodes,
                      std::uint64_t seed);

/// Columns: condition,level,recurrent_step,median_mse,n_samples
void write_probe_csv(std::ostream& out, std::span<const ConditionSeries> series);

/// Line chart of one level: solid CarryZ, dashed ResetZ, log-scaled y axis.
std::string render_svg(std::span<const ConditionSeries> series, Level level, const std::string& title);

/// Writes convergence.csv, divergence.csv and the four SVG files into `dir`.
void write_probe_outputs(const ProbeResult& result, const std::string& dir);

}  // namespace hrm::probe
