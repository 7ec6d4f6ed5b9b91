#include "hrm/dqn/replay_buffer.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_set>

#include "hrm/error.hpp"

namespace hrm::dqn {

namespace {

std::uint16_t to_bf16(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  u += 0x7FFFu + ((u >> 16) & 1u);  // round to nearest even
  return static_cast<std::uint16_t>(u >> 16);
}

float from_bf16(std::uint16_t b) {
  const std::uint32_t u = static_cast<std::uint32_t>(b) << 16;
  float f;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

}  // namespace

CompactLatent CompactLatent::from(const model::LatentState& z) {
  CompactLatent c;
  c.bits.reserve(z.z_l.numel() + z.z_h.numel());
  for (float v : z.z_l.data()) c.bits.push_back(to_bf16(v));
  for (float v : z.z_h.data()) c.bits.push_back(to_bf16(v));
  return c;
}

model::LatentState CompactLatent::expand(std::size_t hidden) const {
  const std::size_t half = bits.size() / 2;
  if (hidden == 0 || half % hidden != 0) throw DimensionError("compact latent does not match hidden size");
  model::LatentState z{num::Tensor({half / hidden, hidden}), num::Tensor({half / hidden, hidden})};
  for (std::size_t i = 0; i < half; ++i) {
    z.z_l[i] = from_bf16(bits[i]);
    z.z_h[i] = from_bf16(bits[half + i]);
  }
  return z;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  ++pushed_;
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[cursor_] = std::move(t);
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::oldest(std::size_t i) const {
  if (i >= items_.size()) throw UsageError("replay index out of range");
  return items_.size() < capacity_ ? items_[i] : items_[(cursor_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  const std::size_t n = items_.size();
  if (count > n) throw UsageError("cannot sample " + std::to_string(count) + " of " + std::to_string(n));
  std::vector<std::size_t> out;
  out.reserve(count);
  std::unordered_set<std::size_t> chosen;
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    const std::size_t pick = chosen.count(t) ? j : t;
    chosen.insert(pick);
    out.push_back(pick);
  }
  return out;
}

}  // namespace hrm::dqn
