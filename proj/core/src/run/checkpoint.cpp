#include "hrm/run/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

#include "hrm/error.hpp"

namespace hrm::run {

namespace {

constexpr char kMagic[4] = {'H', 'R', 'M', 'A'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats(float* dst, std::size_t n) {
    need(n * 4, "tensor data");
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::bit_cast<float>(u32("tensor data"));
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw CheckpointError(std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

const std::string kOnline = "online.";
const std::string kTarget = "target.";

void add_model(Checkpoint& c, const std::string& prefix, const model::HrmModel& m) {
  for (const auto& p : m.named_parameters()) c.tensors.push_back({prefix + p.name, p.var.value()});
  c.tensors.push_back({prefix + "z0.l", m.initial_latent().z_l});
  c.tensors.push_back({prefix + "z0.h", m.initial_latent().z_h});
}

void add_optimizer(Checkpoint& c, const std::string& prefix, const model::HrmModel& m,
                   const num::AdamWState& opt, bool embedding) {
  std::vector<std::string> names;
  for (const auto& p : m.named_parameters()) {
    if ((p.name == "embed.weight") == embedding) names.push_back(p.name);
  }
  if (names.size() != opt.m.size()) throw CheckpointError("optimizer state does not match parameters");
  for (std::size_t i = 0; i < names.size(); ++i) {
    c.tensors.push_back({prefix + "m." + names[i], opt.m[i]});
    c.tensors.push_back({prefix + "v." + names[i], opt.v[i]});
  }
}

std::string state_block(const std::map<std::string, std::string>& state) {
  std::string s;
  for (const auto& [k, v] : state) s += k + " = " + v + "\n";
  return s;
}

}  // namespace

const num::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put_u32(out, ckpt.version);
  put_u32(out, narrow(ckpt.config_block.size(), "config block"));
  out += ckpt.config_block;
  put_u32(out, narrow(ckpt.tensors.size(), "tensor count"));
  for (const auto& t : ckpt.tensors) {
    put_u32(out, narrow(t.name.size(), "tensor name"));
    out += t.name;
    put_u32(out, narrow(t.value.rank(), "rank"));
    for (std::size_t d : t.value.shape()) put_u32(out, narrow(d, "dimension"));
    for (float v : t.value.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (bytes.compare(0, 4, kMagic, 4) != 0) throw CheckpointError("bad magic: not an HRMA checkpoint");
  r.text(4, "magic");
  Checkpoint c;
  c.version = r.u32("version");
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  c.config_block = r.text(r.u32("config length"), "config block");
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.text(r.u32("name length"), "tensor name");
    const std::uint32_t rank = r.u32("rank");
    num::Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.u32("dimension"));
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    r.need(n * 4, "tensor data");
    t.value = num::Tensor(shape);
    r.floats(t.value.raw(), n);
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after the last tensor");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint into '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

Checkpoint snapshot_trainer(const RunConfig& config, const dqn::Trainer& trainer) {
  const dqn::Learner& l = trainer.learner();
  std::map<std::string, std::string> state{
      {"state.env_steps", std::to_string(trainer.env_steps())},
      {"state.batches", std::to_string(l.batches())},
      {"state.episodes", std::to_string(trainer.episodes())},
      {"state.model_optimizer_step", std::to_string(l.model_optimizer().step)},
      {"state.embedding_optimizer_step", std::to_string(l.embedding_optimizer().step)},
      {"state.sample_rng", rng_text(trainer.sample_rng())},
  };
  Checkpoint c;
  c.config_block = format_config(config) + state_block(state);
  add_model(c, kOnline, l.online());
  add_model(c, kTarget, l.target());
  add_optimizer(c, "optim.model.", l.online(), l.model_optimizer(), false);
  add_optimizer(c, "optim.embedding.", l.online(), l.embedding_optimizer(), true);
  return c;
}

RestoredAgent restore_agent(const Checkpoint& ckpt) {
  std::map<std::string, std::string> state;
  RunConfig config;
  try {
    config = parse_config(ckpt.config_block, RunConfig{}, &state);
    config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint configuration is invalid: ") + e.what());
  }
  RestoredAgent a{config, state, model::HrmModel(config.model, config.seed), model::HrmModel(config.model, config.seed),
                  {}, {}};

  std::size_t used = 0;
  auto take = [&](const std::string& name, num::Tensor& dst) {
    const num::Tensor* src = ckpt.find(name);
    if (!src) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    if (src->shape() != dst.shape()) {
      throw CheckpointError("shape mismatch for '" + name + "': checkpoint has " + num::shape_string(src->shape()) +
                            ", configuration expects " + num::shape_string(dst.shape()));
    }
    dst = *src;
    ++used;
  };
  for (auto [prefix, m] : {std::pair{&kOnline, &a.online}, std::pair{&kTarget, &a.target}}) {
    for (auto& p : m->named_parameters()) take(*prefix + p.name, p.var.value_mut());
    take(*prefix + "z0.l", m->initial_latent_mut().z_l);
    take(*prefix + "z0.h", m->initial_latent_mut().z_h);
  }
  auto step_of = [&](const char* key) -> std::int64_t {
    const auto it = state.find(key);
    return it == state.end() ? 0 : std::stoll(it->second);
  };
  a.model_optimizer = num::AdamWState(config.trainer.model_optimizer, a.online.body_parameters());
  a.embedding_optimizer = num::AdamWState(config.trainer.embedding_optimizer, a.online.embedding_parameters());
  a.model_optimizer.step = step_of("state.model_optimizer_step");
  a.embedding_optimizer.step = step_of("state.embedding_optimizer_step");
  for (auto [prefix, opt, embedding] : {std::tuple{"optim.model.", &a.model_optimizer, false},
                                        std::tuple{"optim.embedding.", &a.embedding_optimizer, true}}) {
    std::size_t i = 0;
    for (const auto& p : a.online.named_parameters()) {
      if ((p.name == "embed.weight") != embedding) continue;
      take(std::string(prefix) + "m." + p.name, opt->m[i]);
      take(std::string(prefix) + "v." + p.name, opt->v[i]);
      ++i;
    }
  }
  if (used != ckpt.tensors.size()) throw CheckpointError("checkpoint holds tensors the configuration does not expect");
  return a;
}

Checkpoint snapshot_agent(const RestoredAgent& agent) {
  Checkpoint c;
  c.config_block = format_config(agent.config) + state_block(agent.state);
  add_model(c, kOnline, agent.online);
  add_model(c, kTarget, agent.target);
  add_optimizer(c, "optim.model.", agent.online, agent.model_optimizer, false);
  add_optimizer(c, "optim.embedding.", agent.online, agent.embedding_optimizer, true);
  return c;
}

}  // namespace hrm::run
