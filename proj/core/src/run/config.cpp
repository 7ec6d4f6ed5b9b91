#include "hrm/run/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "hrm/error.hpp"

namespace hrm::run {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const std::string& why) {
  throw ConfigError(std::string(key) + ": " + why + " (got '" + std::string(value) + "')");
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T out{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec == std::errc::result_out_of_range) bad_value(key, text, "value out of range");
  if (ec != std::errc() || ptr != last || first == last) bad_value(key, text, "not a valid number");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, text, "value must be finite");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  bad_value(key, text, "expected true or false");
}

template <typename T>
std::string number_text(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Range {
  double lo, hi;
  bool lo_open = false, hi_open = false;
};

template <typename T>
void check_range(std::string_view key, std::string_view text, T v, Range r) {
  const double d = static_cast<double>(v);
  const bool ok = (r.lo_open ? d > r.lo : d >= r.lo) && (r.hi_open ? d < r.hi : d <= r.hi);
  if (!ok) {
    std::ostringstream os;
    os << "value out of range " << (r.lo_open ? '(' : '[') << r.lo << ", " << r.hi << (r.hi_open ? ')' : ']');
    bad_value(key, text, os.str());
  }
}

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Field {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field number(std::string name, std::string doc, Access access, Range range) {
  Field f;
  f.key = {name, std::move(doc)};
  f.set = [name, access, range](RunConfig& c, std::string_view v) {
    const T x = parse_number<T>(name, v);
    check_range(name, v, x, range);
    access(c) = x;
  };
  f.get = [access](const RunConfig& c) { return number_text(access(const_cast<RunConfig&>(c))); };
  return f;
}

template <typename Access>
Field boolean(std::string name, std::string doc, Access access) {
  Field f;
  f.key = {name, std::move(doc)};
  f.set = [name, access](RunConfig& c, std::string_view v) { access(c) = parse_bool(name, v); };
  f.get = [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); };
  return f;
}

template <typename T, typename Access>
Field choice(std::string name, std::string doc, Access access, std::vector<std::pair<std::string, T>> options) {
  Field f;
  f.key = {name, std::move(doc)};
  f.set = [name, access, options](RunConfig& c, std::string_view v) {
    for (const auto& [text, value] : options) {
      if (text == v) {
        access(c) = value;
        return;
      }
    }
    std::string expected;
    for (const auto& o : options) expected += (expected.empty() ? "" : "|") + o.first;
    bad_value(name, v, "expected one of " + expected);
  };
  f.get = [access, options](const RunConfig& c) {
    for (const auto& [text, value] : options) {
      if (value == access(const_cast<RunConfig&>(c))) return text;
    }
    return std::string("?");
  };
  return f;
}

#define FIELD(expr) [](RunConfig& c) -> auto& { return expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using grid::EnvKind;
    using model::LatentMode;
    std::vector<Field> f;
    const Range positive{0, kInf, true};
    const Range probability{0, 1};
    // environment
    f.push_back(choice<EnvKind>("env", "environment: four_rooms or random_maze", FIELD(c.env.kind),
                                {{"four_rooms", EnvKind::FourRooms}, {"random_maze", EnvKind::RandomMaze}}));
    f.push_back(number<int>("observation_tokens", "cells per observation (fixed 11x11 grid)",
                            FIELD(c.model.seq_len), {121, 121}));
    f.push_back(number<int>("action_space", "number of actions (fixed)", FIELD(c.model.action_count), {4, 4}));
    f.push_back(number<int>("max_episode_steps", "episode step limit", FIELD(c.env.max_episode_steps),
                            {1, 1e6}));
    f.push_back(number<double>("door_toggle_p", "per-step door change probability", FIELD(c.env.door_toggle_p),
                               probability));
    f.push_back(boolean("doors_enabled", "false keeps every door open and static", FIELD(c.env.doors_enabled)));
    f.push_back(number<int>("maze_random_walls", "random maze: wall segments", FIELD(c.env.n_random_walls),
                            {0, 40}));
    f.push_back(number<int>("maze_random_doors", "random maze: door segments", FIELD(c.env.n_doors), {0, 40}));
    f.push_back(number<float>("bump_penalty", "reward for walking into an obstacle", FIELD(c.env.bump_penalty),
                              {-1e6, 1e6}));
    f.push_back(number<float>("goal_reward", "reward on reaching the goal", FIELD(c.env.goal_reward),
                              {-1e6, 1e6}));
    // model
    f.push_back(number<int>("hidden_size", "transformer width", FIELD(c.model.hidden_size), {2, 4096}));
    f.push_back(number<int>("recurrent_max_steps", "segments per environment step",
                            FIELD(c.model.recurrent_max_steps), {1, 1024}));
    f.push_back(number<int>("h_cycles", "H updates per segment", FIELD(c.model.h_cycles), {1, 1024}));
    f.push_back(number<int>("l_cycles", "L updates per H update", FIELD(c.model.l_cycles), {1, 1024}));
    f.push_back(number<int>("h_layers", "blocks in the H module", FIELD(c.model.h_layers), {1, 1024}));
    f.push_back(number<int>("l_layers", "blocks in the L module", FIELD(c.model.l_layers), {1, 1024}));
    f.push_back(number<int>("heads", "attention heads", FIELD(c.model.heads), {1, 1024}));
    f.push_back(number<int>("expansion", "MLP width multiplier", FIELD(c.model.expansion), {1, 64}));
    // optimizers
    f.push_back(number<float>("model_lr", "model optimizer learning rate", FIELD(c.trainer.model_optimizer.lr),
                              positive));
    f.push_back(number<float>("model_beta1", "model optimizer beta 1", FIELD(c.trainer.model_optimizer.beta1),
                              {0, 1, false, true}));
    f.push_back(number<float>("model_beta2", "model optimizer beta 2", FIELD(c.trainer.model_optimizer.beta2),
                              {0, 1, false, true}));
    f.push_back(number<float>("model_weight_decay", "model optimizer weight decay",
                              FIELD(c.trainer.model_optimizer.weight_decay), {0, kInf}));
    f.push_back(number<float>("embedding_lr", "embedding optimizer learning rate",
                              FIELD(c.trainer.embedding_optimizer.lr), positive));
    f.push_back(number<float>("embedding_beta1", "embedding optimizer beta 1",
                              FIELD(c.trainer.embedding_optimizer.beta1), {0, 1, false, true}));
    f.push_back(number<float>("embedding_beta2", "embedding optimizer beta 2",
                              FIELD(c.trainer.embedding_optimizer.beta2), {0, 1, false, true}));
    f.push_back(number<float>("embedding_weight_decay", "embedding optimizer weight decay",
                              FIELD(c.trainer.embedding_optimizer.weight_decay), {0, kInf}));
    // dqn
    f.push_back(number<std::size_t>("batch_size", "training batch size", FIELD(c.trainer.batch_size),
                                    {1, 1e9}));
    f.push_back(number<float>("dqn_gamma", "discount factor", FIELD(c.trainer.gamma), {0, 1, true, true}));
    f.push_back(number<double>("dqn_epsilon_initial", "exploration rate at step 0",
                               FIELD(c.trainer.epsilon.initial), probability));
    f.push_back(number<double>("dqn_epsilon_final", "exploration rate after decay",
                               FIELD(c.trainer.epsilon.final_value), probability));
    f.push_back(number<std::int64_t>("dqn_epsilon_decay", "env steps of linear epsilon decay",
                                     FIELD(c.trainer.epsilon.decay_steps), {0, 1e15}));
    f.push_back(boolean("dqn_use_target_network", "bootstrap from a Polyak-averaged copy",
                        FIELD(c.trainer.use_target_network)));
    f.push_back(number<float>("dqn_target_delay", "target network delay factor", FIELD(c.trainer.target_delay),
                              {0, 1, true, true}));
    f.push_back(number<int>("collector_workers", "acting threads", FIELD(c.trainer.collector_workers),
                            {1, 256}));
    f.push_back(number<std::size_t>("collector_size", "replay capacity in transitions",
                                    FIELD(c.trainer.replay_capacity), {1, 1e12}));
    f.push_back(number<int>("collector_update_interval", "batches between snapshot refreshes",
                            FIELD(c.trainer.collector_update_interval), {1, 1e9}));
    f.push_back(number<int>("env_steps_per_batch", "collected env steps per gradient batch",
                            FIELD(c.trainer.env_steps_per_batch), {1, 1e9}));
    f.push_back(number<std::size_t>("learning_starts", "replay size before the first batch",
                                    FIELD(c.trainer.learning_starts), {0, 1e12}));
    f.push_back(number<std::size_t>("micro_batch", "rows per backward pass; gradients accumulate over the batch",
                                    FIELD(c.trainer.micro_batch), {1, 1e12}));
    f.push_back(choice<dqn::ReplayLatent>("replay_latent", "stored: replay the collection-time latent; reset: z0",
                                          FIELD(c.trainer.replay_latent),
                                          {{"stored", dqn::ReplayLatent::Stored}, {"reset", dqn::ReplayLatent::Reset}}));
    // run
    f.push_back(choice<LatentMode>("variant", "latent initialisation: carry_z or reset_z", FIELD(c.variant),
                                   {{"carry_z", LatentMode::CarryZ}, {"reset_z", LatentMode::ResetZ}}));
    f.push_back(number<std::uint64_t>("seed", "master seed", FIELD(c.seed), {0, 1.9e19}));
    Field out;
    out.key = {"out", "output directory"};
    out.set = [](RunConfig& c, std::string_view v) {
      if (v.empty()) bad_value("out", v, "must not be empty");
      c.out_dir = std::string(v);
    };
    out.get = [](const RunConfig& c) { return c.out_dir; };
    f.push_back(std::move(out));
    f.push_back(number<std::int64_t>("steps", "training budget in env steps", FIELD(c.steps), {0, 1e15}));
    f.push_back(number<std::int64_t>("validation_interval", "env steps between validation rows",
                                     FIELD(c.validation_interval), {1, 1e15}));
    f.push_back(number<int>("validation_episodes", "greedy episodes per validation row",
                            FIELD(c.validation_episodes), {1, 1e9}));
    f.push_back(number<std::int64_t>("checkpoint_interval", "env steps between checkpoints",
                                     FIELD(c.checkpoint_interval), {1, 1e15}));
    f.push_back(number<int>("probe_episodes", "greedy episodes per variant in a probe run",
                            FIELD(c.probe_episodes), {1, 1e9}));
    return f;
  }();
  return table;
}

#undef FIELD

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key.name == key) return f;
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

dqn::TrainingOptions RunConfig::training_options() const {
  dqn::TrainingOptions o;
  o.env = env;
  o.model = model;
  o.trainer = trainer;
  o.variant = variant;
  o.seed = seed;
  o.total_env_steps = steps;
  o.validation_interval = validation_interval;
  o.validation_episodes = validation_episodes;
  o.checkpoint_interval = checkpoint_interval;
  return o;
}

void RunConfig::validate() const {
  model.validate();
  env.validate();
  trainer.validate();
  if (trainer.epsilon.final_value > trainer.epsilon.initial) {
    throw ConfigError("dqn_epsilon_final must not exceed dqn_epsilon_initial");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_value(RunConfig& config, std::string_view key, std::string_view value) {
  find_field(key).set(config, value);
}

std::string get_value(const RunConfig& config, std::string_view key) { return find_field(key).get(config); }

RunConfig parse_config(std::string_view text, RunConfig base, std::map<std::string, std::string>* state) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + body + "'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.rfind("state.", 0) == 0 && state) {
      (*state)[key] = value;
      continue;
    }
    try {
      set_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key.name + " = " + f.get(config) + "\n";
  return out;
}

std::string format_documented_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += "# " + f.key.doc + "\n" + f.key.name + " = " + f.get(config) + "\n";
  return out;
}

std::string default_out_dir() {
  const char* env = std::getenv("HRM_AGENT_OUT");
  return env && *env ? std::string(env) : std::string("runs");
}

}  // namespace hrm::run
