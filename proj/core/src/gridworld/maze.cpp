#include "hrm/gridworld/maze.hpp"

#include <algorithm>
#include <cstdlib>
#include <queue>
#include <tuple>

#include "hrm/error.hpp"

namespace hrm::grid {

namespace {

constexpr std::array<Pos, 4> kFourRoomsDoorways{{{5, 2}, {5, 8}, {2, 5}, {8, 5}}};

bool bernoulli(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

template <typename T>
const T& pick_uniform(Rng& rng, const std::vector<T>& items) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

std::pair<Pos, Pos> distinct_pair(Rng& rng, const std::vector<Pos>& cells) {
  std::uniform_int_distribution<std::size_t> dist(0, cells.size() - 1);
  const std::size_t a = dist(rng);
  std::size_t b = dist(rng);
  while (b == a) b = dist(rng);
  return {cells[a], cells[b]};
}

void outer_ring(MazeGrid& g) {
  for (int r = 0; r < kSize; ++r) {
    for (int c = 0; c < kSize; ++c) {
      const bool edge = r == 0 || c == 0 || r == kSize - 1 || c == kSize - 1;
      g.at({r, c}) = edge ? Cell::Wall : Cell::Floor;
    }
  }
}

void apply_doors(EnvState& s) {
  for (const Door& d : s.doors) s.grid.at(d.pos) = d.open ? Cell::DoorOpen : Cell::DoorClosed;
}

}  // namespace

Pos moved(Pos p, Action a) {
  switch (a) {
    case Action::North: return {p.row - 1, p.col};
    case Action::South: return {p.row + 1, p.col};
    case Action::East: return {p.row, p.col + 1};
    case Action::West: return {p.row, p.col - 1};
  }
  return p;
}

int manhattan(Pos a, Pos b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

void EnvConfig::validate() const {
  if (!(door_toggle_p >= 0.0 && door_toggle_p <= 1.0)) {
    throw ConfigError("door_toggle_p must lie in [0, 1], got " + std::to_string(door_toggle_p));
  }
  if (n_random_walls < 0 || n_doors < 0) throw ConfigError("wall and door counts must be non-negative");
  // 40 slots: interior cells with exactly one even coordinate.
  if (n_random_walls + n_doors > 40) {
    throw ConfigError("random_walls + random_doors = " + std::to_string(n_random_walls + n_doors) +
                      " exceeds the 40 candidate slots");
  }
  if (max_episode_steps < 1) throw ConfigError("max_episode_steps must be >= 1");
}

int EnvState::closed_door_count() const {
  return static_cast<int>(std::count_if(doors.begin(), doors.end(), [](const Door& d) { return !d.open; }));
}

EnvState generate_four_rooms(Rng& rng, const EnvConfig& config) {
  EnvState s;
  s.kind = EnvKind::FourRooms;
  outer_ring(s.grid);
  for (int i = 0; i < kSize; ++i) {
    s.grid.at({5, i}) = Cell::Wall;
    s.grid.at({i, 5}) = Cell::Wall;
  }
  for (Pos p : kFourRoomsDoorways) s.grid.at(p) = Cell::Floor;
  if (config.doors_enabled) {
    for (Pos p : kFourRoomsDoorways) s.doors.push_back({p, true});
    s.doors[std::uniform_int_distribution<std::size_t>(0, 3)(rng)].open = false;
    apply_doors(s);
  }
  std::vector<Pos> floor;
  for (int r = 1; r < kSize - 1; ++r) {
    for (int c = 1; c < kSize - 1; ++c) {
      const Pos p{r, c};
      const bool doorway = std::find(kFourRoomsDoorways.begin(), kFourRoomsDoorways.end(), p) !=
                           kFourRoomsDoorways.end();
      if (s.grid.at(p) == Cell::Floor && !doorway) floor.push_back(p);
    }
  }
  std::tie(s.grid.agent, s.grid.goal) = distinct_pair(rng, floor);
  return s;
}

EnvState generate_random_maze(Rng& rng, const EnvConfig& config) {
  config.validate();
  std::vector<Pos> slots, corridors;
  for (int r = 1; r < kSize - 1; ++r) {
    for (int c = 1; c < kSize - 1; ++c) {
      const int evens = (r % 2 == 0) + (c % 2 == 0);
      if (evens == 1) slots.push_back({r, c});
      if (evens == 0) corridors.push_back({r, c});
    }
  }
  const auto walls = static_cast<std::size_t>(config.n_random_walls);
  const auto doors = static_cast<std::size_t>(config.n_doors);
  while (true) {
    EnvState s;
    s.kind = EnvKind::RandomMaze;
    outer_ring(s.grid);
    for (int r = 2; r < kSize - 1; r += 2) {
      for (int c = 2; c < kSize - 1; c += 2) s.grid.at({r, c}) = Cell::Wall;
    }
    std::vector<Pos> order = slots;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < walls; ++i) s.grid.at(order[i]) = Cell::Wall;
    for (std::size_t i = walls; i < walls + doors; ++i) s.doors.push_back({order[i], true});
    apply_doors(s);
    std::tie(s.grid.agent, s.grid.goal) = distinct_pair(rng, corridors);
    if (astar(s.grid, s.grid.agent, s.grid.goal, DoorMode::Open)) return s;
  }
}

EnvState generate(Rng& rng, const EnvConfig& config) {
  return config.kind == EnvKind::FourRooms ? generate_four_rooms(rng, config) : generate_random_maze(rng, config);
}

void update_doors(EnvState& state, Rng& rng, double p) {
  const std::vector<Door> before = state.doors;
  if (state.kind == EnvKind::FourRooms) {
    if (!state.doors.empty() && bernoulli(rng, p)) {
      const std::size_t closed = std::uniform_int_distribution<std::size_t>(0, state.doors.size() - 1)(rng);
      for (std::size_t i = 0; i < state.doors.size(); ++i) state.doors[i].open = i != closed;
    }
  } else {
    for (Door& d : state.doors) {
      if (bernoulli(rng, p)) d.open = !d.open;
    }
  }
  apply_doors(state);
  state.env_changed = state.doors != before;
}

StepResult step(EnvState& state, int action, Rng& rng, const EnvConfig& config) {
  if (action < 0 || action >= kActionCount) throw InputError("invalid action id " + std::to_string(action));
  if (state.finished()) throw UsageError("step called on a finished episode");

  update_doors(state, rng, config.door_toggle_p);

  StepResult r;
  const Pos target = moved(state.grid.agent, static_cast<Action>(action));
  const Cell cell = state.grid.at(target);
  if (target == state.grid.goal) {
    state.grid.agent = target;
    r.reward = config.goal_reward;
    state.done = true;
  } else if (cell == Cell::Floor || cell == Cell::DoorOpen) {
    state.grid.agent = target;
  } else {
    r.reward = config.bump_penalty;
  }
  ++state.step_count;
  if (!state.done && state.step_count >= config.max_episode_steps) state.truncated = true;

  r.obs = tokenize(state);
  r.done = state.done;
  r.truncated = state.truncated;
  r.env_changed = state.env_changed;
  return r;
}

std::optional<std::vector<Pos>> astar(const MazeGrid& grid, Pos start, Pos goal, DoorMode doors) {
  if (!MazeGrid::in_bounds(start) || !MazeGrid::in_bounds(goal)) {
    throw InputError("astar: start or goal out of bounds");
  }
  auto passable = [&](Pos p) {
    if (!MazeGrid::in_bounds(p)) return false;
    switch (grid.at(p)) {
      case Cell::Floor:
      case Cell::DoorOpen: return true;
      case Cell::DoorClosed: return doors == DoorMode::Open;
      case Cell::Wall: return false;
    }
    return false;
  };
  auto index = [](Pos p) { return static_cast<std::size_t>(p.row * kSize + p.col); };

  std::array<int, kCells> best;
  best.fill(-1);
  std::array<int, kCells> parent;
  parent.fill(-1);
  // (f, insertion order, g, cell)
  using Entry = std::tuple<int, std::uint64_t, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t counter = 0;
  best[index(start)] = 0;
  open.emplace(manhattan(start, goal), counter++, 0, static_cast<int>(index(start)));
  std::array<bool, kCells> closed{};

  while (!open.empty()) {
    auto [f, order, g, cell] = open.top();
    open.pop();
    const auto ci = static_cast<std::size_t>(cell);
    if (closed[ci]) continue;
    closed[ci] = true;
    const Pos p{cell / kSize, cell % kSize};
    if (p == goal) {
      std::vector<Pos> path;
      for (int at = cell; at != -1; at = parent[static_cast<std::size_t>(at)]) path.push_back({at / kSize, at % kSize});
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (Action a : {Action::North, Action::South, Action::East, Action::West}) {
      const Pos n = moved(p, a);
      if (!passable(n)) continue;
      const std::size_t ni = index(n);
      if (closed[ni]) continue;
      if (best[ni] != -1 && best[ni] <= g + 1) continue;
      best[ni] = g + 1;
      parent[ni] = cell;
      open.emplace(g + 1 + manhattan(n, goal), counter++, g + 1, static_cast<int>(ni));
    }
  }
  return std::nullopt;
}

Observation tokenize(const EnvState& state) {
  Observation obs{};
  for (int i = 0; i < kCells; ++i) {
    switch (state.grid.cells[static_cast<std::size_t>(i)]) {
      case Cell::Floor: obs[static_cast<std::size_t>(i)] = kTokenFloor; break;
      case Cell::Wall: obs[static_cast<std::size_t>(i)] = kTokenWall; break;
      case Cell::DoorOpen: obs[static_cast<std::size_t>(i)] = kTokenDoorOpen; break;
      case Cell::DoorClosed: obs[static_cast<std::size_t>(i)] = kTokenDoorClosed; break;
    }
  }
  const auto goal = static_cast<std::size_t>(state.grid.goal.row * kSize + state.grid.goal.col);
  if (obs[goal] == kTokenFloor) obs[goal] = kTokenGoal;
  obs[static_cast<std::size_t>(state.grid.agent.row * kSize + state.grid.agent.col)] = kTokenAgent;
  return obs;
}

namespace {
constexpr std::array<char, kVocabSize> kGlyphs{'.', '#', '+', 'x', '>', '@'};
}  // namespace

std::string render_ascii(const Observation& obs) {
  std::string out;
  out.reserve(kCells + kSize);
  for (int r = 0; r < kSize; ++r) {
    for (int c = 0; c < kSize; ++c) {
      const std::uint8_t t = obs[static_cast<std::size_t>(r * kSize + c)];
      out += t < kVocabSize ? kGlyphs[t] : '?';
    }
    out += '\n';
  }
  return out;
}

Observation parse_ascii(const std::string& text) {
  Observation obs{};
  std::size_t cell = 0;
  for (char ch : text) {
    if (ch == '\n' || ch == '\r') continue;
    const auto it = std::find(kGlyphs.begin(), kGlyphs.end(), ch);
    if (it == kGlyphs.end()) throw InputError(std::string("unknown maze glyph '") + ch + "'");
    if (cell >= static_cast<std::size_t>(kCells)) throw InputError("maze text has more than 121 cells");
    obs[cell++] = static_cast<std::uint8_t>(it - kGlyphs.begin());
  }
  if (cell != static_cast<std::size_t>(kCells)) throw InputError("maze text has fewer than 121 cells");
  return obs;
}

MazeEnv::MazeEnv(EnvConfig config, std::uint64_t seed) : config_(config), rng_(seed) {
  config_.validate();
  state_ = generate(rng_, config_);
}

Observation MazeEnv::reset() {
  state_ = generate(rng_, config_);
  return tokenize(state_);
}

StepResult MazeEnv::step(int action) { return grid::step(state_, action, rng_, config_); }

}  // namespace hrm::grid
