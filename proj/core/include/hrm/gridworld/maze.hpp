#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hrm::grid {

inline constexpr int kSize = 11;
inline constexpr int kCells = kSize * kSize;
inline constexpr int kActionCount = 4;
inline constexpr int kVocabSize = 6;

enum class Cell : std::uint8_t { Floor, Wall, DoorOpen, DoorClosed };

/// Observation token ids. Agent overrides any cell; goal overrides floor.
enum Token : std::uint8_t {
  kTokenFloor = 0,
  kTokenWall = 1,
  kTokenDoorOpen = 2,
  kTokenDoorClosed = 3,
  kTokenGoal = 4,
  kTokenAgent = 5,
};

/// N, S, E, W.
enum class Action : std::uint8_t { North = 0, South = 1, East = 2, West = 3 };

struct Pos {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Pos&, const Pos&) = default;
};

Pos moved(Pos p, Action a);
int manhattan(Pos a, Pos b);

enum class EnvKind { FourRooms, RandomMaze };

struct EnvConfig {
  EnvKind kind = EnvKind::FourRooms;
  double door_toggle_p = 0.05;
  int n_random_walls = 10;
  int n_doors = 5;
  int max_episode_steps = 80;
  float bump_penalty = -0.01f;
  float goal_reward = 1.0f;
  /// FourRooms only: false leaves the four doorways permanently open.
  bool doors_enabled = true;

  void validate() const;
};

struct MazeGrid {
  std::array<Cell, kCells> cells{};
  Pos agent;
  Pos goal;

  Cell at(Pos p) const { return cells[static_cast<std::size_t>(p.row * kSize + p.col)]; }
  Cell& at(Pos p) { return cells[static_cast<std::size_t>(p.row * kSize + p.col)]; }
  static bool in_bounds(Pos p) { return p.row >= 0 && p.row < kSize && p.col >= 0 && p.col < kSize; }
};

struct Door {
  Pos pos;
  bool open = true;
  friend bool operator==(const Door&, const Door&) = default;
};

struct EnvState {
  EnvKind kind = EnvKind::FourRooms;
  MazeGrid grid;
  int step_count = 0;
  std::vector<Door> doors;
  bool env_changed = false;  // door configuration differs from the previous step
  bool done = false;         // goal reached (terminal)
  bool truncated = false;    // step limit reached without the goal

  bool finished() const { return done || truncated; }
  int closed_door_count() const;
};

using Observation = std::array<std::uint8_t, kCells>;
using Rng = std::mt19937_64;

/// 11x11 four rooms: partitions on row 5 and column 5 with doorways at
/// (5,2), (5,8), (2,5), (8,5). With doors enabled exactly one is closed.
EnvState generate_four_rooms(Rng& rng, const EnvConfig& config = {});

/// Pillars where both coordinates are even, random walls and doors on cells
/// with exactly one even coordinate, agent and goal where both are odd.
/// Resamples until a path exists with every door open.
EnvState generate_random_maze(Rng& rng, const EnvConfig& config = {});

/// Dispatches on config.kind.
EnvState generate(Rng& rng, const EnvConfig& config);

/// One door transition with toggle probability p. FourRooms resamples the
/// closed door uniformly (possibly the same one); RandomMaze flips each door
/// independently. Sets state.env_changed.
void update_doors(EnvState& state, Rng& rng, double p);

struct StepResult {
  Observation obs;
  float reward = 0.0f;
  bool done = false;       // goal reached; terminal for bootstrapping
  bool truncated = false;  // step limit
  bool env_changed = false;
};

/// Doors update first, then the move. Throws InputError for an action id
/// outside [0, 4) and UsageError on a finished episode.
StepResult step(EnvState& state, int action, Rng& rng, const EnvConfig& config);

enum class DoorMode { Open, Actual };

/// Shortest 4-connected path (start and goal inclusive) using A* with the
/// Manhattan heuristic; neighbors expand N, S, E, W and ties go to the
/// earliest inserted node. The start cell is always enterable.
std::optional<std::vector<Pos>> astar(const MazeGrid& grid, Pos start, Pos goal, DoorMode doors);

/// Number of moves along a path (cells - 1).
inline int path_length(const std::vector<Pos>& path) { return static_cast<int>(path.size()) - 1; }

Observation tokenize(const EnvState& state);

/// One char per cell: '.' floor, '#' wall, '+' open door, 'x' closed door,
/// '@' agent, '>' goal; newline after each row.
std::string render_ascii(const Observation& obs);
inline std::string render_ascii(const EnvState& state) { return render_ascii(tokenize(state)); }

/// Inverse of render_ascii. Throws InputError on malformed text.
Observation parse_ascii(const std::string& text);

/// Owns a config, an RNG stream and the current episode.
class MazeEnv {
 public:
  MazeEnv(EnvConfig config, std::uint64_t seed);

  Observation reset();
  StepResult step(int action);

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }
  Rng& rng() { return rng_; }

 private:
  EnvConfig config_;
  Rng rng_;
  EnvState state_;
};

}  // namespace hrm::grid
