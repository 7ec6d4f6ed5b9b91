#include <gtest/gtest.h>

#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include "../support/grid_oracle.hpp"
#include "hrm/error.hpp"
#include "hrm/gridworld/maze.hpp"

namespace {

using namespace hrm;
using namespace hrm::grid;
using oracle::bfs_length;

bool outer_ring_is_wall(const MazeGrid& g) {
  for (int i = 0; i < kSize; ++i) {
    for (Pos p : {Pos{0, i}, Pos{kSize - 1, i}, Pos{i, 0}, Pos{i, kSize - 1}}) {
      if (g.at(p) != Cell::Wall) return false;
    }
  }
  return true;
}

TEST(FourRooms, DoorsAndPlacement) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    EnvState s = generate_four_rooms(rng);
    ASSERT_EQ(s.doors.size(), 4u);
    ASSERT_EQ(s.closed_door_count(), 1);
    ASSERT_NE(s.grid.agent, s.grid.goal);
    ASSERT_EQ(s.grid.at(s.grid.agent), Cell::Floor);
    ASSERT_EQ(s.grid.at(s.grid.goal), Cell::Floor);
    ASSERT_TRUE(outer_ring_is_wall(s.grid));
    ASSERT_TRUE(astar(s.grid, s.grid.agent, s.grid.goal, DoorMode::Actual).has_value());
  }
}

TEST(FourRooms, DoorsDisabledLeavesDoorwaysOpen) {
  Rng rng(2);
  EnvConfig cfg;
  cfg.doors_enabled = false;
  EnvState s = generate_four_rooms(rng, cfg);
  EXPECT_TRUE(s.doors.empty());
  for (Pos p : {Pos{5, 2}, Pos{5, 8}, Pos{2, 5}, Pos{8, 5}}) EXPECT_EQ(s.grid.at(p), Cell::Floor);
  for (int i = 0; i < 200; ++i) {
    auto r = step(s, i % 4, rng, cfg);
    EXPECT_FALSE(r.env_changed);
    if (s.finished()) s = generate_four_rooms(rng, cfg);
  }
}

TEST(RandomMaze, LayoutInvariants) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    EnvState s = generate_random_maze(rng);
    ASSERT_TRUE(outer_ring_is_wall(s.grid));
    int random_walls = 0;
    for (int r = 1; r < kSize - 1; ++r) {
      for (int c = 1; c < kSize - 1; ++c) {
        const int evens = (r % 2 == 0) + (c % 2 == 0);
        if (evens == 2) ASSERT_EQ(s.grid.at({r, c}), Cell::Wall);
        if (evens == 0) ASSERT_EQ(s.grid.at({r, c}), Cell::Floor);
        if (evens == 1 && s.grid.at({r, c}) == Cell::Wall) ++random_walls;
      }
    }
    ASSERT_EQ(random_walls, 10);
    ASSERT_EQ(s.doors.size(), 5u);
    for (const Door& d : s.doors) {
      ASSERT_EQ((d.pos.row % 2 == 0) + (d.pos.col % 2 == 0), 1);
      ASSERT_TRUE(d.open);
    }
    ASSERT_NE(s.grid.agent, s.grid.goal);
    ASSERT_TRUE(astar(s.grid, s.grid.agent, s.grid.goal, DoorMode::Open).has_value());
  }
}

TEST(RandomMaze, InfeasibleCountsRejected) {
  Rng rng(4);
  EnvConfig cfg;
  cfg.kind = EnvKind::RandomMaze;
  cfg.n_random_walls = 36;
  cfg.n_doors = 5;
  EXPECT_THROW(generate_random_maze(rng, cfg), ConfigError);
}

TEST(UpdateDoors, ZeroProbabilityNeverChanges) {
  Rng rng(5);
  for (EnvKind kind : {EnvKind::FourRooms, EnvKind::RandomMaze}) {
    EnvConfig cfg;
    cfg.kind = kind;
    EnvState s = generate(rng, cfg);
    const auto doors = s.doors;
    for (int i = 0; i < 5000; ++i) {
      update_doors(s, rng, 0.0);
      ASSERT_FALSE(s.env_changed);
    }
    EXPECT_EQ(s.doors, doors);
  }
}

TEST(UpdateDoors, FourRoomsClosedDoorRunLength) {
  // Resampling picks a different door with probability 3/4, so the closed
  // door persists for 1 / (p * 3/4) steps on average.
  Rng rng(6);
  EnvState s = generate_four_rooms(rng);
  auto closed_index = [&] {
    for (std::size_t i = 0; i < s.doors.size(); ++i) {
      if (!s.doors[i].open) return i;
    }
    return s.doors.size();
  };
  std::size_t current = closed_index();
  long run = 0, runs = 0, total = 0;
  for (int i = 0; i < 100000; ++i) {
    update_doors(s, rng, 0.05);
    ASSERT_EQ(s.closed_door_count(), 1);
    ++run;
    const std::size_t now = closed_index();
    ASSERT_EQ(s.env_changed, now != current);
    if (now != current) {
      total += run;
      ++runs;
      run = 0;
      current = now;
    }
  }
  const double mean = double(total) / double(runs);
  const double expected = 1.0 / (0.05 * 0.75);
  EXPECT_NEAR(mean, expected, 0.1 * expected);
}

TEST(UpdateDoors, RandomMazePerDoorFlipRate) {
  Rng rng(7);
  EnvConfig cfg;
  cfg.kind = EnvKind::RandomMaze;
  EnvState s = generate_random_maze(rng, cfg);
  std::vector<long> flips(s.doors.size(), 0);
  for (int i = 0; i < 100000; ++i) {
    auto before = s.doors;
    update_doors(s, rng, 0.05);
    bool any = false;
    for (std::size_t d = 0; d < flips.size(); ++d) {
      if (before[d].open != s.doors[d].open) {
        ++flips[d];
        any = true;
      }
    }
    ASSERT_EQ(s.env_changed, any);
  }
  for (long f : flips) EXPECT_NEAR(double(f) / 100000.0, 0.05, 0.005);
}

EnvState open_room() {
  EnvState s;
  for (int r = 0; r < kSize; ++r) {
    for (int c = 0; c < kSize; ++c) {
      s.grid.at({r, c}) = (r == 0 || c == 0 || r == kSize - 1 || c == kSize - 1) ? Cell::Wall : Cell::Floor;
    }
  }
  s.grid.agent = {1, 1};
  s.grid.goal = {9, 9};
  return s;
}

TEST(Step, MoveBumpAndGoal) {
  Rng rng(8);
  EnvConfig cfg;
  cfg.doors_enabled = false;
  EnvState s = open_room();
  auto r = step(s, static_cast<int>(Action::East), rng, cfg);
  EXPECT_EQ(r.reward, 0.0f);
  EXPECT_EQ(s.grid.agent, (Pos{1, 2}));
  r = step(s, static_cast<int>(Action::North), rng, cfg);
  EXPECT_FLOAT_EQ(r.reward, -0.01f);
  EXPECT_EQ(s.grid.agent, (Pos{1, 2}));
  s.grid.goal = {2, 2};
  r = step(s, static_cast<int>(Action::South), rng, cfg);
  EXPECT_FLOAT_EQ(r.reward, 1.0f);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.truncated);
  EXPECT_THROW(step(s, 0, rng, cfg), UsageError);
}

TEST(Step, ClosedDoorBlocks) {
  Rng rng(9);
  EnvConfig cfg;
  cfg.door_toggle_p = 0.0;
  EnvState s = open_room();
  s.kind = EnvKind::RandomMaze;
  s.doors.push_back({{1, 2}, false});
  s.grid.at({1, 2}) = Cell::DoorClosed;
  auto r = step(s, static_cast<int>(Action::East), rng, cfg);
  EXPECT_FLOAT_EQ(r.reward, -0.01f);
  EXPECT_EQ(s.grid.agent, (Pos{1, 1}));
}

TEST(Step, TruncatesAtStepLimit) {
  Rng rng(10);
  EnvConfig cfg;
  EnvState s = open_room();
  int steps = 0;
  while (!s.finished()) {
    auto r = step(s, static_cast<int>(Action::North), rng, cfg);
    ++steps;
    EXPECT_FALSE(r.done);
  }
  EXPECT_EQ(steps, 80);
  EXPECT_TRUE(s.truncated);
  EXPECT_EQ(s.step_count, 80);
}

TEST(Step, InvalidActionRejected) {
  Rng rng(11);
  EnvState s = open_room();
  EXPECT_THROW(step(s, 4, rng, EnvConfig{}), InputError);
  EXPECT_THROW(step(s, -1, rng, EnvConfig{}), InputError);
}

TEST(Step, RewardsAndLengthsStayInRange) {
  for (EnvKind kind : {EnvKind::FourRooms, EnvKind::RandomMaze}) {
    EnvConfig cfg;
    cfg.kind = kind;
    MazeEnv env(cfg, 12);
    Rng policy(13);
    for (int i = 0; i < 20000; ++i) {
      auto r = env.step(static_cast<int>(policy() % 4));
      ASSERT_TRUE(r.reward == 0.0f || r.reward == cfg.bump_penalty || r.reward == cfg.goal_reward);
      ASSERT_LE(env.state().step_count, 80);
      if (env.state().finished()) env.reset();
    }
  }
}

TEST(Astar, TrivialCases) {
  EnvState s = open_room();
  auto same = astar(s.grid, {3, 3}, {3, 3}, DoorMode::Actual);
  ASSERT_TRUE(same);
  EXPECT_EQ(path_length(*same), 0);
  auto across = astar(s.grid, {1, 1}, {1, 9}, DoorMode::Actual);
  ASSERT_TRUE(across);
  EXPECT_EQ(path_length(*across), 8);
  for (std::size_t i = 1; i < across->size(); ++i) EXPECT_EQ(manhattan((*across)[i - 1], (*across)[i]), 1);
}

TEST(Astar, UnreachableGoalGivesNone) {
  EnvState s = open_room();
  for (int r = 1; r < kSize - 1; ++r) s.grid.at({r, 5}) = Cell::Wall;
  EXPECT_FALSE(astar(s.grid, {1, 1}, {1, 9}, DoorMode::Open));
}

TEST(Astar, MatchesBreadthFirstSearch) {
  Rng rng(14);
  EnvConfig cfg;
  cfg.kind = EnvKind::RandomMaze;
  for (int i = 0; i < 1000; ++i) {
    EnvState s = generate_random_maze(rng, cfg);
    for (Door& d : s.doors) d.open = (rng() % 2) == 0;
    for (const Door& d : s.doors) s.grid.at(d.pos) = d.open ? Cell::DoorOpen : Cell::DoorClosed;
    for (DoorMode mode : {DoorMode::Open, DoorMode::Actual}) {
      auto path = astar(s.grid, s.grid.agent, s.grid.goal, mode);
      const int oracle = bfs_length(s.grid, s.grid.agent, s.grid.goal, mode == DoorMode::Open);
      ASSERT_EQ(path ? path_length(*path) : -1, oracle);
    }
  }
}

TEST(Tokenize, CountsAndOverrides) {
  Rng rng(15);
  MazeEnv env(EnvConfig{}, 15);
  for (int i = 0; i < 2000; ++i) {
    Observation obs = tokenize(env.state());
    ASSERT_EQ(obs.size(), 121u);
    ASSERT_EQ(std::count(obs.begin(), obs.end(), kTokenAgent), 1);
    ASSERT_EQ(std::count(obs.begin(), obs.end(), kTokenGoal), env.state().done ? 0 : 1);
    ASSERT_EQ(parse_ascii(render_ascii(obs)), obs);
    env.step(static_cast<int>(rng() % 4));
    if (env.state().finished()) env.reset();
  }
}

TEST(Tokenize, GoldenFourRooms) {
  EnvState s;
  s.kind = EnvKind::FourRooms;
  for (int r = 0; r < kSize; ++r) {
    for (int c = 0; c < kSize; ++c) {
      const bool wall = r == 0 || c == 0 || r == kSize - 1 || c == kSize - 1 || r == 5 || c == 5;
      s.grid.at({r, c}) = wall ? Cell::Wall : Cell::Floor;
    }
  }
  s.doors = {{{5, 2}, false}, {{5, 8}, true}, {{2, 5}, true}, {{8, 5}, true}};
  for (const Door& d : s.doors) s.grid.at(d.pos) = d.open ? Cell::DoorOpen : Cell::DoorClosed;
  s.grid.agent = {1, 1};
  s.grid.goal = {7, 8};
  std::ifstream in(std::string(HRM_TEST_DATA_DIR) + "/four_rooms.txt");
  ASSERT_TRUE(in) << "missing golden file";
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(render_ascii(s), text.str());
}

TEST(FourRooms, ConnectivityAlongRandomRollouts) {
  MazeEnv env(EnvConfig{}, 16);
  Rng policy(17);
  for (int i = 0; i < 10000; ++i) {
    const EnvState& s = env.state();
    ASSERT_EQ(s.closed_door_count(), 1);
    ASSERT_GE(bfs_length(s.grid, s.grid.agent, s.grid.goal, false), 0) << "step " << i;
    env.step(static_cast<int>(policy() % 4));
    if (env.state().finished()) env.reset();
  }
}

}  // namespace
