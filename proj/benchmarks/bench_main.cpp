#include <benchmark/benchmark.h>

#include <memory>

#include "hrm/dqn/collector.hpp"
#include "hrm/dqn/learner.hpp"
#include "hrm/gridworld/maze.hpp"
#include "hrm/model/hrm_model.hpp"

namespace {

using namespace hrm;

model::ModelConfig desk_model(int cycles) {
  model::ModelConfig c;
  c.hidden_size = 32;
  c.h_layers = 2;
  c.l_layers = 2;
  c.recurrent_max_steps = 2;
  c.h_cycles = cycles;
  c.l_cycles = cycles;
  return c;
}

model::ModelConfig pick_model(int id) { return id == 0 ? model::ModelConfig{} : desk_model(static_cast<int>(id)); }

void BM_ActingForward(benchmark::State& state) {
  const model::HrmModel net(pick_model(static_cast<int>(state.range(0))), 1);
  grid::MazeEnv env(grid::EnvConfig{}, 2);
  const auto obs = env.reset();
  num::NoGradGuard no_grad;
  for (auto _ : state) {
    auto fwd = model::recurrent_forward(net, model::embed_observation(net, obs), net.initial_latent());
    benchmark::DoNotOptimize(fwd.q.value().raw());
  }
}
BENCHMARK(BM_ActingForward)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_TrainBatch(benchmark::State& state) {
  const auto mc = pick_model(static_cast<int>(state.range(0)));
  dqn::TrainerConfig tc;
  tc.batch_size = static_cast<std::size_t>(state.range(1));
  dqn::Learner learner(model::HrmModel(mc, 3), tc, model::LatentMode::CarryZ);
  dqn::ReplayBuffer buf(1024);
  dqn::Collector c(grid::EnvConfig{}, 4, model::LatentMode::CarryZ, true);
  c.set_snapshot(std::make_shared<const model::HrmModel>(learner.online().clone()));
  for (int i = 0; i < 512; ++i) buf.push(c.step(1.0, dqn::ActionMode::Train));
  std::mt19937_64 rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(learner.train_step(buf, rng).loss);
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_TrainBatch)->Args({1, 32})->Args({2, 32})->Args({0, 32})->Unit(benchmark::kMillisecond);

void BM_EnvStep(benchmark::State& state) {
  grid::EnvConfig cfg;
  cfg.kind = state.range(0) == 0 ? grid::EnvKind::FourRooms : grid::EnvKind::RandomMaze;
  grid::MazeEnv env(cfg, 6);
  env.reset();
  std::mt19937_64 rng(7);
  for (auto _ : state) {
    const auto r = env.step(static_cast<int>(rng() % 4));
    if (r.done || r.truncated) env.reset();
    benchmark::DoNotOptimize(r.reward);
  }
}
BENCHMARK(BM_EnvStep)->Arg(0)->Arg(1);

void BM_AStar(benchmark::State& state) {
  grid::Rng rng(8);
  grid::EnvConfig cfg;
  cfg.kind = grid::EnvKind::RandomMaze;
  const auto s = grid::generate(rng, cfg);
  for (auto _ : state) {
    auto p = grid::astar(s.grid, s.grid.agent, s.grid.goal, grid::DoorMode::Open);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_AStar);

void BM_MazeGeneration(benchmark::State& state) {
  grid::Rng rng(9);
  grid::EnvConfig cfg;
  cfg.kind = grid::EnvKind::RandomMaze;
  for (auto _ : state) benchmark::DoNotOptimize(grid::generate(rng, cfg).step_count);
}
BENCHMARK(BM_MazeGeneration);

}  // namespace
BENCHMARK_MAIN();
