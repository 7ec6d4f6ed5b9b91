#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>
#include <sstream>

#include "../support/finite_diff.hpp"
#include "hrm/dqn/collector.hpp"
#include "hrm/dqn/learner.hpp"
#include "hrm/dqn/policy.hpp"
#include "hrm/dqn/replay_buffer.hpp"
#include "hrm/dqn/trainer.hpp"
#include "hrm/error.hpp"
#include "hrm/numerics/ops.hpp"

namespace {

using namespace hrm;
using dqn::ActionMode;
using num::Tensor;
using num::Var;

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.hidden_size = 16;
  c.h_layers = 1;
  c.l_layers = 1;
  c.heads = 2;
  c.expansion = 2;
  c.h_cycles = 1;
  c.l_cycles = 1;
  c.recurrent_max_steps = 2;
  return c;
}

dqn::TrainerConfig tiny_trainer() {
  dqn::TrainerConfig t;
  t.batch_size = 8;
  t.replay_capacity = 4096;
  t.learning_starts = 8;
  t.collector_workers = 1;
  t.env_steps_per_batch = 4;
  t.epsilon.decay_steps = 500;
  return t;
}

TEST(Epsilon, Endpoints) {
  dqn::EpsilonSchedule s;
  EXPECT_EQ(s.at(0), 1.0);
  EXPECT_EQ(s.at(300000), 0.15);
  EXPECT_EQ(s.at(10000000), 0.15);
  EXPECT_NEAR(s.at(150000), 0.575, 1e-12);
}

TEST(Epsilon, MatchesClosedFormAndIsMonotone) {
  dqn::EpsilonSchedule s;
  double prev = 2.0;
  for (std::int64_t k = 0; k <= 310000; k += 7) {
    const double expected = k >= 300000 ? 0.15 : 1.0 - 0.85 * (static_cast<double>(k) / 300000.0);
    ASSERT_NEAR(s.at(k), expected, 1e-12) << k;
    ASSERT_LE(s.at(k), prev);
    prev = s.at(k);
  }
}

TEST(SelectAction, GreedyAndTies) {
  std::mt19937_64 rng(1);
  const std::array<float, 4> q{0.1f, 0.9f, 0.2f, 0.0f};
  EXPECT_EQ(dqn::select_action(q, 0.0, rng, ActionMode::Train), 1);
  const std::array<float, 4> tie{0.5f, 0.7f, 0.7f, 0.7f};
  EXPECT_EQ(dqn::select_action(tie, 0.0, rng, ActionMode::Train), 1);
  EXPECT_THROW(dqn::select_action(std::span<const float>(), 0.0, rng, ActionMode::Train), InputError);
}

TEST(SelectAction, ValidateIgnoresEpsilon) {
  std::mt19937_64 rng(2);
  const std::array<float, 4> q{0.1f, 0.2f, 0.3f, 0.9f};
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(dqn::select_action(q, 1.0, rng, ActionMode::Validate), 3);
}

TEST(SelectAction, UniformAtEpsilonOne) {
  std::mt19937_64 rng(3);
  const std::array<float, 4> q{0.0f, 5.0f, 0.0f, 0.0f};
  std::array<int, 4> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(dqn::select_action(q, 1.0, rng, ActionMode::Train))];
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 0.02);
}

TEST(Bellman, TerminalIsExactlyReward) {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const std::array<float, 4> wild{nan, 1e30f, -1e30f, std::numeric_limits<float>::infinity()};
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> r(-2.0f, 2.0f);
  for (int i = 0; i < 1000; ++i) {
    const float reward = r(rng);
    const float y = dqn::bellman_target(reward, true, wild, 0.95f);
    ASSERT_EQ(std::memcmp(&y, &reward, sizeof y), 0);
  }
}

TEST(Bellman, Bootstrapped) {
  const std::array<float, 4> q{0.0f, 2.0f, -1.0f, 1.0f};
  EXPECT_NEAR(dqn::bellman_target(0.0f, false, q, 0.95f), 1.9f, 1e-6f);
  EXPECT_NEAR(dqn::bellman_target(-0.01f, false, q, 0.5f), 0.99f, 1e-6f);
}

TEST(TdLoss, Values) {
  const Var q(Tensor({2}, {0.0f, 0.0f}), true);
  EXPECT_FLOAT_EQ(dqn::td_loss(q, Tensor({2}, {1.0f, 3.0f})).value()[0], 5.0f);
  EXPECT_FLOAT_EQ(dqn::td_loss(q, Tensor({2}, {0.0f, 0.0f})).value()[0], 0.0f);
  EXPECT_THROW(dqn::td_loss(q, Tensor({3}, 0.0f)), DimensionError);
}

TEST(TdLoss, GradientMatchesFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Var q(oracle::random_tensor({16}, seed), true);
    const Tensor y = oracle::random_tensor({16}, seed + 100);
    num::backward(dqn::td_loss(q, y));
    const Tensor g = q.grad();
    std::vector<double> analytic(g.data().begin(), g.data().end());
    std::vector<double> closed;
    for (std::size_t i = 0; i < 16; ++i) closed.push_back(2.0 * (q.value()[i] - y[i]) / 16.0);
    const auto numeric = oracle::central_difference(q, [&] { return double(dqn::td_loss(q, y).value()[0]); });
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-3);
    EXPECT_LT(oracle::relative_error(analytic, closed), 1e-6);
  }
}

TEST(Polyak, Examples) {
  Tensor t({3}, {0.0f, 0.0f, 0.0f});
  const Tensor o({3}, {1.0f, 1.0f, 1.0f});
  std::array<Tensor*, 1> tp{&t};
  std::array<const Tensor*, 1> op{&o};
  dqn::polyak_update(tp, op, 0.999f);
  for (float v : t.data()) EXPECT_NEAR(v, 0.001f, 1e-7f);

  Tensor same = o;
  std::array<Tensor*, 1> sp{&same};
  dqn::polyak_update(sp, op, 0.999f);
  EXPECT_TRUE(same == o);
}

TEST(Polyak, ClosedFormAfterKUpdates) {
  Tensor t({1}, {0.0f});
  const Tensor o({1}, {1.0f});
  std::array<Tensor*, 1> tp{&t};
  std::array<const Tensor*, 1> op{&o};
  for (int k = 1; k <= 3000; ++k) {
    dqn::polyak_update(tp, op, 0.999f);
    ASSERT_NEAR(t[0], 1.0 - std::pow(0.999, k), 1e-4) << k;
  }
}

TEST(Polyak, ShapeMismatch) {
  Tensor t({2});
  const Tensor o({3});
  std::array<Tensor*, 1> tp{&t};
  std::array<const Tensor*, 1> op{&o};
  EXPECT_THROW(dqn::polyak_update(tp, op, 0.5f), DimensionError);
}

TEST(Replay, FifoEvictionAtCapacity) {
  dqn::ReplayBuffer buf(1048576);
  for (std::uint64_t i = 0; i < 1048577; ++i) {
    dqn::Transition t;
    t.episode = i;
    buf.push(std::move(t));
  }
  EXPECT_EQ(buf.size(), 1048576u);
  std::set<std::uint64_t> ids;
  for (std::size_t s = 0; s < buf.size(); ++s) ids.insert(buf[s].episode);
  EXPECT_EQ(ids.count(0), 0u);
  EXPECT_EQ(ids.count(1), 1u);
  EXPECT_EQ(ids.count(1048576), 1u);
  EXPECT_EQ(buf.oldest(0).episode, 1u);
}

TEST(Replay, SamplingDistinctAndUniform) {
  dqn::ReplayBuffer buf(64);
  for (int i = 0; i < 64; ++i) buf.push({});
  std::mt19937_64 rng(5);
  std::vector<int> hits(64, 0);
  const int rounds = 20000;
  for (int r = 0; r < rounds; ++r) {
    const auto s = buf.sample(16, rng);
    ASSERT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 16u);
    for (auto i : s) ++hits[i];
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / rounds, 0.25, 0.02);
  EXPECT_THROW(buf.sample(65, rng), UsageError);
}

TEST(Replay, CompactLatentRoundTrip) {
  model::LatentState z{oracle::random_tensor({121, 16}, 1), oracle::random_tensor({121, 16}, 2)};
  const auto back = dqn::CompactLatent::from(z).expand(16);
  ASSERT_EQ(back.z_l.shape(), z.z_l.shape());
  for (std::size_t i = 0; i < z.z_l.numel(); ++i) {
    EXPECT_NEAR(back.z_l[i], z.z_l[i], std::abs(z.z_l[i]) * (1.0 / 256) + 1e-30);
    EXPECT_NEAR(back.z_h[i], z.z_h[i], std::abs(z.z_h[i]) * (1.0 / 256) + 1e-30);
  }
}

grid::EnvConfig no_doors() {
  grid::EnvConfig e;
  e.kind = grid::EnvKind::FourRooms;
  e.doors_enabled = false;
  return e;
}

TEST(Collector, EpisodesEndAtGoalOrStepLimit) {
  auto net = std::make_shared<const model::HrmModel>(tiny_model(), 1);
  dqn::Collector c(grid::EnvConfig{}, 11, model::LatentMode::CarryZ, true);
  c.set_snapshot(net);
  int finished = 0;
  int t_expected = 0;
  while (finished < 20) {
    const auto tr = c.step(1.0, ActionMode::Train);
    ASSERT_EQ(tr.step, t_expected);
    ASSERT_FALSE(tr.z_init.empty());
    ++t_expected;
    if (const auto& e = c.last_episode()) {
      ++finished;
      EXPECT_TRUE((e->success && tr.terminal) || (e->length == 80 && tr.truncated));
      EXPECT_EQ(e->length, t_expected);
      t_expected = 0;
    } else {
      ASSERT_FALSE(tr.terminal || tr.truncated);
    }
  }
}

TEST(Collector, CarriesLatentWithinEpisodeOnly) {
  auto net = std::make_shared<const model::HrmModel>(tiny_model(), 2);
  dqn::Collector c(grid::EnvConfig{}, 12, model::LatentMode::CarryZ, false);
  c.set_snapshot(net);
  std::optional<model::LatentState> last_final;
  int checked = 0, starts = 0;
  for (int i = 0; i < 300; ++i) {
    c.step(0.5, ActionMode::Train, [&](probe::ProbeRecord&& r) {
      if (r.step == 0) {
        ++starts;
        EXPECT_FALSE(r.previous_final.has_value());
        EXPECT_TRUE(num::bitwise_equal(r.z_init.z_l, net->initial_latent().z_l));
        EXPECT_TRUE(num::bitwise_equal(r.z_init.z_h, net->initial_latent().z_h));
      } else {
        ASSERT_TRUE(last_final.has_value());
        EXPECT_TRUE(num::bitwise_equal(r.z_init.z_l, last_final->z_l));
        EXPECT_TRUE(num::bitwise_equal(r.z_init.z_h, last_final->z_h));
        ++checked;
      }
      last_final = model::LatentState{r.trace.entries.back().z_l, r.trace.entries.back().z_h};
    });
  }
  EXPECT_GT(checked, 100);
  EXPECT_GT(starts, 2);
}

TEST(Collector, ResetZAlwaysStartsFromZ0) {
  auto net = std::make_shared<const model::HrmModel>(tiny_model(), 3);
  dqn::Collector c(grid::EnvConfig{}, 13, model::LatentMode::ResetZ, true);
  c.set_snapshot(net);
  for (int i = 0; i < 50; ++i) {
    const auto tr = c.step(0.3, ActionMode::Train, [&](probe::ProbeRecord&& r) {
      EXPECT_TRUE(num::bitwise_equal(r.z_init.z_l, net->initial_latent().z_l));
    });
    EXPECT_TRUE(tr.z_init.empty());
  }
}

TEST(Collector, DeterministicTransitionStream) {
  auto run = [] {
    auto net = std::make_shared<const model::HrmModel>(tiny_model(), 4);
    dqn::Collector c(grid::EnvConfig{}, 14, model::LatentMode::CarryZ, true);
    c.set_snapshot(net);
    std::vector<dqn::Transition> out;
    for (int i = 0; i < 200; ++i) out.push_back(c.step(0.4, ActionMode::Train));
    return out;
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].obs, b[i].obs);
    ASSERT_EQ(a[i].action, b[i].action);
    ASSERT_EQ(a[i].reward, b[i].reward);
    ASSERT_EQ(a[i].next_obs, b[i].next_obs);
    ASSERT_EQ(a[i].z_init.bits, b[i].z_init.bits);
  }
}

TEST(Learner, TargetOnlyChangesByPolyak) {
  auto cfg = tiny_trainer();
  dqn::Learner learner(model::HrmModel(tiny_model(), 5), cfg, model::LatentMode::CarryZ);
  dqn::ReplayBuffer buf(256);
  auto net = std::make_shared<const model::HrmModel>(learner.online().clone());
  dqn::Collector c(no_doors(), 15, model::LatentMode::CarryZ, true);
  c.set_snapshot(net);
  for (int i = 0; i < 64; ++i) buf.push(c.step(1.0, ActionMode::Train));
  std::mt19937_64 rng(6);
  for (int b = 0; b < 5; ++b) {
    const auto before = learner.target().clone();
    const auto online_before = learner.online().clone();
    ASSERT_TRUE(learner.train_step(buf, rng).trained);
    const auto tp = learner.target().named_parameters();
    const auto bp = before.named_parameters();
    const auto op = learner.online().named_parameters();
    const auto obp = online_before.named_parameters();
    bool online_moved = false;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      EXPECT_FALSE(tp[i].var.has_grad());
      const Tensor& t = tp[i].var.value();
      double gap = 0.0;
      for (std::size_t j = 0; j < t.numel(); ++j) {
        gap = std::max(gap, std::abs(double(op[i].var.value()[j]) - bp[i].var.value()[j]));
      }
      for (std::size_t j = 0; j < t.numel(); ++j) {
        const double expected = 0.999 * bp[i].var.value()[j] + 0.001 * op[i].var.value()[j];
        ASSERT_NEAR(t[j], expected, 1e-6);
        ASSERT_LE(std::abs(double(t[j]) - bp[i].var.value()[j]), 0.001 * gap + 1e-6);
        online_moved |= op[i].var.value()[j] != obp[i].var.value()[j];
      }
    }
    EXPECT_TRUE(online_moved);
  }
  EXPECT_EQ(learner.batches(), 5);
}

TEST(Learner, SkipsWhenBufferTooSmall) {
  dqn::Learner learner(model::HrmModel(tiny_model(), 6), tiny_trainer(), model::LatentMode::ResetZ);
  dqn::ReplayBuffer buf(16);
  buf.push({});
  std::mt19937_64 rng(7);
  EXPECT_FALSE(learner.train_step(buf, rng).trained);
  EXPECT_EQ(learner.batches(), 0);
}

TEST(Learner, OverfitsFixedTinyBuffer) {
  auto cfg = tiny_trainer();
  cfg.batch_size = 16;
  dqn::Learner learner(model::HrmModel(tiny_model(), 7), cfg, model::LatentMode::CarryZ);
  dqn::ReplayBuffer buf(32);
  auto net = std::make_shared<const model::HrmModel>(learner.online().clone());
  dqn::Collector c(no_doors(), 16, model::LatentMode::CarryZ, true);
  c.set_snapshot(net);
  for (int i = 0; i < 32; ++i) buf.push(c.step(1.0, ActionMode::Train));
  std::mt19937_64 rng(8);
  std::vector<double> losses;
  for (int b = 0; b < 1000; ++b) losses.push_back(learner.train_step(buf, rng).loss);
  auto window = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < from + 100; ++i) s += losses[i];
    return s / 100.0;
  };
  EXPECT_LT(window(900), 0.5 * window(0));
}

TEST(Learner, MicroBatchesMatchFullBatch) {
  auto whole_cfg = tiny_trainer();
  whole_cfg.batch_size = 16;
  whole_cfg.micro_batch = 16;
  auto split_cfg = whole_cfg;
  split_cfg.micro_batch = 5;
  dqn::Learner whole(model::HrmModel(tiny_model(), 11), whole_cfg, model::LatentMode::CarryZ);
  dqn::Learner split(model::HrmModel(tiny_model(), 11), split_cfg, model::LatentMode::CarryZ);
  dqn::ReplayBuffer buf(64);
  auto net = std::make_shared<const model::HrmModel>(whole.online().clone());
  dqn::Collector c(no_doors(), 17, model::LatentMode::CarryZ, true);
  c.set_snapshot(net);
  for (int i = 0; i < 64; ++i) buf.push(c.step(1.0, ActionMode::Train));
  std::mt19937_64 rng(12);
  for (int b = 0; b < 3; ++b) {
    const auto slots = buf.sample(16, rng);
    const auto rw = whole.train_on(buf, slots);
    const auto rs = split.train_on(buf, slots);
    EXPECT_NEAR(rw.loss, rs.loss, 1e-5 * std::max(1.0f, std::abs(rw.loss)));
  }
  const auto wp = whole.online().named_parameters();
  const auto sp = split.online().named_parameters();
  ASSERT_EQ(wp.size(), sp.size());
  for (std::size_t i = 0; i < wp.size(); ++i) {
    const Tensor& a = wp[i].var.value();
    const Tensor& b = sp[i].var.value();
    for (std::size_t j = 0; j < a.numel(); ++j) ASSERT_NEAR(a[j], b[j], 1e-4) << wp[i].name;
  }
}

TEST(Learner, RejectsBadConfig) {
  auto cfg = tiny_trainer();
  cfg.micro_batch = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_trainer();
  cfg.gamma = 1.5f;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_trainer();
  cfg.target_delay = 1.0f;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

dqn::TrainingOptions tiny_run(int workers) {
  dqn::TrainingOptions o;
  o.env = no_doors();
  o.model = tiny_model();
  o.trainer = tiny_trainer();
  o.trainer.collector_workers = workers;
  o.seed = 9;
  o.total_env_steps = 600;
  o.validation_interval = 200;
  o.validation_episodes = 3;
  return o;
}

std::string run_metrics(const dqn::TrainingOptions& o) {
  std::ostringstream csv;
  dqn::MetricsCsvWriter w(csv);
  dqn::Trainer t(o);
  t.run([&](const dqn::TrainMetrics& m) { w.write(m); });
  return csv.str();
}

TEST(Trainer, SingleWorkerRunsAreIdentical) {
  const auto a = run_metrics(tiny_run(1));
  const auto b = run_metrics(tiny_run(1));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')),
            "env_steps,batches,epsilon,success_frac,mean_ep_len,mean_loss,variant,env_kind,seed");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 4);
}

TEST(Trainer, MultipleWorkersComplete) {
  auto o = tiny_run(3);
  int rows = 0;
  int finals = 0;
  dqn::Trainer t(o);
  t.run([&](const dqn::TrainMetrics& m) {
    ++rows;
    EXPECT_GE(m.success_frac, 0.0);
    EXPECT_LE(m.success_frac, 1.0);
  }, [&](const dqn::Trainer&, bool final) { finals += final ? 1 : 0; });
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(finals, 1);
  EXPECT_EQ(t.env_steps(), 600);
  EXPECT_GT(t.learner().batches(), 100);
}

}  // namespace
