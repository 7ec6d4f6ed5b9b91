#include "hrm/dqn/trainer.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "hrm/dqn/collector.hpp"
#include "hrm/error.hpp"

namespace hrm::dqn {

std::string to_string(model::LatentMode mode) { return mode == model::LatentMode::CarryZ ? "carry_z" : "reset_z"; }

std::string to_string(grid::EnvKind kind) {
  return kind == grid::EnvKind::FourRooms ? "four_rooms" : "random_maze";
}

const char* MetricsCsvWriter::header() {
  return "env_steps,batches,epsilon,success_frac,mean_ep_len,mean_loss,variant,env_kind,seed";
}

MetricsCsvWriter::MetricsCsvWriter(std::ostream& out) : out_(out) { out_ << header() << '\n'; }

void MetricsCsvWriter::write(const TrainMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%.6f,%.4f,%.4f,%.8g,", static_cast<long long>(m.env_steps),
                static_cast<long long>(m.batches), m.epsilon, m.success_frac, m.mean_ep_len, m.mean_loss);
  out_ << buf << to_string(m.variant) << ',' << to_string(m.env_kind) << ',' << m.seed << '\n';
  out_.flush();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Trainer::Trainer(TrainingOptions options)
    : options_(std::move(options)),
      learner_(model::HrmModel(options_.model, options_.seed), options_.trainer, options_.variant),
      buffer_(options_.trainer.replay_capacity),
      sample_rng_(derive_seed(options_.seed, 1)) {
  options_.env.validate();
  if (options_.total_env_steps < 0) throw ConfigError("training budget must be non-negative");
  if (options_.validation_interval < 1) throw ConfigError("validation interval must be positive");
  if (options_.validation_episodes < 1) throw ConfigError("validation episodes must be positive");
  if (options_.checkpoint_interval < 1) throw ConfigError("checkpoint interval must be positive");
}

TrainMetrics Trainer::evaluate_now() {
  const ValidationResult v = validate(learner_.online(), options_.env, options_.variant,
                                      options_.validation_episodes, validation_seed());
  TrainMetrics m;
  m.env_steps = env_steps_;
  m.batches = learner_.batches();
  m.epsilon = options_.trainer.epsilon.at(env_steps_);
  m.success_frac = v.success_frac;
  m.mean_ep_len = v.mean_ep_len;
  m.mean_loss = loss_count_ ? loss_sum_ / static_cast<double>(loss_count_) : std::numeric_limits<double>::quiet_NaN();
  m.variant = options_.variant;
  m.env_kind = options_.env.kind;
  m.seed = options_.seed;
  loss_sum_ = 0.0;
  loss_count_ = 0;
  return m;
}

void Trainer::after_env_step(const MetricsCallback& on_metrics, const CheckpointCallback& on_checkpoint,
                             bool& refresh_snapshot) {
  const auto& tc = options_.trainer;
  const std::size_t start = std::max(tc.learning_starts, tc.batch_size);
  if (env_steps_ % tc.env_steps_per_batch == 0 && buffer_.size() >= start) {
    const BatchResult r = learner_.train_step(buffer_, sample_rng_);
    if (r.trained) {
      loss_sum_ += r.loss;
      ++loss_count_;
      if (learner_.batches() % tc.collector_update_interval == 0) refresh_snapshot = true;
    }
  }
  if (env_steps_ % options_.validation_interval == 0 && on_metrics) on_metrics(evaluate_now());
  if (env_steps_ % options_.checkpoint_interval == 0 && env_steps_ < options_.total_env_steps && on_checkpoint) {
    on_checkpoint(*this, false);
  }
}

void Trainer::run(const MetricsCallback& on_metrics, const CheckpointCallback& on_checkpoint) {
  const auto& tc = options_.trainer;
  const bool store_latent = tc.replay_latent == ReplayLatent::Stored;
  const std::int64_t total = options_.total_env_steps;

  if (tc.collector_workers == 1) {
    Collector collector(options_.env, derive_seed(options_.seed, 100), options_.variant, store_latent);
    collector.set_snapshot(std::make_shared<const model::HrmModel>(learner_.online().clone()));
    while (env_steps_ < total) {
      buffer_.push(collector.step(tc.epsilon.at(env_steps_), ActionMode::Train));
      if (collector.last_episode()) ++episodes_;
      ++env_steps_;
      bool refresh = false;
      after_env_step(on_metrics, on_checkpoint, refresh);
      if (refresh) collector.set_snapshot(std::make_shared<const model::HrmModel>(learner_.online().clone()));
    }
  } else {
    struct Item {
      Transition t;
      bool episode_end;
    };
    std::mutex mu;
    std::condition_variable not_empty, not_full;
    std::deque<Item> queue;
    const std::size_t queue_cap = 4 * static_cast<std::size_t>(tc.env_steps_per_batch * tc.collector_workers);
    bool stop = false;
    std::shared_ptr<const model::HrmModel> snapshot =
        std::make_shared<const model::HrmModel>(learner_.online().clone());
    std::atomic<std::int64_t> issued{env_steps_};
    std::exception_ptr failure;

    auto worker = [&](int id) {
      try {
        Collector c(options_.env, derive_seed(options_.seed, 100 + static_cast<std::uint64_t>(id)),
                    options_.variant, store_latent);
        for (;;) {
          {
            std::lock_guard lock(mu);
            if (stop) return;
            c.set_snapshot(snapshot);
          }
          const std::int64_t n = issued.fetch_add(1);
          if (n >= total) return;
          Item item{c.step(tc.epsilon.at(n), ActionMode::Train), c.last_episode().has_value()};
          std::unique_lock lock(mu);
          not_full.wait(lock, [&] { return stop || queue.size() < queue_cap; });
          if (stop) return;
          queue.push_back(std::move(item));
          not_empty.notify_one();
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        stop = true;
        not_empty.notify_all();
        not_full.notify_all();
      }
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < tc.collector_workers; ++w) threads.emplace_back(worker, w);
    auto shutdown = [&] {
      {
        std::lock_guard lock(mu);
        stop = true;
      }
      not_full.notify_all();
      not_empty.notify_all();
      for (auto& t : threads) t.join();
    };
    try {
      while (env_steps_ < total) {
        Item item;
        {
          std::unique_lock lock(mu);
          not_empty.wait(lock, [&] { return stop || !queue.empty(); });
          if (queue.empty()) break;
          item = std::move(queue.front());
          queue.pop_front();
          not_full.notify_one();
        }
        buffer_.push(std::move(item.t));
        if (item.episode_end) ++episodes_;
        ++env_steps_;
        bool refresh = false;
        after_env_step(on_metrics, on_checkpoint, refresh);
        if (refresh) {
          auto fresh = std::make_shared<const model::HrmModel>(learner_.online().clone());
          std::lock_guard lock(mu);
          snapshot = std::move(fresh);
        }
      }
    } catch (...) {
      shutdown();
      throw;
    }
    shutdown();
    if (failure) std::rethrow_exception(failure);
  }
  if (on_checkpoint) on_checkpoint(*this, true);
}

}  // namespace hrm::dqn
