#include "hrm/dqn/collector.hpp"

#include "hrm/error.hpp"
#include "hrm/numerics/autograd.hpp"

namespace hrm::dqn {

namespace {
constexpr std::uint64_t kPolicyStream = 0x5851f42d4c957f2dULL;
}

Collector::Collector(const grid::EnvConfig& env, std::uint64_t seed, model::LatentMode variant, bool store_latent)
    : env_(env, seed), policy_rng_(seed ^ kPolicyStream), variant_(variant), store_latent_(store_latent) {}

void Collector::set_snapshot(std::shared_ptr<const model::HrmModel> snapshot) { snapshot_ = std::move(snapshot); }

void Collector::restart() {
  need_reset_ = true;
  carried_.reset();
}

Transition Collector::step(double epsilon, ActionMode mode, const ProbeSink& probe) {
  if (!snapshot_) throw UsageError("collector has no parameter snapshot");
  const model::HrmModel& net = *snapshot_;
  finished_.reset();
  if (need_reset_) {
    obs_ = env_.reset();
    obs_changed_ = false;
    t_ = 0;
    ++episode_;
    carried_.reset();
    need_reset_ = false;
  }

  num::NoGradGuard no_grad;
  const bool first = t_ == 0;
  model::LatentState z_init =
      model::init_latent(net, variant_, carried_ ? &*carried_ : nullptr, first || !carried_);
  model::RecurrentTrace trace;
  const num::Var x = model::embed_observation(net, obs_);
  model::ForwardResult fwd = model::recurrent_forward(net, x, z_init, probe ? &trace : nullptr);
  const auto q = fwd.q.value().data();
  const int action = select_action(q, epsilon, policy_rng_, mode);
  const grid::StepResult res = env_.step(action);

  Transition tr;
  tr.obs = obs_;
  tr.next_obs = res.obs;
  tr.action = action;
  tr.reward = res.reward;
  tr.terminal = res.done;
  tr.truncated = res.truncated;
  tr.env_changed = res.env_changed;
  tr.episode = episode_;
  tr.step = t_;
  if (store_latent_ && variant_ == model::LatentMode::CarryZ) tr.z_init = CompactLatent::from(z_init);

  if (probe) {
    probe::ProbeRecord rec;
    rec.episode = episode_;
    rec.step = t_;
    rec.variant = variant_;
    rec.env_changed = obs_changed_;
    rec.trace = std::move(trace);
    rec.previous_final = carried_;
    rec.z_init = std::move(z_init);
    probe(std::move(rec));
  }

  carried_ = std::move(fwd.z_final);
  obs_ = res.obs;
  obs_changed_ = res.env_changed;
  ++t_;
  if (res.done || res.truncated) {
    finished_ = EpisodeSummary{episode_, res.done, t_};
    need_reset_ = true;
    carried_.reset();
  }
  return tr;
}

ValidationResult validate(const model::HrmModel& model, const grid::EnvConfig& env, model::LatentMode variant,
                          int episodes, std::uint64_t seed, const ProbeSink& probe) {
  if (episodes < 1) throw UsageError("validation needs at least one episode");
  Collector c(env, seed, variant, false);
  // Non-owning view; the model outlives this call.
  c.set_snapshot(std::shared_ptr<const model::HrmModel>(std::shared_ptr<void>(), &model));
  ValidationResult out;
  int successes = 0;
  long total_len = 0;
  while (out.episodes < episodes) {
    c.step(0.0, ActionMode::Validate, probe);
    if (const auto& e = c.last_episode()) {
      ++out.episodes;
      successes += e->success ? 1 : 0;
      total_len += e->length;
    }
  }
  out.success_frac = static_cast<double>(successes) / episodes;
  out.mean_ep_len = static_cast<double>(total_len) / episodes;
  return out;
}

}  // namespace hrm::dqn
