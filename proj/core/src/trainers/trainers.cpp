#include "admrl/trainers/trainers.hpp"

#include "admrl/common/error.hpp"

#include <iostream>
#include <memory>
#include <sstream>

namespace admrl::trainers {

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::Maml: return "maml";
    case Regime::RandomNoise: return "random_noise";
    case Regime::FgsmTrain: return "fgsm";
    case Regime::AdMrl: return "admrl";
  }
  return "?";
}

Regime regime_from_string(std::string_view name) {
  if (name == "maml") return Regime::Maml;
  if (name == "random_noise" || name == "random") return Regime::RandomNoise;
  if (name == "fgsm") return Regime::FgsmTrain;
  if (name == "admrl") return Regime::AdMrl;
  throw ContractError("unknown regime: " + std::string(name));
}

attacks::AttackSpec TrainRun::regime_attack() const {
  attacks::AttackSpec spec = train_attack;
  switch (regime) {
    case Regime::Maml: spec.kind = attacks::AttackKind::Identity; break;
    case Regime::RandomNoise: spec.kind = attacks::AttackKind::RandomGaussian; break;
    case Regime::FgsmTrain: spec.kind = attacks::AttackKind::Fgsm; break;
    case Regime::AdMrl: spec.kind = attacks::AttackKind::AdGan; break;
  }
  return spec;
}

void TrainRun::validate() const {
  family.validate();
  meta.validate();
  if (total_iterations < 0) throw ContractError("total_iterations must be >= 0");
  if (noise_start_iteration < 0 || noise_start_iteration > total_iterations)
    throw ContractError("noise_start_iteration must lie in [0, total_iterations]");
  if (log_every <= 0) throw ContractError("log_every must be positive");
  if (policy.obs_dim != family.state_dim() || policy.act_dim != family.action_dim())
    throw ShapeError("policy dimensions do not match the task family");
  if (train_attack.scale < 0.0) throw ContractError("attack scale must be >= 0");
  if (gan.c <= 0.0) throw ContractError("generator bound c must be positive");
}

TrainState initial_state(const TrainRun& run) {
  run.validate();
  TrainState state;
  state.regime = run.regime;
  Rng policy_rng(derive_seed(run.seed, {tag(Stream::PolicyInit)}));
  state.theta = run.policy.initialize(policy_rng);
  if (run.regime == Regime::AdMrl) {
    Rng gan_rng(derive_seed(run.seed, {tag(Stream::GanInit)}));
    state.gan = attacks::make_adgan(run.family.state_dim(), run.gan, gan_rng);
  }
  return state;
}

std::vector<attacks::AdversarialQuery> adversarial_queries(const rollout::PolicyArch& arch,
                                                           const metapg::MetaObjective& objective) {
  std::vector<attacks::AdversarialQuery> out;
  out.reserve(objective.tasks.size());
  for (const auto& t : objective.tasks)
    out.push_back({rollout::flatten(t.query), rollout::GaussianPolicy{arch, t.adaptation.adapted}});
  return out;
}

diff::Matrix all_true_states(const metapg::MetaObjective& objective) {
  Eigen::Index rows = 0, cols = 0;
  auto visit = [&](const std::vector<rollout::Trajectory>& trajs, auto&& fn) {
    for (const auto& tr : trajs) fn(tr.true_states);
  };
  for (const auto& t : objective.tasks) {
    auto count = [&](const diff::Matrix& m) { rows += m.rows(); cols = m.cols(); };
    visit(t.adaptation.support, count);
    visit(t.query, count);
  }
  diff::Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& t : objective.tasks) {
    auto copy = [&](const diff::Matrix& m) { out.middleRows(r, m.rows()) = m; r += m.rows(); };
    visit(t.adaptation.support, copy);
    visit(t.query, copy);
  }
  return out;
}

TrainState train(const TrainRun& run, TrainState state, const TrainHooks& hooks) {
  run.validate();
  if (state.regime != run.regime) throw ContractError("train state belongs to a different regime");
  if (run.regime == Regime::AdMrl && !state.gan) throw ContractError("admrl state has no generator");
  auto log = [&](const std::string& msg) {
    if (hooks.log) hooks.log(msg);
    else std::clog << msg << '\n';
  };

  const auto attack = run.regime_attack();
  for (int it = state.iteration; it < run.total_iterations; ++it) {
    const bool perturbed = run.regime != Regime::Maml && it >= run.noise_start_iteration && !attack.is_identity();
    if (perturbed && it == run.noise_start_iteration) {
      std::ostringstream msg;
      msg << "iteration " << it << ": " << to_string(run.regime) << " perturber activated (" << to_string(attack.kind)
          << ", scale " << attack.scale << ")";
      log(msg.str());
    }

    std::shared_ptr<const attacks::AdGanParams> gan;
    if (state.gan) gan = std::make_shared<const attacks::AdGanParams>(*state.gan);
    std::unique_ptr<rollout::StatePerturber> perturber =
        perturbed ? attacks::make_perturber(attack, gan) : std::make_unique<rollout::IdentityPerturber>();

    Rng task_rng(derive_seed(run.seed, {tag(Stream::TaskBatch), static_cast<std::uint64_t>(it)}));
    const auto tasks = envs::sample_task_batch(run.family, static_cast<std::size_t>(run.meta.meta_batch_size), task_rng);
    const rollout::GaussianPolicy policy{run.policy, state.theta};
    const metapg::SeedPlan seeds{run.seed, static_cast<std::uint64_t>(it)};
    const auto objective = metapg::meta_objective(policy, run.family, tasks, *perturber, run.meta, seeds, run.workers);
    const auto update = metapg::meta_update(policy, objective, run.meta, run.workers);
    if (update.trpo.fallback) {
      ++state.aborted_trpo_steps;
      log("iteration " + std::to_string(it) + ": trust-region step rejected, parameters unchanged");
    }

    if (perturbed && run.regime == Regime::AdMrl) {
      const auto queries = adversarial_queries(run.policy, objective);
      const auto real = all_true_states(objective);
      auto g = attacks::gan_update(*state.gan, state.gan_optimizer, real, queries, run.gan_optimizer,
                                   attacks::budget_gain(*state.gan, attack.budget()));
      state.gan = std::move(g.gan);
      state.gan_optimizer = std::move(g.state);
      state.last_gan_terms = g.terms;
    }

    if (hooks.on_iteration) hooks.on_iteration({it, perturbed, &objective, &update.trpo});
    if (it % run.log_every == 0)
      state.series.push_back({it, objective.mean_query_return(), objective.mean_support_return()});

    state.theta = update.trpo.params;
    state.iteration = it + 1;
    if (state.iteration % run.log_every == 0 && hooks.on_checkpoint) hooks.on_checkpoint(state);
  }
  return state;
}

namespace {

TrainState run_regime(const TrainRun& run, Regime expected, const TrainHooks& hooks) {
  if (run.regime != expected) throw ContractError("run regime does not match the trainer");
  return train(run, initial_state(run), hooks);
}

}  // namespace

TrainResult train_maml(const TrainRun& run, const TrainHooks& hooks) {
  auto s = run_regime(run, Regime::Maml, hooks);
  return {std::move(s.theta), std::move(s.series)};
}

TrainResult train_random_noise(const TrainRun& run, const TrainHooks& hooks) {
  auto s = run_regime(run, Regime::RandomNoise, hooks);
  return {std::move(s.theta), std::move(s.series)};
}

TrainResult train_fgsm(const TrainRun& run, const TrainHooks& hooks) {
  auto s = run_regime(run, Regime::FgsmTrain, hooks);
  return {std::move(s.theta), std::move(s.series)};
}

AdMrlResult train_admrl(const TrainRun& run, const TrainHooks& hooks) {
  auto s = run_regime(run, Regime::AdMrl, hooks);
  return {std::move(s.theta), std::move(*s.gan), std::move(s.series)};
}

}  // namespace admrl::trainers
