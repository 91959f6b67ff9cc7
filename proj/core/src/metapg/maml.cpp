#include "admrl/metapg/maml.hpp"

#include "admrl/common/error.hpp"
#include "admrl/common/parallel.hpp"

namespace admrl::metapg {

MetaConfig MetaConfig::defaults(envs::FamilyKind kind) {
  MetaConfig c;
  c.inner_lr = kind == envs::FamilyKind::Nav2D ? 0.1 : 0.05;
  return c;
}

void MetaConfig::validate() const {
  if (!(inner_lr > 0.0)) throw ContractError("metapg: inner_lr must be > 0");
  if (inner_steps < 1) throw ContractError("metapg: inner_steps must be >= 1");
  if (meta_batch_size < 1) throw ContractError("metapg: meta_batch_size must be >= 1");
  if (K < 1) throw ContractError("metapg: K must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("metapg: gamma must lie in [0, 1]");
  trpo.validate();
}

std::uint64_t SeedPlan::support_seed(std::size_t task, std::size_t inner_step) const {
  if (inner_step == 0) return derive_seed(master, {tag(support), iteration, task});
  return derive_seed(master, {tag(support), iteration, task, inner_step});
}

std::uint64_t SeedPlan::query_seed(std::size_t task) const {
  return derive_seed(master, {tag(query), iteration, task});
}

ParamVector inner_adapt(const GaussianPolicy& policy, std::span<const Trajectory> support, double inner_lr) {
  if (support.empty()) throw ContractError("inner_adapt: support set is empty");
  const auto g = reinforce_surrogate_grad(support, policy);
  return ParamVector(policy.params.shared_layout(), policy.params.values() - inner_lr * g.grad.values());
}

AdaptedPolicy adapt_to_task(const GaussianPolicy& policy, const envs::TaskFamily& family, const envs::TaskSpec& task,
                            const rollout::StatePerturber& perturber, const MetaConfig& cfg, const SeedPlan& seeds,
                            std::size_t task_index) {
  AdaptedPolicy out;
  out.base = policy.params;
  GaussianPolicy current = policy;
  for (int step = 0; step < cfg.inner_steps; ++step) {
    auto support = rollout::collect_trajectories(current, family, task, cfg.K, family.horizon, perturber,
                                                 seeds.support_seed(task_index, static_cast<std::size_t>(step)));
    rollout::process_batch(support, cfg.gamma, family.horizon);
    current.params = inner_adapt(current, support, cfg.inner_lr);
    if (step == 0) out.support = std::move(support);
  }
  out.adapted = current.params;
  return out;
}

double MetaObjective::mean_support_return() const {
  double total = 0.0;
  for (const auto& t : tasks) {
    double r = 0.0;
    for (const auto& tr : t.adaptation.support) r += tr.total_reward();
    total += r / static_cast<double>(t.adaptation.support.size());
  }
  return tasks.empty() ? 0.0 : total / static_cast<double>(tasks.size());
}

double MetaObjective::mean_query_return() const {
  double total = 0.0;
  for (const auto& t : tasks) {
    double r = 0.0;
    for (const auto& tr : t.query) r += tr.total_reward();
    total += r / static_cast<double>(t.query.size());
  }
  return tasks.empty() ? 0.0 : total / static_cast<double>(tasks.size());
}

MetaObjective meta_objective(const GaussianPolicy& policy, const envs::TaskFamily& family,
                             std::span<const envs::TaskSpec> tasks, const rollout::StatePerturber& perturber,
                             const MetaConfig& cfg, const SeedPlan& seeds, std::size_t workers) {
  cfg.validate();
  if (tasks.empty()) throw ContractError("meta_objective: no tasks");
  MetaObjective out;
  out.tasks.resize(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    TaskRollouts& tr = out.tasks[i];
    tr.task = tasks[i];
    tr.adaptation = adapt_to_task(policy, family, tasks[i], perturber, cfg, seeds, i);
    const GaussianPolicy adapted = policy.with_params(tr.adaptation.adapted);
    tr.query = rollout::collect_trajectories(adapted, family, tasks[i], cfg.K, family.horizon, perturber,
                                             seeds.query_seed(i));
    rollout::process_batch(tr.query, cfg.gamma, family.horizon);
    tr.query_loss = reinforce_surrogate(tr.query, adapted);
  });
  double total = 0.0;
  for (const auto& t : out.tasks) total += t.query_loss;
  out.loss = total / static_cast<double>(out.tasks.size());
  return out;
}

MetaUpdate meta_update(const GaussianPolicy& policy, const MetaObjective& objective, const MetaConfig& cfg,
                       std::size_t workers) {
  cfg.validate();
  const std::size_t n = objective.tasks.size();
  if (n == 0) throw ContractError("meta_update: no task rollouts");

  struct TaskState {
    StepBatch batch;
    GaussianPolicy adapted;
    Vector old_log_probs;
    Matrix old_mean;
    Vector old_log_std;
    ParamVector grad;
    std::unique_ptr<FisherOperator> fisher;
  };
  std::vector<TaskState> states(n);
  parallel_for(n, workers, [&](std::size_t i) {
    TaskState& s = states[i];
    s.batch = rollout::flatten(objective.tasks[i].query);
    s.adapted = policy.with_params(objective.tasks[i].adaptation.adapted);
    s.grad = reinforce_surrogate_grad(s.batch, s.adapted).grad;
    s.old_log_probs = batch_log_probs(s.batch, s.adapted);
    const auto dist = rollout::action_distribution(s.adapted, s.batch.observed);
    s.old_mean = dist.mean;
    s.old_log_std = dist.std.array().log();
    s.fisher = std::make_unique<FisherOperator>(s.adapted, s.batch.observed);
  });

  MetaUpdate out;
  out.meta_gradient = ParamVector::zeros_like(policy.params);
  for (const auto& s : states) out.meta_gradient.values() += s.grad.values();
  out.meta_gradient.values() /= static_cast<double>(n);
  ParamVector ascent(policy.params.shared_layout(), -out.meta_gradient.values());

  const Vector& theta = policy.params.values();
  auto shifted = [&](const TaskState& s, const ParamVector& candidate) {
    return s.adapted.with_params(
        ParamVector(s.adapted.params.shared_layout(), s.adapted.params.values() + (candidate.values() - theta)));
  };

  auto fisher = [&](const Vector& v) {
    std::vector<Vector> parts(n);
    parallel_for(n, workers, [&](std::size_t i) { parts[i] = states[i].fisher->apply(v); });
    Vector total = Vector::Zero(v.size());
    for (const auto& p : parts) total += p;
    return Vector(total / static_cast<double>(n));
  };
  auto surrogate = [&](const ParamVector& candidate) {
    std::vector<double> parts(n);
    parallel_for(n, workers, [&](std::size_t i) {
      parts[i] = importance_objective(states[i].batch, states[i].old_log_probs, shifted(states[i], candidate));
    });
    double total = 0.0;
    for (double p : parts) total += p;
    return total / static_cast<double>(n);
  };
  auto kl = [&](const ParamVector& candidate) {
    std::vector<double> parts(n);
    parallel_for(n, workers, [&](std::size_t i) {
      const auto dist = rollout::action_distribution(shifted(states[i], candidate), states[i].batch.observed);
      parts[i] = mean_kl(states[i].old_mean, states[i].old_log_std, dist.mean, dist.std.array().log().matrix());
    });
    double total = 0.0;
    for (double p : parts) total += p;
    return total / static_cast<double>(n);
  };

  out.trpo = trpo_step(policy.params, ascent, fisher, surrogate, kl, cfg.trpo);
  return out;
}

}  // namespace admrl::metapg
