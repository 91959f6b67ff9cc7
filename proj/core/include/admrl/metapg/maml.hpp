#pragma once

#include "admrl/common/random.hpp"
#include "admrl/envs/task.hpp"
#include "admrl/metapg/surrogate.hpp"
#include "admrl/metapg/trpo.hpp"
#include "admrl/rollout/collect.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace admrl::metapg {

struct MetaConfig {
  double inner_lr = 0.1;
  int inner_steps = 1;
  int meta_batch_size = 20;
  int K = 10;
  double gamma = 0.99;
  TrpoConfig trpo;

  /// Defaults for a task family (inner_lr 0.1 for Nav2D, 0.05 otherwise).
  static MetaConfig defaults(envs::FamilyKind kind);
  void validate() const;
};

/// theta' = theta - inner_lr * grad of the surrogate on the support batch.
ParamVector inner_adapt(const GaussianPolicy& policy, std::span<const Trajectory> support, double inner_lr);

struct AdaptedPolicy {
  ParamVector base;
  ParamVector adapted;
  std::vector<Trajectory> support;
};

/// Where the rollout streams of one meta-batch come from: task i's support
/// seed is derive_seed(master, {support_tag, iteration, i}) and likewise for
/// the query phase.
struct SeedPlan {
  std::uint64_t master = 0;
  std::uint64_t iteration = 0;
  Stream support = Stream::Support;
  Stream query = Stream::Query;

  std::uint64_t support_seed(std::size_t task, std::size_t inner_step = 0) const;
  std::uint64_t query_seed(std::size_t task) const;
};

/// Samples support rollouts, adapts (inner_steps gradient steps; later steps
/// resample with the partially adapted policy) and returns the adapted policy.
AdaptedPolicy adapt_to_task(const GaussianPolicy& policy, const envs::TaskFamily& family, const envs::TaskSpec& task,
                            const rollout::StatePerturber& perturber, const MetaConfig& cfg, const SeedPlan& seeds,
                            std::size_t task_index);

struct TaskRollouts {
  envs::TaskSpec task;
  AdaptedPolicy adaptation;
  std::vector<Trajectory> query;
  double query_loss = 0.0;
};

struct MetaObjective {
  double loss = 0.0;
  std::vector<TaskRollouts> tasks;

  double mean_support_return() const;  // undiscounted, pre-adaptation
  double mean_query_return() const;    // undiscounted, post-adaptation
};

/// For every task: support rollouts, inner adaptation, query rollouts with the
/// adapted policy (both phases under `perturber`) and the query surrogate.
/// Returns the task-mean surrogate. Tasks run on `workers` threads; results
/// are stored by task index.
MetaObjective meta_objective(const GaussianPolicy& policy, const envs::TaskFamily& family,
                             std::span<const envs::TaskSpec> tasks, const rollout::StatePerturber& perturber,
                             const MetaConfig& cfg, const SeedPlan& seeds, std::size_t workers = 1);

struct MetaUpdate {
  TrpoResult trpo;
  ParamVector meta_gradient;  // first-order: mean of query-surrogate gradients at each adapted theta'
};

/// First-order outer step: the adapted parameters move with theta (theta'_i +
/// delta), so the trust region, surrogate and KL are evaluated at each
/// theta'_i shifted by the candidate step.
MetaUpdate meta_update(const GaussianPolicy& policy, const MetaObjective& objective, const MetaConfig& cfg,
                       std::size_t workers = 1);

}  // namespace admrl::metapg
