#pragma once

#include "admrl/attacks/gan_training.hpp"
#include "admrl/metapg/maml.hpp"
#include "admrl/trainers/trainers.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace admrl::trainers {

struct TaskScore {
  double pre_adapt_return = 0.0;
  double post_adapt_return = 0.0;
};

/// One (regime, attack, scale) cell of an evaluation grid.
struct EvalRow {
  std::string regime;
  attacks::AttackKind attack = attacks::AttackKind::Identity;
  double scale = 0.0;
  double mean_return = 0.0;  // post-adaptation, undiscounted, mean over tasks
  double std_return = 0.0;   // population std over tasks
  int n_tasks = 0;
  double pre_adapt_mean_return = 0.0;
  std::vector<TaskScore> per_task;
};

/// Held-out evaluation: for every task, K support rollouts under the attack,
/// one inner step, K query rollouts under the attack. Never modifies the
/// policy or the generator. Rollout seeds depend only on (eval_seed, task
/// index), so rows for different attacks are paired.
EvalRow meta_test(const rollout::GaussianPolicy& policy, const attacks::AttackSpec& attack,
                  std::span<const envs::TaskSpec> tasks, const envs::TaskFamily& family, const metapg::MetaConfig& cfg,
                  std::shared_ptr<const attacks::AdGanParams> gan, std::uint64_t eval_seed, std::size_t workers = 1);

/// Held-out task set for a run; identical for every regime.
std::vector<envs::TaskSpec> held_out_tasks(const envs::TaskFamily& family, std::size_t n, std::uint64_t master_seed);

/// Mean undiscounted return of a policy that draws every action uniformly
/// from the action box: K episodes per task, averaged over tasks. The
/// reference point for "improvement over a random policy".
double uniform_policy_return(const envs::TaskFamily& family, std::span<const envs::TaskSpec> tasks, int K,
                             std::uint64_t seed);

struct AttackerRun {
  int iterations = 100;
  double budget = 0.5;
  attacks::AdGanArch arch;
  diff::Adam optimizer{1e-3, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

/// Trains a fresh generator/discriminator against a frozen policy with the
/// same composite objective and rollout protocol as adversarial training, on
/// training-distribution tasks. The policy is not updated.
attacks::AdGanParams train_attacker(const rollout::GaussianPolicy& victim, const envs::TaskFamily& family,
                                    const metapg::MetaConfig& cfg, const AttackerRun& run);

}  // namespace admrl::trainers
