#include "admrl/trainers/meta_test.hpp"

#include "admrl/common/error.hpp"
#include "admrl/common/parallel.hpp"

#include <cmath>

namespace admrl::trainers {

namespace {

double mean_total_reward(const std::vector<rollout::Trajectory>& trajs) {
  double s = 0.0;
  for (const auto& t : trajs) s += t.total_reward();
  return trajs.empty() ? 0.0 : s / static_cast<double>(trajs.size());
}

}  // namespace

std::vector<envs::TaskSpec> held_out_tasks(const envs::TaskFamily& family, std::size_t n, std::uint64_t master_seed) {
  Rng rng(derive_seed(master_seed, {tag(Stream::EvalTasks)}));
  return envs::sample_task_batch(family, n, rng);
}

double uniform_policy_return(const envs::TaskFamily& family, std::span<const envs::TaskSpec> tasks, int K,
                             std::uint64_t seed) {
  if (tasks.empty() || K < 1) throw ContractError("uniform_policy_return needs tasks and K >= 1");
  const auto a = static_cast<Eigen::Index>(family.action_dim());
  double total = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (int k = 0; k < K; ++k) {
      Rng rng(derive_seed(seed, {tag(Stream::UniformPolicy), i, static_cast<std::uint64_t>(k)}));
      envs::State s = envs::reset(family, tasks[i]);
      for (int t = 0; t < family.horizon; ++t) {
        envs::Action act(a);
        for (Eigen::Index j = 0; j < a; ++j) act[j] = uniform(rng, -family.action_bound, family.action_bound);
        const auto tr = envs::step(family, tasks[i], s, act);
        total += tr.reward;
        s = tr.next_state;
        if (tr.done) break;
      }
    }
  }
  return total / static_cast<double>(tasks.size() * static_cast<std::size_t>(K));
}

EvalRow meta_test(const rollout::GaussianPolicy& policy, const attacks::AttackSpec& attack,
                  std::span<const envs::TaskSpec> tasks, const envs::TaskFamily& family, const metapg::MetaConfig& cfg,
                  std::shared_ptr<const attacks::AdGanParams> gan, std::uint64_t eval_seed, std::size_t workers) {
  if (tasks.empty()) throw ContractError("meta_test needs at least one task");
  const auto perturber = attacks::make_perturber(attack, std::move(gan));
  const metapg::SeedPlan seeds{eval_seed, 0, Stream::EvalSupport, Stream::EvalQuery};

  EvalRow row;
  row.attack = attack.kind;
  row.scale = attack.scale;
  row.n_tasks = static_cast<int>(tasks.size());
  row.per_task.resize(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    const auto adapted = metapg::adapt_to_task(policy, family, tasks[i], *perturber, cfg, seeds, i);
    const auto query = rollout::collect_trajectories(policy.with_params(adapted.adapted), family, tasks[i],
                                                     static_cast<std::size_t>(cfg.K), family.horizon, *perturber,
                                                     seeds.query_seed(i));
    row.per_task[i] = {mean_total_reward(adapted.support), mean_total_reward(query)};
  });

  double post = 0.0, pre = 0.0;
  for (const auto& s : row.per_task) {
    post += s.post_adapt_return;
    pre += s.pre_adapt_return;
  }
  const double n = static_cast<double>(tasks.size());
  row.mean_return = post / n;
  row.pre_adapt_mean_return = pre / n;
  double var = 0.0;
  for (const auto& s : row.per_task) var += (s.post_adapt_return - row.mean_return) * (s.post_adapt_return - row.mean_return);
  row.std_return = std::sqrt(var / n);
  return row;
}

attacks::AdGanParams train_attacker(const rollout::GaussianPolicy& victim, const envs::TaskFamily& family,
                                    const metapg::MetaConfig& cfg, const AttackerRun& run) {
  if (run.iterations < 0) throw ContractError("attacker iterations must be >= 0");
  Rng init(derive_seed(run.seed, {tag(Stream::AttackerInit)}));
  auto gan = attacks::make_adgan(family.state_dim(), run.arch, init);
  attacks::GanOptimizerState opt;
  const attacks::AttackSpec spec{attacks::AttackKind::AdGan, run.budget};
  for (int it = 0; it < run.iterations; ++it) {
    auto shared = std::make_shared<const attacks::AdGanParams>(gan);
    const auto perturber = attacks::make_perturber(spec, shared);
    Rng task_rng(derive_seed(run.seed, {tag(Stream::AttackerTasks), static_cast<std::uint64_t>(it)}));
    const auto tasks = envs::sample_task_batch(family, static_cast<std::size_t>(cfg.meta_batch_size), task_rng);
    const metapg::SeedPlan seeds{run.seed, static_cast<std::uint64_t>(it), Stream::AttackerSupport,
                                 Stream::AttackerQuery};
    const auto objective = metapg::meta_objective(victim, family, tasks, *perturber, cfg, seeds, run.workers);
    const auto queries = adversarial_queries(victim.arch, objective);
    auto g = attacks::gan_update(gan, opt, all_true_states(objective), queries, run.optimizer,
                                 attacks::budget_gain(gan, run.budget));
    gan = std::move(g.gan);
    opt = std::move(g.state);
  }
  return gan;
}

}  // namespace admrl::trainers
