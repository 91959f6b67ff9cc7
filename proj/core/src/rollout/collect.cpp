#include "admrl/rollout/collect.hpp"

#include "admrl/common/error.hpp"

#include <cmath>

namespace admrl::rollout {

namespace {
constexpr std::uint64_t kAttackStream = 1;
}

std::vector<Trajectory> collect_trajectories(const GaussianPolicy& policy, const envs::TaskFamily& family,
                                             const envs::TaskSpec& task, int K, int H, const StatePerturber& perturber,
                                             std::uint64_t stream_seed) {
  if (K < 1) throw ContractError("collect_trajectories: K must be >= 1");
  if (H < 1) throw ContractError("collect_trajectories: H must be >= 1");
  const auto d = static_cast<Eigen::Index>(family.state_dim());
  const auto a = static_cast<Eigen::Index>(family.action_dim());
  if (static_cast<Eigen::Index>(policy.arch.obs_dim) != d || static_cast<Eigen::Index>(policy.arch.act_dim) != a)
    throw ShapeError("policy dimensions do not match the task family");

  // Actions and perturbations draw from separate streams so that an attack
  // which consumes randomness leaves the action noise untouched.
  std::vector<Rng> rngs;
  std::vector<Rng> attack_rngs;
  rngs.reserve(static_cast<std::size_t>(K));
  attack_rngs.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto seed = derive_seed(stream_seed, {static_cast<std::uint64_t>(k)});
    rngs.emplace_back(seed);
    attack_rngs.emplace_back(derive_seed(seed, {kAttackStream}));
  }

  std::vector<Trajectory> trajs(static_cast<std::size_t>(K));
  for (auto& t : trajs) {
    t.true_states.resize(H, d);
    t.observed_states.resize(H, d);
    t.actions.resize(H, a);
    t.rewards.resize(H);
    t.log_probs.resize(H);
  }
  std::vector<int> length(static_cast<std::size_t>(K), 0);
  std::vector<envs::State> current(static_cast<std::size_t>(K), envs::reset(family, task));
  std::vector<std::size_t> active(static_cast<std::size_t>(K));
  for (std::size_t k = 0; k < active.size(); ++k) active[k] = k;

  const Vector std_dev = policy.params.block("log_std").row(0).transpose().array().exp();
  std::vector<Rng*> active_rngs;
  for (int t = 0; t < H && !active.empty(); ++t) {
    const auto n = static_cast<Eigen::Index>(active.size());
    Matrix batch(n, d);
    active_rngs.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      batch.row(i) = current[active[static_cast<std::size_t>(i)]].transpose();
      active_rngs.push_back(&attack_rngs[active[static_cast<std::size_t>(i)]]);
    }
    Matrix obs = perturber.perturb(batch, policy, active_rngs);
    if (obs.rows() != n || obs.cols() != d) throw ShapeError("perturber changed the observation shape");
    const ActionDistribution dist = action_distribution(policy, obs);

    std::vector<std::size_t> still_active;
    still_active.reserve(active.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t k = active[static_cast<std::size_t>(i)];
      Rng& rng = rngs[k];
      Vector action(a);
      for (Eigen::Index j = 0; j < a; ++j) action[j] = dist.mean(i, j) + std_dev[j] * standard_normal(rng);
      const envs::Transition tr = envs::step(family, task, current[k], action);

      Trajectory& traj = trajs[k];
      const int row = length[k]++;
      traj.true_states.row(row) = current[k].transpose();
      traj.observed_states.row(row) = obs.row(i);
      traj.actions.row(row) = action.transpose();
      traj.rewards[row] = tr.reward;
      traj.log_probs[row] = log_prob(dist.mean.row(i).transpose(), std_dev, action);
      current[k] = tr.next_state;
      if (!tr.done) still_active.push_back(k);
    }
    active.swap(still_active);
  }

  for (std::size_t k = 0; k < trajs.size(); ++k) {
    auto& t = trajs[k];
    const int len = length[k];
    t.true_states.conservativeResize(len, d);
    t.observed_states.conservativeResize(len, d);
    t.actions.conservativeResize(len, a);
    t.rewards.conservativeResize(len);
    t.log_probs.conservativeResize(len);
  }
  return trajs;
}

}  // namespace admrl::rollout
