#pragma once

#include "admrl/common/random.hpp"
#include "admrl/envs/task.hpp"
#include "admrl/rollout/policy.hpp"
#include "admrl/rollout/trajectory.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace admrl::rollout {

/// Maps true states to what the policy observes. Rows of `states` are
/// independent environments; `rngs[i]` is the random stream of row i. The
/// acting policy is passed so gradient-based attacks can differentiate it.
class StatePerturber {
 public:
  virtual ~StatePerturber() = default;
  virtual Matrix perturb(const Matrix& states, const GaussianPolicy& acting, std::span<Rng* const> rngs) const = 0;
  virtual bool is_identity() const { return false; }
  virtual std::string name() const = 0;
};

class IdentityPerturber final : public StatePerturber {
 public:
  Matrix perturb(const Matrix& states, const GaussianPolicy&, std::span<Rng* const>) const override { return states; }
  bool is_identity() const override { return true; }
  std::string name() const override { return "identity"; }
};

/// Samples K episodes of at most H steps. Trajectory k draws actions from a
/// stream seeded with s_k = derive_seed(stream_seed, {k}); the perturber gets
/// its own stream derive_seed(s_k, {1}). At each step the perturber maps
/// the true state to an observation, the action is sampled from
/// pi(. | observation), and the environment advances from the TRUE state.
std::vector<Trajectory> collect_trajectories(const GaussianPolicy& policy, const envs::TaskFamily& family,
                                             const envs::TaskSpec& task, int K, int H, const StatePerturber& perturber,
                                             std::uint64_t stream_seed);

}  // namespace admrl::rollout
