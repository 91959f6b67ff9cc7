#pragma once

#include "admrl/diffcore/param_vector.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace admrl::rollout {

using diff::Matrix;
using diff::Vector;

/// One episode. All per-step arrays share the same length (<= horizon);
/// `returns` and `advantages` stay empty until computed. `actions` holds the
/// sampled (pre-clip) actions whose log-probabilities are in `log_probs`.
struct Trajectory {
  Matrix true_states;
  Matrix observed_states;
  Matrix actions;
  Vector rewards;
  Vector log_probs;
  Vector returns;
  Vector advantages;

  std::size_t length() const noexcept { return static_cast<std::size_t>(rewards.size()); }
  double total_reward() const { return rewards.sum(); }
  bool has_advantages() const noexcept { return advantages.size() == rewards.size() && rewards.size() > 0; }
};

/// Q_t = r_t + gamma Q_{t+1}, Q past the last step = 0.
Vector discounted_returns(const Trajectory& traj, double gamma);

/// Fills `returns` for every trajectory.
void compute_returns(std::span<Trajectory> trajs, double gamma);

/// Linear value baseline over [obs, obs^2, t/H, (t/H)^2, (t/H)^3, 1].
struct LinearBaseline {
  Vector coefficients;
  int horizon = 1;

  static Matrix features(const Trajectory& traj, int horizon);
  Vector predict(const Trajectory& traj) const;
};

inline constexpr double kBaselineRidge = 1e-5;

/// Ridge-regularized least squares of returns on baseline features.
LinearBaseline fit_baseline(std::span<const Trajectory> trajs, int horizon, double ridge = kBaselineRidge);

/// A = Q - b, then standardized over the whole batch to mean 0 and std 1;
/// a batch with zero spread gets all-zero advantages.
void compute_advantages(std::span<Trajectory> trajs, const LinearBaseline& baseline);

/// Same as above for a precomputed baseline prediction per trajectory.
void compute_advantages(std::span<Trajectory> trajs, std::span<const Vector> baseline_values);

/// Returns + baseline fit + advantages for one batch.
void process_batch(std::span<Trajectory> trajs, double gamma, int horizon);

/// All steps of a batch stacked row-wise.
struct StepBatch {
  Matrix true_states;
  Matrix observed;
  Matrix actions;
  Vector log_probs;
  Vector advantages;

  std::size_t size() const noexcept { return static_cast<std::size_t>(log_probs.size()); }
};

StepBatch flatten(std::span<const Trajectory> trajs, bool require_advantages = true);

/// Header: task_id,traj,t,state_0..,obs_0..,action_0..,reward,logp
void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajs, std::size_t task_id, bool header);

}  // namespace admrl::rollout
