#pragma once

#include "admrl/rollout/policy.hpp"
#include "admrl/rollout/trajectory.hpp"

#include <memory>
#include <span>

namespace admrl::metapg {

using diff::Matrix;
using diff::ParamVector;
using diff::Vector;
using rollout::GaussianPolicy;
using rollout::StepBatch;
using rollout::Trajectory;

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// -(1/N) sum_t log pi(a_t | obs_t) A_t over every step of every trajectory.
/// Throws ContractError when advantages are missing.
double reinforce_surrogate(std::span<const Trajectory> trajs, const GaussianPolicy& policy);
LossAndGrad reinforce_surrogate_grad(std::span<const Trajectory> trajs, const GaussianPolicy& policy);
LossAndGrad reinforce_surrogate_grad(const StepBatch& batch, const GaussianPolicy& policy);

/// Importance-weighted objective mean(pi_new / pi_old * A) (higher is better);
/// `old_log_probs` are evaluated under the behaviour policy.
double importance_objective(const StepBatch& batch, const Vector& old_log_probs, const GaussianPolicy& policy);

/// Log-probabilities of the batch actions under `policy`.
Vector batch_log_probs(const StepBatch& batch, const GaussianPolicy& policy);

/// Mean over rows of KL(old || new) for diagonal Gaussians with shared std.
double mean_kl(const Matrix& old_mean, const Vector& old_log_std, const Matrix& new_mean, const Vector& new_log_std);
double mean_kl(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy, const Matrix& obs);

/// Exact Fisher information of the Gaussian policy at fixed parameters,
/// averaged over a set of observations: J^T diag(1/sigma^2) J / N for the mean
/// network and 2 I on the log-std block. The forward pass is built once and
/// reused across products.
class FisherOperator {
 public:
  FisherOperator(const GaussianPolicy& policy, const Matrix& obs);
  ~FisherOperator();
  FisherOperator(FisherOperator&&) noexcept;
  FisherOperator& operator=(FisherOperator&&) noexcept;

  Vector apply(const Vector& v) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace admrl::metapg
