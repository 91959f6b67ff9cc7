#include "admrl/metapg/surrogate.hpp"

#include "admrl/common/error.hpp"

#include <cmath>

namespace admrl::metapg {

LossAndGrad reinforce_surrogate_grad(const StepBatch& batch, const GaussianPolicy& policy) {
  if (batch.advantages.size() != batch.log_probs.size() || batch.size() == 0)
    throw ContractError("reinforce_surrogate: trajectories carry no advantages");
  diff::Tape tape;
  diff::BoundParams bound(tape, policy.params);
  auto nodes = rollout::policy_forward(policy.arch, bound, tape.leaf(batch.observed));
  diff::Var lp = rollout::log_prob_rows(nodes, batch.actions);
  diff::Var loss = tape.scale(tape.mean(tape.mul(lp, tape.leaf(batch.advantages))), -1.0);
  tape.backward(loss);
  return {loss.scalar(), bound.gradient()};
}

LossAndGrad reinforce_surrogate_grad(std::span<const Trajectory> trajs, const GaussianPolicy& policy) {
  return reinforce_surrogate_grad(rollout::flatten(trajs), policy);
}

double reinforce_surrogate(std::span<const Trajectory> trajs, const GaussianPolicy& policy) {
  const StepBatch batch = rollout::flatten(trajs);
  return -(batch_log_probs(batch, policy).array() * batch.advantages.array()).mean();
}

Vector batch_log_probs(const StepBatch& batch, const GaussianPolicy& policy) {
  diff::Tape tape;
  diff::BoundParams bound(tape, policy.params);
  auto nodes = rollout::policy_forward(policy.arch, bound, tape.leaf(batch.observed));
  return rollout::log_prob_rows(nodes, batch.actions).value().col(0);
}

double importance_objective(const StepBatch& batch, const Vector& old_log_probs, const GaussianPolicy& policy) {
  const Vector lp = batch_log_probs(batch, policy);
  return ((lp - old_log_probs).array().exp() * batch.advantages.array()).mean();
}

double mean_kl(const Matrix& old_mean, const Vector& old_log_std, const Matrix& new_mean, const Vector& new_log_std) {
  if (old_mean.rows() != new_mean.rows() || old_mean.cols() != new_mean.cols()) throw ShapeError("mean_kl: shape mismatch");
  if (old_mean.rows() == 0) return 0.0;
  const Eigen::ArrayXd old_var = (2.0 * old_log_std.array()).exp();
  const Eigen::ArrayXd new_var = (2.0 * new_log_std.array()).exp();
  double total = 0.0;
  for (Eigen::Index j = 0; j < old_mean.cols(); ++j) {
    const double diff2 = (old_mean.col(j) - new_mean.col(j)).squaredNorm();
    const double n = static_cast<double>(old_mean.rows());
    total += n * (new_log_std[j] - old_log_std[j] + old_var[j] / (2.0 * new_var[j]) - 0.5) + diff2 / (2.0 * new_var[j]);
  }
  return total / static_cast<double>(old_mean.rows());
}

double mean_kl(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy, const Matrix& obs) {
  const auto a = rollout::action_distribution(old_policy, obs);
  const auto b = rollout::action_distribution(new_policy, obs);
  return mean_kl(a.mean, a.std.array().log().matrix(), b.mean, b.std.array().log().matrix());
}

struct FisherOperator::Impl {
  diff::Tape tape;
  std::unique_ptr<diff::BoundParams> bound;
  diff::Var mean;
  Eigen::RowVectorXd inv_var;
  std::size_t log_std_offset = 0;
  std::size_t log_std_size = 0;
  double rows = 1.0;
};

FisherOperator::FisherOperator(const GaussianPolicy& policy, const Matrix& obs) : impl_(std::make_unique<Impl>()) {
  if (obs.rows() == 0) throw ContractError("FisherOperator: no observations");
  impl_->bound = std::make_unique<diff::BoundParams>(impl_->tape, policy.params);
  auto nodes = rollout::policy_forward(policy.arch, *impl_->bound, impl_->tape.leaf(obs));
  impl_->mean = nodes.mean;
  impl_->inv_var = (-2.0 * nodes.log_std.value().row(0).array()).exp().matrix();
  const auto& seg = policy.params.layout().at("log_std");
  impl_->log_std_offset = seg.offset;
  impl_->log_std_size = seg.size();
  impl_->rows = static_cast<double>(obs.rows());
}

FisherOperator::~FisherOperator() = default;
FisherOperator::FisherOperator(FisherOperator&&) noexcept = default;
FisherOperator& FisherOperator::operator=(FisherOperator&&) noexcept = default;

Vector FisherOperator::apply(const Vector& v) const {
  auto& tape = impl_->tape;
  const Matrix jv = tape.jvp(impl_->mean, impl_->bound->tangents(v));
  Matrix w = (jv.array().rowwise() * impl_->inv_var.array()).matrix() / impl_->rows;
  diff::Var probe = tape.sum(tape.mul(impl_->mean, tape.leaf(std::move(w))));
  tape.backward(probe);
  Vector out = impl_->bound->gradient().values();
  const auto off = static_cast<Eigen::Index>(impl_->log_std_offset);
  const auto len = static_cast<Eigen::Index>(impl_->log_std_size);
  out.segment(off, len) += 2.0 * v.segment(off, len);
  return out;
}

}  // namespace admrl::metapg
