#include "admrl/rollout/trajectory.hpp"

#include "admrl/common/error.hpp"
#include "admrl/common/format.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace admrl::rollout {

Vector discounted_returns(const Trajectory& traj, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("discounted_returns: gamma must lie in [0, 1]");
  const auto n = traj.rewards.size();
  Vector q(n);
  double running = 0.0;
  for (Eigen::Index t = n; t-- > 0;) {
    running = traj.rewards[t] + gamma * running;
    q[t] = running;
  }
  return q;
}

void compute_returns(std::span<Trajectory> trajs, double gamma) {
  for (auto& t : trajs) t.returns = discounted_returns(t, gamma);
}

Matrix LinearBaseline::features(const Trajectory& traj, int horizon) {
  const Matrix& obs = traj.observed_states;
  const Eigen::Index n = obs.rows();
  const Eigen::Index d = obs.cols();
  Matrix f(n, 2 * d + 4);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(horizon);
    f.block(t, 0, 1, d) = obs.row(t);
    f.block(t, d, 1, d) = obs.row(t).array().square().matrix();
    f(t, 2 * d) = s;
    f(t, 2 * d + 1) = s * s;
    f(t, 2 * d + 2) = s * s * s;
    f(t, 2 * d + 3) = 1.0;
  }
  return f;
}

Vector LinearBaseline::predict(const Trajectory& traj) const {
  Matrix f = features(traj, horizon);
  if (f.cols() != coefficients.size()) throw ShapeError("baseline coefficient length does not match feature length");
  return f * coefficients;
}

LinearBaseline fit_baseline(std::span<const Trajectory> trajs, int horizon, double ridge) {
  if (trajs.empty()) throw ContractError("fit_baseline: need at least one trajectory");
  const Eigen::Index width = 2 * trajs.front().observed_states.cols() + 4;
  Matrix ftf = Matrix::Zero(width, width);
  Vector ftr = Vector::Zero(width);
  for (const auto& t : trajs) {
    if (t.returns.size() != t.rewards.size()) throw ContractError("fit_baseline: returns not computed");
    Matrix f = LinearBaseline::features(t, horizon);
    ftf.noalias() += f.transpose() * f;
    ftr.noalias() += f.transpose() * t.returns;
  }
  ftf.diagonal().array() += ridge;
  return {ftf.ldlt().solve(ftr), horizon};
}

void compute_advantages(std::span<Trajectory> trajs, std::span<const Vector> baseline_values) {
  if (baseline_values.size() != trajs.size()) throw ShapeError("compute_advantages: one baseline vector per trajectory");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    auto& t = trajs[i];
    if (t.returns.size() != t.rewards.size()) throw ContractError("compute_advantages: returns not computed");
    if (baseline_values[i].size() != t.returns.size()) throw ShapeError("compute_advantages: baseline length mismatch");
    t.advantages = t.returns - baseline_values[i];
    sum += t.advantages.sum();
    count += t.length();
  }
  if (count == 0) return;
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (const auto& t : trajs) var += (t.advantages.array() - mean).square().sum();
  const double sd = std::sqrt(var / static_cast<double>(count));
  const bool degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
  for (auto& t : trajs) {
    if (degenerate)
      t.advantages.setZero();
    else
      t.advantages = (t.advantages.array() - mean) / sd;
  }
}

void compute_advantages(std::span<Trajectory> trajs, const LinearBaseline& baseline) {
  std::vector<Vector> values;
  values.reserve(trajs.size());
  for (const auto& t : trajs) values.push_back(baseline.predict(t));
  compute_advantages(trajs, values);
}

void process_batch(std::span<Trajectory> trajs, double gamma, int horizon) {
  compute_returns(trajs, gamma);
  const auto baseline = fit_baseline(trajs, horizon);
  compute_advantages(trajs, baseline);
}

StepBatch flatten(std::span<const Trajectory> trajs, bool require_advantages) {
  if (trajs.empty()) throw ContractError("flatten: empty trajectory batch");
  Eigen::Index n = 0;
  for (const auto& t : trajs) {
    if (require_advantages && !t.has_advantages()) throw ContractError("trajectory batch is missing advantages");
    const auto len = static_cast<Eigen::Index>(t.length());
    if (t.true_states.rows() != len || t.observed_states.rows() != len || t.actions.rows() != len ||
        t.log_probs.size() != len)
      throw ShapeError("flatten: trajectory arrays differ in length");
    n += len;
  }
  const auto& first = trajs.front();
  StepBatch b;
  b.true_states.resize(n, first.true_states.cols());
  b.observed.resize(n, first.observed_states.cols());
  b.actions.resize(n, first.actions.cols());
  b.log_probs.resize(n);
  b.advantages.resize(require_advantages ? n : 0);
  Eigen::Index row = 0;
  for (const auto& t : trajs) {
    const auto len = static_cast<Eigen::Index>(t.length());
    b.true_states.middleRows(row, len) = t.true_states;
    b.observed.middleRows(row, len) = t.observed_states;
    b.actions.middleRows(row, len) = t.actions;
    b.log_probs.segment(row, len) = t.log_probs;
    if (require_advantages) b.advantages.segment(row, len) = t.advantages;
    row += len;
  }
  return b;
}

void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajs, std::size_t task_id, bool header) {
  if (trajs.empty()) return;
  const auto d = trajs.front().true_states.cols();
  const auto a = trajs.front().actions.cols();
  if (header) {
    out << "task_id,traj,t";
    for (Eigen::Index i = 0; i < d; ++i) out << ",state_" << i;
    for (Eigen::Index i = 0; i < d; ++i) out << ",obs_" << i;
    for (Eigen::Index i = 0; i < a; ++i) out << ",action_" << i;
    out << ",reward,logp\n";
  }
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const auto& tr = trajs[k];
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(tr.length()); ++t) {
      out << task_id << ',' << k << ',' << t;
      for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(tr.true_states(t, i));
      for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(tr.observed_states(t, i));
      for (Eigen::Index i = 0; i < a; ++i) out << ',' << format_double(tr.actions(t, i));
      out << ',' << format_double(tr.rewards[t]) << ',' << format_double(tr.log_probs[t]) << '\n';
    }
  }
}

}  // namespace admrl::rollout
