#include "admrl/envs/task.hpp"

#include "admrl/common/error.hpp"
#include "admrl/common/format.hpp"

#include <ostream>

namespace admrl::envs {

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Nav2D: return "nav2d";
    case FamilyKind::PointDir: return "point_dir";
    case FamilyKind::PointVel: return "point_vel";
  }
  return "?";
}

FamilyKind family_from_string(std::string_view name) {
  if (name == "nav2d") return FamilyKind::Nav2D;
  if (name == "point_dir") return FamilyKind::PointDir;
  if (name == "point_vel") return FamilyKind::PointVel;
  throw ContractError("unknown task family '" + std::string(name) + "'");
}

TaskFamily TaskFamily::defaults(FamilyKind kind) {
  TaskFamily f;
  f.kind = kind;
  switch (kind) {
    case FamilyKind::Nav2D:
      f.param_low = -0.5, f.param_high = 0.5, f.action_bound = 0.1;
      break;
    case FamilyKind::PointDir:
      f.param_low = -1.0, f.param_high = 1.0, f.action_bound = 1.0;
      break;
    case FamilyKind::PointVel:
      f.param_low = 0.0, f.param_high = 1.0, f.action_bound = 1.0;
      break;
  }
  return f;
}

void TaskFamily::validate() const {
  if (horizon < 1) throw ContractError("task family horizon must be >= 1");
  if (!(action_bound > 0.0)) throw ContractError("task family action bound must be > 0");
  if (!(dt > 0.0)) throw ContractError("task family dt must be > 0");
  if (param_low > param_high) throw ContractError("task family parameter range is empty");
}

std::vector<TaskSpec> sample_task_batch(const TaskFamily& family, std::size_t n, Rng& rng) {
  family.validate();
  if (n < 1) throw ContractError("sample_task_batch: n must be >= 1");
  std::vector<TaskSpec> tasks(n);
  for (auto& t : tasks) {
    t.kind = family.kind;
    switch (family.kind) {
      case FamilyKind::Nav2D:
        t.goal.x() = uniform(rng, family.param_low, family.param_high);
        t.goal.y() = uniform(rng, family.param_low, family.param_high);
        break;
      case FamilyKind::PointDir:
        t.direction = (rng() >> 63) != 0 ? 1.0 : -1.0;
        break;
      case FamilyKind::PointVel:
        t.target_speed = uniform(rng, family.param_low, family.param_high);
        break;
    }
  }
  return tasks;
}

State reset(const TaskFamily& family, const TaskSpec&) {
  return State::Zero(static_cast<Eigen::Index>(family.state_dim()));
}

Action clip_action(const TaskFamily& family, const Action& action) {
  return action.cwiseMax(-family.action_bound).cwiseMin(family.action_bound);
}

Transition step(const TaskFamily& family, const TaskSpec& task, const State& state, const Action& action) {
  if (static_cast<std::size_t>(action.size()) != family.action_dim())
    throw ShapeError("step: action has dimension " + std::to_string(action.size()) + ", expected 2");
  if (static_cast<std::size_t>(state.size()) != family.state_dim())
    throw ShapeError("step: state has dimension " + std::to_string(state.size()) + ", expected " +
                     std::to_string(family.state_dim()));
  if (task.kind != family.kind) throw ContractError("step: task does not belong to this family");

  const Action a = clip_action(family, action);
  Transition tr;
  tr.next_state = state;
  if (family.kind == FamilyKind::Nav2D) {
    tr.next_state += family.dt * a;
    const double dist2 = (tr.next_state - task.goal).squaredNorm();
    tr.reward = -dist2;
    tr.done = std::sqrt(dist2) < family.goal_tolerance;
    return tr;
  }

  // Point tasks: state = (position, velocity); the clipped action is the new velocity.
  tr.next_state.segment<2>(2) = a;
  tr.next_state.head<2>() += family.dt * a;
  const double ctrl = family.ctrl_cost * a.squaredNorm();
  if (family.kind == FamilyKind::PointDir)
    tr.reward = a.x() * task.direction - ctrl;
  else
    tr.reward = -std::abs(a.x() - task.target_speed) - ctrl;
  tr.done = false;
  return tr;
}

void write_tasks_csv(std::ostream& out, const std::vector<TaskSpec>& tasks) {
  out << "family,p0,p1\n";
  for (const auto& t : tasks) {
    out << to_string(t.kind) << ',';
    switch (t.kind) {
      case FamilyKind::Nav2D: out << format_double(t.goal.x()) << ',' << format_double(t.goal.y()); break;
      case FamilyKind::PointDir: out << format_double(t.direction) << ','; break;
      case FamilyKind::PointVel: out << format_double(t.target_speed) << ','; break;
    }
    out << '\n';
  }
}

}  // namespace admrl::envs
