#pragma once

#include "admrl/common/random.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace admrl::envs {

using State = Eigen::VectorXd;
using Action = Eigen::VectorXd;

enum class FamilyKind { Nav2D, PointDir, PointVel };

std::string_view to_string(FamilyKind kind);
FamilyKind family_from_string(std::string_view name);

/// A distribution over point-mass tasks. The task parameter range is
/// [param_low, param_high] (per goal coordinate for Nav2D, speed for PointVel;
/// unused for PointDir).
struct TaskFamily {
  FamilyKind kind = FamilyKind::Nav2D;
  double param_low = -0.5;
  double param_high = 0.5;
  int horizon = 50;
  double action_bound = 0.1;
  double dt = 0.1;
  double ctrl_cost = 0.05;
  double goal_tolerance = 0.01;

  /// Documented defaults for a family (box, bound, horizon).
  static TaskFamily defaults(FamilyKind kind);

  std::size_t state_dim() const { return kind == FamilyKind::Nav2D ? 2 : 4; }
  std::size_t action_dim() const { return 2; }
  void validate() const;
};

/// One task drawn from a family. `param` holds the goal (Nav2D), the
/// direction (+1/-1 along x, PointDir) or the target forward speed (PointVel).
struct TaskSpec {
  FamilyKind kind = FamilyKind::Nav2D;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  double direction = 1.0;
  double target_speed = 0.0;

  bool operator==(const TaskSpec& o) const {
    return kind == o.kind && goal == o.goal && direction == o.direction && target_speed == o.target_speed;
  }
};

struct Transition {
  State next_state;
  double reward = 0.0;
  bool done = false;
};

std::vector<TaskSpec> sample_task_batch(const TaskFamily& family, std::size_t n, Rng& rng);

/// Fixed start: origin (Nav2D) or origin with zero velocity (Point tasks).
State reset(const TaskFamily& family, const TaskSpec& task);

/// Applies the clipped action. Pure: identical inputs give identical output.
Transition step(const TaskFamily& family, const TaskSpec& task, const State& state, const Action& action);

/// Action with every coordinate clipped to [-bound, bound].
Action clip_action(const TaskFamily& family, const Action& action);

/// CSV with header `family,p0,p1`: goal components for Nav2D, direction for
/// PointDir, target speed for PointVel (p1 empty when unused).
void write_tasks_csv(std::ostream& out, const std::vector<TaskSpec>& tasks);

}  // namespace admrl::envs
