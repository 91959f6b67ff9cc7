#pragma once

#include "admrl/attacks/gan_training.hpp"
#include "admrl/metapg/maml.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace admrl::trainers {

using diff::ParamVector;

enum class Regime { Maml, RandomNoise, FgsmTrain, AdMrl };

std::string_view to_string(Regime regime);
Regime regime_from_string(std::string_view name);

/// Everything a training run needs. Randomness is derived from `seed` only,
/// never from the regime, so regimes share identical clean prefixes.
struct TrainRun {
  Regime regime = Regime::Maml;
  int total_iterations = 500;
  int noise_start_iteration = 300;
  int log_every = 50;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  envs::TaskFamily family;
  rollout::PolicyArch policy;
  metapg::MetaConfig meta;

  /// Perturbation used once the schedule activates. `kind` is derived from the
  /// regime; scale/mu/sigma come from configuration.
  attacks::AttackSpec train_attack{attacks::AttackKind::Identity, 0.5, 0.0, 1.0};
  attacks::AdGanArch gan;
  diff::Adam gan_optimizer{1e-3, 0.9, 0.999, 1e-8};

  attacks::AttackSpec regime_attack() const;
  void validate() const;
};

struct ConvergencePoint {
  int iteration = 0;
  double mean_return = 0.0;      // post-adaptation (query) return
  double pre_adapt_return = 0.0; // support return

  bool operator==(const ConvergencePoint&) const = default;
};

/// Resumable training state. `iteration` is the next iteration to run.
struct TrainState {
  Regime regime = Regime::Maml;
  int iteration = 0;
  ParamVector theta;
  std::optional<attacks::AdGanParams> gan;
  attacks::GanOptimizerState gan_optimizer;
  std::vector<ConvergencePoint> series;
  int aborted_trpo_steps = 0;
  attacks::GanTerms last_gan_terms;
};

struct IterationInfo {
  int iteration = 0;
  bool perturbed = false;
  const metapg::MetaObjective* objective = nullptr;
  const metapg::TrpoResult* trpo = nullptr;
};

struct TrainHooks {
  /// Called after every iteration (before the state advances).
  std::function<void(const IterationInfo&)> on_iteration;
  /// Called whenever `iteration` reaches a multiple of log_every.
  std::function<void(const TrainState&)> on_checkpoint;
  /// Log sink; defaults to std::clog.
  std::function<void(const std::string&)> log;
};

/// Fresh state: seeded policy initialization (and generator for AdMrl).
TrainState initial_state(const TrainRun& run);

/// Runs iterations [state.iteration, total_iterations). Deterministic given
/// (run, state) and independent of the worker count.
TrainState train(const TrainRun& run, TrainState state, const TrainHooks& hooks = {});

struct TrainResult {
  ParamVector policy;
  std::vector<ConvergencePoint> series;
};

struct AdMrlResult {
  ParamVector policy;
  attacks::AdGanParams gan;
  std::vector<ConvergencePoint> series;
};

TrainResult train_maml(const TrainRun& run, const TrainHooks& hooks = {});
TrainResult train_random_noise(const TrainRun& run, const TrainHooks& hooks = {});
TrainResult train_fgsm(const TrainRun& run, const TrainHooks& hooks = {});
AdMrlResult train_admrl(const TrainRun& run, const TrainHooks& hooks = {});

/// Builds the per-task adversarial batches and the GAN state batch (true
/// states of both phases) from one meta-batch of rollouts.
std::vector<attacks::AdversarialQuery> adversarial_queries(const rollout::PolicyArch& arch,
                                                           const metapg::MetaObjective& objective);
diff::Matrix all_true_states(const metapg::MetaObjective& objective);

}  // namespace admrl::trainers
