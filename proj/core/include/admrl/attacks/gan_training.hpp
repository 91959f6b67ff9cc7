#pragma once

#include "admrl/attacks/attacks.hpp"
#include "admrl/diffcore/optim.hpp"
#include "admrl/rollout/trajectory.hpp"

#include <span>
#include <vector>

namespace admrl::attacks {

/// Outer-loop data for the adversarial term: one task's query steps (true
/// states, actions, advantages) and the adapted policy that produced them.
struct AdversarialQuery {
  rollout::StepBatch batch;
  rollout::GaussianPolicy adapted;
};

struct GanTerms {
  double adv = 0.0;
  double gan = 0.0;
  double hinge = 0.0;
  double total = 0.0;
  double mean_perturbation_norm = 0.0;
};

struct GanGradients {
  GanTerms terms;
  ParamVector generator;
  ParamVector discriminator;
};

/// L = L_adv + alpha L_GAN + beta L_hinge and its gradient with respect to
/// both generator and discriminator. The adversarial term re-evaluates each
/// query surrogate with observations x + G(x); trajectories, actions and
/// advantages are held fixed. `real_states` feed the GAN and hinge terms.
/// The played perturbation is gain * G(x) (see budget_gain); the hinge term
/// always measures the raw G(x).
GanGradients composite_objective_grad(const AdGanParams& gan, const Matrix& real_states,
                                      std::span<const AdversarialQuery> queries, double gain = 1.0);

struct GanOptimizerState {
  diff::AdamState generator;
  diff::AdamState discriminator;
};

struct GanUpdate {
  AdGanParams gan;
  GanOptimizerState state;
  GanTerms terms;
};

/// One simultaneous Adam step: the generator descends L_adv + alpha *
/// (-mean log D(x + G(x))) + beta * L_hinge (non-saturating form), the
/// discriminator ascends L_GAN. Throws NumericError if either network
/// becomes non-finite.
GanUpdate gan_update(const AdGanParams& gan, const GanOptimizerState& state, const Matrix& real_states,
                     std::span<const AdversarialQuery> queries, const diff::Adam& rule, double gain = 1.0);

}  // namespace admrl::attacks
