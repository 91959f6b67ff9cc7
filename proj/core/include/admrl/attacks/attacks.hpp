#pragma once

#include "admrl/common/random.hpp"
#include "admrl/diffcore/mlp.hpp"
#include "admrl/rollout/collect.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace admrl::attacks {

using diff::Matrix;
using diff::ParamVector;
using diff::Vector;

enum class AttackKind { Identity, RandomGaussian, Fgsm, AdGan };

std::string_view to_string(AttackKind kind);
AttackKind attack_from_string(std::string_view name);

/// Attack kind plus strength. For RandomGaussian `scale` multiplies the
/// N(mu, sigma^2) draw, for Fgsm it is epsilon, for AdGan it is the L-inf clip
/// on the generator output. The L-inf projection radius always equals scale.
struct AttackSpec {
  AttackKind kind = AttackKind::Identity;
  double scale = 0.0;
  double mu = 0.0;
  double sigma = 1.0;

  double budget() const noexcept { return scale; }
  bool is_identity() const noexcept { return kind == AttackKind::Identity || scale == 0.0; }
};

/// x + scale * dx with dx ~ N(mu, sigma^2) i.i.d. per coordinate (no projection).
Vector random_perturb(const Vector& x, double mu, double sigma, double scale, Rng& rng);

/// x + eps * sign(g), g = loss_grad_at_state(x). Rows may be independent
/// states. Throws NumericError on a non-finite gradient.
Matrix fgsm_perturb(const Matrix& x, double eps, const std::function<Matrix(const Matrix&)>& loss_grad_at_state);

/// Clips x_tilde - x coordinate-wise to [-budget, budget].
Matrix project_linf(const Matrix& x, const Matrix& x_tilde, double budget);

/// Generator (state -> perturbation, c * tanh output) and discriminator
/// (state -> logit) with the composite-objective weights.
struct AdGanParams {
  diff::Mlp generator_net;
  diff::Mlp discriminator_net;
  ParamVector generator;
  ParamVector discriminator;
  double c = 0.2;
  double gan_weight_alpha = 0.8;
  double hinge_weight_beta = 0.2;

  std::size_t state_dim() const { return generator_net.input_dim(); }
};

struct AdGanArch {
  std::vector<std::size_t> generator_hidden{64, 64};
  std::vector<std::size_t> discriminator_hidden{64, 64};
  double c = 0.2;
  double gan_weight_alpha = 0.8;
  double hinge_weight_beta = 0.2;
  /// Scale of the generator's last-layer init; small values start near x + 0.
  double generator_output_gain = 0.1;
};

AdGanParams make_adgan(std::size_t state_dim, const AdGanArch& arch, Rng& rng);

/// Tape-level generator output c * tanh(MLP(x)).
diff::Var generator_forward(const AdGanParams& gan, const diff::BoundParams& g, diff::Var x);
diff::Var discriminator_forward(const AdGanParams& gan, const diff::BoundParams& d, diff::Var x);

Matrix generator_output(const AdGanParams& gan, const Matrix& states);
Matrix discriminator_logits(const AdGanParams& gan, const Matrix& states);

/// x + clip_inf(gain * G(x), budget).
Matrix gan_perturb(const AdGanParams& gan, const Matrix& states, double budget, double gain = 1.0);

/// budget / c. G is bounded by c per coordinate, so an attack of strength
/// `budget` plays budget * tanh(MLP(x)); the hinge keeps acting on raw G.
double budget_gain(const AdGanParams& gan, double budget);

inline constexpr double kLogitClamp = 20.0;

/// mean log sigma(D(x)) + mean log(1 - sigma(D(x~))), logits clamped to +-20.
double gan_loss_from_logits(const Vector& real_logits, const Vector& fake_logits);
double gan_loss(const AdGanParams& gan, const Matrix& real_batch, const Matrix& fake_batch);

/// -L(query surrogate of the adapted policy).
inline double adv_loss(double query_surrogate_loss) { return -query_surrogate_loss; }

/// mean max(0, ||G(x)||_2 - c).
double hinge_loss_from_norms(const Vector& norms, double c);
double hinge_loss(const AdGanParams& gan, const Matrix& batch, double c);

/// adv + alpha * gan + beta * hinge.
inline double total_gan_objective(double adv, double gan, double hinge, double alpha, double beta) {
  return adv + alpha * gan + beta * hinge;
}

class RandomGaussianPerturber final : public rollout::StatePerturber {
 public:
  RandomGaussianPerturber(double mu, double sigma, double scale);
  Matrix perturb(const Matrix& states, const rollout::GaussianPolicy&, std::span<Rng* const> rngs) const override;
  bool is_identity() const override { return scale_ == 0.0; }
  std::string name() const override { return "random"; }

 private:
  double mu_, sigma_, scale_;
};

/// FGSM against the acting policy: for each state a reference action is drawn
/// from pi(. | x) and the observation moves along the sign of the gradient of
/// -log pi(a_ref | x) with respect to x.
class FgsmPerturber final : public rollout::StatePerturber {
 public:
  explicit FgsmPerturber(double eps);
  Matrix perturb(const Matrix& states, const rollout::GaussianPolicy& acting, std::span<Rng* const> rngs) const override;
  bool is_identity() const override { return eps_ == 0.0; }
  std::string name() const override { return "fgsm"; }

 private:
  double eps_;
};

/// Observes x + clip_inf(budget_gain * G(x), budget).
class AdGanPerturber final : public rollout::StatePerturber {
 public:
  AdGanPerturber(std::shared_ptr<const AdGanParams> gan, double budget);
  Matrix perturb(const Matrix& states, const rollout::GaussianPolicy&, std::span<Rng* const>) const override;
  bool is_identity() const override { return budget_ == 0.0; }
  std::string name() const override { return "adgan"; }

 private:
  std::shared_ptr<const AdGanParams> gan_;
  double budget_;
};

/// Builds the perturber for an attack. AdGan requires `gan`.
std::unique_ptr<rollout::StatePerturber> make_perturber(const AttackSpec& spec,
                                                        std::shared_ptr<const AdGanParams> gan = nullptr);

}  // namespace admrl::attacks
