#include "admrl/attacks/attacks.hpp"

#include "admrl/common/error.hpp"

#include <algorithm>
#include <cmath>

namespace admrl::attacks {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Identity: return "identity";
    case AttackKind::RandomGaussian: return "random";
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::AdGan: return "adgan";
  }
  return "?";
}

AttackKind attack_from_string(std::string_view name) {
  if (name == "identity" || name == "clean" || name == "none") return AttackKind::Identity;
  if (name == "random") return AttackKind::RandomGaussian;
  if (name == "fgsm") return AttackKind::Fgsm;
  if (name == "adgan" || name == "gan") return AttackKind::AdGan;
  throw ContractError("unknown attack kind '" + std::string(name) + "'");
}

Vector random_perturb(const Vector& x, double mu, double sigma, double scale, Rng& rng) {
  if (!(sigma >= 0.0)) throw ContractError("random_perturb: sigma must be >= 0");
  Vector out = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] += scale * (mu + sigma * standard_normal(rng));
  return out;
}

Matrix fgsm_perturb(const Matrix& x, double eps, const std::function<Matrix(const Matrix&)>& loss_grad_at_state) {
  if (!(eps >= 0.0)) throw ContractError("fgsm_perturb: epsilon must be >= 0");
  if (eps == 0.0) return x;
  const Matrix g = loss_grad_at_state(x);
  if (g.rows() != x.rows() || g.cols() != x.cols()) throw ShapeError("fgsm_perturb: gradient shape differs from state");
  if (!g.allFinite()) throw NumericError("fgsm_perturb: non-finite state gradient");
  return x + eps * g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Matrix project_linf(const Matrix& x, const Matrix& x_tilde, double budget) {
  return x + (x_tilde - x).cwiseMax(-budget).cwiseMin(budget);
}

AdGanParams make_adgan(std::size_t state_dim, const AdGanArch& arch, Rng& rng) {
  if (!(arch.c > 0.0)) throw ContractError("adgan: hinge bound c must be > 0");
  AdGanParams gan;
  std::vector<std::size_t> gs{state_dim};
  gs.insert(gs.end(), arch.generator_hidden.begin(), arch.generator_hidden.end());
  gs.push_back(state_dim);
  std::vector<std::size_t> ds{state_dim};
  ds.insert(ds.end(), arch.discriminator_hidden.begin(), arch.discriminator_hidden.end());
  ds.push_back(1);
  gan.generator_net = diff::Mlp{std::move(gs), "gen.", diff::Activation::Tanh};
  gan.discriminator_net = diff::Mlp{std::move(ds), "disc.", diff::Activation::Identity};
  gan.generator = ParamVector(gan.generator_net.layout());
  gan.discriminator = ParamVector(gan.discriminator_net.layout());
  gan.generator_net.initialize(gan.generator, rng, arch.generator_output_gain);
  gan.discriminator_net.initialize(gan.discriminator, rng);
  gan.c = arch.c;
  gan.gan_weight_alpha = arch.gan_weight_alpha;
  gan.hinge_weight_beta = arch.hinge_weight_beta;
  return gan;
}

diff::Var generator_forward(const AdGanParams& gan, const diff::BoundParams& g, diff::Var x) {
  return x.tape->scale(gan.generator_net.forward(g, x), gan.c);
}

diff::Var discriminator_forward(const AdGanParams& gan, const diff::BoundParams& d, diff::Var x) {
  return gan.discriminator_net.forward(d, x);
}

Matrix generator_output(const AdGanParams& gan, const Matrix& states) {
  if (static_cast<std::size_t>(states.cols()) != gan.state_dim()) throw ShapeError("generator: state width mismatch");
  diff::Tape tape;
  diff::BoundParams g(tape, gan.generator);
  return generator_forward(gan, g, tape.leaf(states)).value();
}

Matrix discriminator_logits(const AdGanParams& gan, const Matrix& states) {
  if (static_cast<std::size_t>(states.cols()) != gan.state_dim()) throw ShapeError("discriminator: state width mismatch");
  diff::Tape tape;
  diff::BoundParams d(tape, gan.discriminator);
  return discriminator_forward(gan, d, tape.leaf(states)).value();
}

Matrix gan_perturb(const AdGanParams& gan, const Matrix& states, double budget, double gain) {
  const Matrix delta = gain * generator_output(gan, states);
  return states + delta.cwiseMax(-budget).cwiseMin(budget);
}

double budget_gain(const AdGanParams& gan, double budget) { return budget / gan.c; }

namespace {

double log_sigmoid(double z) {
  z = std::clamp(z, -kLogitClamp, kLogitClamp);
  return -std::log1p(std::exp(-z));
}

}  // namespace

double gan_loss_from_logits(const Vector& real_logits, const Vector& fake_logits) {
  if (real_logits.size() == 0 || fake_logits.size() == 0) throw ContractError("gan_loss: empty batch");
  double real = 0.0;
  for (double z : real_logits) real += log_sigmoid(z);
  double fake = 0.0;
  for (double z : fake_logits) fake += log_sigmoid(-z);  // log(1 - sigma(z)) = log sigma(-z)
  return real / static_cast<double>(real_logits.size()) + fake / static_cast<double>(fake_logits.size());
}

double gan_loss(const AdGanParams& gan, const Matrix& real_batch, const Matrix& fake_batch) {
  if (real_batch.rows() == 0 || fake_batch.rows() == 0) throw ContractError("gan_loss: empty batch");
  return gan_loss_from_logits(discriminator_logits(gan, real_batch).col(0), discriminator_logits(gan, fake_batch).col(0));
}

double hinge_loss_from_norms(const Vector& norms, double c) {
  if (!(c > 0.0)) throw ContractError("hinge_loss: c must be > 0");
  if (norms.size() == 0) return 0.0;
  return (norms.array() - c).max(0.0).mean();
}

double hinge_loss(const AdGanParams& gan, const Matrix& batch, double c) {
  return hinge_loss_from_norms(generator_output(gan, batch).rowwise().norm(), c);
}

RandomGaussianPerturber::RandomGaussianPerturber(double mu, double sigma, double scale)
    : mu_(mu), sigma_(sigma), scale_(scale) {
  if (!(sigma >= 0.0)) throw ContractError("random attack: sigma must be >= 0");
  if (!(scale >= 0.0)) throw ContractError("random attack: scale must be >= 0");
}

Matrix RandomGaussianPerturber::perturb(const Matrix& states, const rollout::GaussianPolicy&,
                                        std::span<Rng* const> rngs) const {
  if (scale_ == 0.0) return states;
  if (rngs.size() != static_cast<std::size_t>(states.rows())) throw ShapeError("random attack: one rng per row");
  Matrix out(states.rows(), states.cols());
  for (Eigen::Index i = 0; i < states.rows(); ++i)
    out.row(i) = random_perturb(states.row(i).transpose(), mu_, sigma_, scale_, *rngs[static_cast<std::size_t>(i)]).transpose();
  return project_linf(states, out, scale_);
}

FgsmPerturber::FgsmPerturber(double eps) : eps_(eps) {
  if (!(eps >= 0.0)) throw ContractError("fgsm attack: epsilon must be >= 0");
}

Matrix FgsmPerturber::perturb(const Matrix& states, const rollout::GaussianPolicy& acting,
                              std::span<Rng* const> rngs) const {
  if (eps_ == 0.0) return states;
  if (rngs.size() != static_cast<std::size_t>(states.rows())) throw ShapeError("fgsm attack: one rng per row");
  const auto dist = rollout::action_distribution(acting, states);
  Matrix reference = dist.mean;
  for (Eigen::Index i = 0; i < reference.rows(); ++i)
    for (Eigen::Index j = 0; j < reference.cols(); ++j)
      reference(i, j) += dist.std[j] * standard_normal(*rngs[static_cast<std::size_t>(i)]);

  auto grad = [&](const Matrix& x) -> Matrix {
    diff::Tape tape;
    diff::BoundParams bound(tape, acting.params);
    diff::Var in = tape.leaf(x);
    auto nodes = rollout::policy_forward(acting.arch, bound, in);
    diff::Var loss = tape.scale(tape.sum(rollout::log_prob_rows(nodes, reference)), -1.0);
    tape.backward(loss);
    const Matrix& g = tape.grad(in);
    return g.size() == 0 ? Matrix::Zero(x.rows(), x.cols()) : g;
  };
  return project_linf(states, fgsm_perturb(states, eps_, grad), eps_);
}

AdGanPerturber::AdGanPerturber(std::shared_ptr<const AdGanParams> gan, double budget)
    : gan_(std::move(gan)), budget_(budget) {
  if (!gan_) throw ContractError("adgan attack: generator parameters are required");
  if (!(budget >= 0.0)) throw ContractError("adgan attack: budget must be >= 0");
}

Matrix AdGanPerturber::perturb(const Matrix& states, const rollout::GaussianPolicy&, std::span<Rng* const>) const {
  if (budget_ == 0.0) return states;
  return gan_perturb(*gan_, states, budget_, budget_gain(*gan_, budget_));
}

std::unique_ptr<rollout::StatePerturber> make_perturber(const AttackSpec& spec, std::shared_ptr<const AdGanParams> gan) {
  if (spec.is_identity()) return std::make_unique<rollout::IdentityPerturber>();
  switch (spec.kind) {
    case AttackKind::Identity: return std::make_unique<rollout::IdentityPerturber>();
    case AttackKind::RandomGaussian: return std::make_unique<RandomGaussianPerturber>(spec.mu, spec.sigma, spec.scale);
    case AttackKind::Fgsm: return std::make_unique<FgsmPerturber>(spec.scale);
    case AttackKind::AdGan: return std::make_unique<AdGanPerturber>(std::move(gan), spec.scale);
  }
  throw ContractError("unhandled attack kind");
}

}  // namespace admrl::attacks
