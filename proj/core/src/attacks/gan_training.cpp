#include "admrl/attacks/gan_training.hpp"

#include "admrl/common/error.hpp"

namespace admrl::attacks {

namespace {

using diff::Tape;
using diff::Var;

/// log sigma(z) with z clamped to +-kLogitClamp.
Var log_sigmoid(Tape& tape, Var z) { return tape.log(tape.sigmoid(tape.clamp(z, -kLogitClamp, kLogitClamp))); }

struct Built {
  Var adv;
  Var gan;          // symmetric L_GAN
  Var gen_gan;      // non-saturating generator term -mean log D(x~)
  Var hinge;
  double mean_norm = 0.0;
};

Built build(Tape& tape, const AdGanParams& gan, const diff::BoundParams& g, const diff::BoundParams& d,
            const Matrix& real_states, std::span<const AdversarialQuery> queries, double gain) {
  if (real_states.rows() == 0) throw ContractError("gan objective: empty state batch");
  if (queries.empty()) throw ContractError("gan objective: no query batches");
  Built b;

  // Adversarial term: -(mean over tasks of the query surrogate) under x + gain G(x).
  Var adv_sum = tape.leaf(Matrix::Zero(1, 1));
  for (const auto& q : queries) {
    if (q.batch.advantages.size() != q.batch.log_probs.size()) throw ContractError("gan objective: query without advantages");
    diff::BoundParams theta(tape, q.adapted.params);
    Var x = tape.leaf(q.batch.true_states);
    Var obs = tape.add(x, tape.scale(generator_forward(gan, g, x), gain));
    auto nodes = rollout::policy_forward(q.adapted.arch, theta, obs);
    Var lp = rollout::log_prob_rows(nodes, q.batch.actions);
    Var surrogate = tape.scale(tape.mean(tape.mul(lp, tape.leaf(q.batch.advantages))), -1.0);
    adv_sum = tape.add(adv_sum, surrogate);
  }
  b.adv = tape.scale(adv_sum, -1.0 / static_cast<double>(queries.size()));

  Var real = tape.leaf(real_states);
  Var delta = generator_forward(gan, g, real);
  Var fake = tape.add(real, tape.scale(delta, gain));
  Var real_logits = discriminator_forward(gan, d, real);
  Var fake_logits = discriminator_forward(gan, d, fake);
  Var log_d_real = log_sigmoid(tape, real_logits);
  Var log_one_minus_d_fake = log_sigmoid(tape, tape.scale(fake_logits, -1.0));
  b.gan = tape.add(tape.mean(log_d_real), tape.mean(log_one_minus_d_fake));
  b.gen_gan = tape.scale(tape.mean(log_sigmoid(tape, fake_logits)), -1.0);

  Var norms = tape.row_norm(delta);
  b.hinge = tape.mean(tape.max_const(tape.add_scalar(norms, -gan.c), 0.0));
  b.mean_norm = norms.value().mean();
  return b;
}

}  // namespace

GanGradients composite_objective_grad(const AdGanParams& gan, const Matrix& real_states,
                                      std::span<const AdversarialQuery> queries, double gain) {
  Tape tape;
  diff::BoundParams g(tape, gan.generator);
  diff::BoundParams d(tape, gan.discriminator);
  Built b = build(tape, gan, g, d, real_states, queries, gain);
  Var total = tape.add(b.adv, tape.add(tape.scale(b.gan, gan.gan_weight_alpha), tape.scale(b.hinge, gan.hinge_weight_beta)));
  tape.check_finite();
  tape.backward(total);

  GanGradients out;
  out.terms = {b.adv.scalar(), b.gan.scalar(), b.hinge.scalar(), total.scalar(), b.mean_norm};
  out.generator = g.gradient();
  out.discriminator = d.gradient();
  return out;
}

GanUpdate gan_update(const AdGanParams& gan, const GanOptimizerState& state, const Matrix& real_states,
                     std::span<const AdversarialQuery> queries, const diff::Adam& rule, double gain) {
  Tape tape;
  diff::BoundParams g(tape, gan.generator);
  diff::BoundParams d(tape, gan.discriminator);
  Built b = build(tape, gan, g, d, real_states, queries, gain);
  tape.check_finite();

  Var gen_loss = tape.add(b.adv, tape.add(tape.scale(b.gen_gan, gan.gan_weight_alpha), tape.scale(b.hinge, gan.hinge_weight_beta)));
  tape.backward(gen_loss);
  const ParamVector gen_grad = g.gradient();

  Var disc_loss = tape.scale(b.gan, -1.0);
  tape.backward(disc_loss);
  const ParamVector disc_grad = d.gradient();

  GanUpdate out{gan, state, {}};
  const double total = b.adv.scalar() + gan.gan_weight_alpha * b.gan.scalar() + gan.hinge_weight_beta * b.hinge.scalar();
  out.terms = {b.adv.scalar(), b.gan.scalar(), b.hinge.scalar(), total, b.mean_norm};

  auto gen_step = diff::apply_update(gan.generator, gen_grad, rule, state.generator);
  auto disc_step = diff::apply_update(gan.discriminator, disc_grad, rule, state.discriminator);
  if (!gen_step.params.all_finite() || !disc_step.params.all_finite())
    throw NumericError("adgan diverged: non-finite generator or discriminator parameters");
  out.gan.generator = std::move(gen_step.params);
  out.gan.discriminator = std::move(disc_step.params);
  out.state.generator = std::move(gen_step.state);
  out.state.discriminator = std::move(disc_step.state);
  return out;
}

}  // namespace admrl::attacks
