#include "admrl/attacks/gan_training.hpp"
#include "admrl/common/error.hpp"
#include "admrl/diffcore/finite_diff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace admrl;
using namespace admrl::attacks;
using rollout::GaussianPolicy;
using rollout::PolicyArch;

namespace {

AdGanParams small_gan(std::uint64_t seed, std::size_t dim = 2) {
  AdGanArch arch;
  arch.generator_output_gain = 1.0;
  arch.generator_hidden = {6};
  arch.discriminator_hidden = {5};
  Rng rng(seed);
  return make_adgan(dim, arch, rng);
}

GaussianPolicy small_policy(std::uint64_t seed) {
  PolicyArch arch;
  arch.hidden = {5};
  arch.output_gain = 1.0;
  Rng rng(seed);
  return {arch, arch.initialize(rng)};
}

Matrix random_states(Eigen::Index n, Eigen::Index d, Rng& rng, double spread = 1.0) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = spread * standard_normal(rng);
  return m;
}

std::vector<Rng> row_rngs(Eigen::Index n, std::uint64_t seed) {
  std::vector<Rng> out;
  for (Eigen::Index i = 0; i < n; ++i) out.emplace_back(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
  return out;
}

std::vector<Rng*> pointers(std::vector<Rng>& rngs) {
  std::vector<Rng*> out;
  for (auto& r : rngs) out.push_back(&r);
  return out;
}

/// Two-step query batch from a toy rollout of `pol` on Nav2D.
AdversarialQuery toy_query(const GaussianPolicy& pol, std::uint64_t seed) {
  auto fam = envs::TaskFamily::defaults(envs::FamilyKind::Nav2D);
  envs::TaskSpec task;
  task.goal = {0.3, -0.2};
  auto trajs = rollout::collect_trajectories(pol, fam, task, 1, 2, rollout::IdentityPerturber{}, seed);
  rollout::process_batch(trajs, 0.99, 2);
  auto batch = rollout::flatten(trajs);
  batch.advantages << 1.3, -0.7;
  return {batch, pol};
}

}  // namespace

TEST(RandomPerturb, ScaleZeroIsIdentity) {
  Rng rng(1);
  const Vector x = Vector::LinSpaced(3, -1, 1);
  EXPECT_EQ(random_perturb(x, 0.0, 1.0, 0.0, rng), x);
}

TEST(RandomPerturb, DeterministicLimit) {
  Rng rng(1);
  EXPECT_EQ(random_perturb(Vector::Zero(2), 1.0, 0.0, 0.5, rng), Vector::Constant(2, 0.5));
}

TEST(RandomPerturb, EmpiricalMoments) {
  Rng rng(2024);
  const int n = 100000;
  const double mu = 0.3, sigma = 1.5;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sq = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Vector d = random_perturb(Vector::Zero(2), mu, sigma, 1.0, rng);
    sum += d;
    sq += d.cwiseProduct(d);
  }
  for (int j = 0; j < 2; ++j) {
    const double m = sum[j] / n;
    const double var = sq[j] / n - m * m;
    EXPECT_LE(std::abs(m - mu), 3 * std::pow(10.0, -2.5));
    EXPECT_LE(std::abs(var - sigma * sigma), 0.02 * sigma * sigma);
  }
}

TEST(Fgsm, SignDefinition) {
  Matrix g(1, 3);
  g << 2, -3, 0;
  const Matrix x = fgsm_perturb(Matrix::Zero(1, 3), 0.5, [&](const Matrix&) { return g; });
  Matrix expected(1, 3);
  expected << 0.5, -0.5, 0.0;
  EXPECT_EQ(x, expected);
}

TEST(Fgsm, EpsilonZeroIsIdentity) {
  const Matrix x = Matrix::Constant(2, 2, 0.7);
  EXPECT_EQ(fgsm_perturb(x, 0.0, [](const Matrix& s) { return Matrix(s); }), x);
}

TEST(Fgsm, QuadraticLossMovesAlongGradientSign) {
  Rng rng(3);
  const Matrix target = random_states(4, 3, rng);
  const Matrix x = random_states(4, 3, rng);
  const Matrix out = fgsm_perturb(x, 0.1, [&](const Matrix& s) { return Matrix(2.0 * (s - target)); });
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double away = x.data()[i] - target.data()[i];
    EXPECT_EQ(out.data()[i], x.data()[i] + (away > 0 ? 0.1 : -0.1));
  }
}

TEST(Fgsm, NonFiniteGradientIsNumericError) {
  EXPECT_THROW(fgsm_perturb(Matrix::Zero(1, 2), 0.1, [](const Matrix&) { return Matrix::Constant(1, 2, std::nan("")); }),
               NumericError);
}

TEST(GanPerturb, ZeroWeightGeneratorIsIdentity) {
  auto gan = small_gan(4);
  gan.generator.values().setZero();
  Rng rng(5);
  const Matrix x = random_states(10, 2, rng);
  EXPECT_EQ(gan_perturb(gan, x, 0.5), x);
  EXPECT_EQ(gan_perturb(gan, x, 0.5, budget_gain(gan, 0.5)), x);
}

TEST(GanPerturb, ClipsLargeOutput) {
  Rng rng(6);
  const Matrix x = random_states(1, 2, rng);
  Matrix g(1, 2);
  g << 10, 0;
  EXPECT_EQ(project_linf(x, x + g, 0.2), x + Matrix((Matrix(1, 2) << 0.2, 0.0).finished()));
  // gain large enough to saturate: output at the budget on every nonzero coordinate
  auto gan = small_gan(7);
  const Matrix out = gan_perturb(gan, x, 0.2, 1e6);
  for (Eigen::Index j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(out(0, j) - x(0, j)), 0.2, 1e-15);
}

TEST(GanPerturb, GainPlaysBudgetTimesTanh) {
  const auto gan = small_gan(8);
  Rng rng(9);
  const Matrix x = random_states(20, 2, rng);
  const Matrix raw = generator_output(gan, x);
  const Matrix played = gan_perturb(gan, x, 0.5, budget_gain(gan, 0.5)) - x;
  EXPECT_LE((played - raw * (0.5 / gan.c)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(raw.cwiseAbs().maxCoeff(), gan.c);
}

TEST(Budget, EveryPerturberRespectsLinfBudget) {
  Rng rng(10);
  const Matrix x = random_states(1000, 2, rng, 2.0);
  const auto pol = small_policy(11);
  auto gan = std::make_shared<const AdGanParams>(small_gan(12));
  for (double scale : {0.2, 0.5, 0.8}) {
    for (auto kind : {AttackKind::RandomGaussian, AttackKind::Fgsm, AttackKind::AdGan}) {
      auto rngs = row_rngs(x.rows(), 13);
      auto ptrs = pointers(rngs);
      const auto p = make_perturber({kind, scale}, gan);
      const Matrix d = p->perturb(x, pol, ptrs) - x;
      EXPECT_LE(d.cwiseAbs().maxCoeff(), scale * (1 + 1e-12)) << to_string(kind) << " " << scale;
      if (kind == AttackKind::Fgsm) {
        for (Eigen::Index i = 0; i < d.size(); ++i) {
          const double v = d.data()[i];
          EXPECT_TRUE(v == 0.0 || std::abs(std::abs(v) - scale) <= 1e-15 * (1 + std::abs(x.data()[i])));
        }
      }
    }
  }
}

TEST(Fgsm, OutputsExactlyInSignSet) {
  Rng rng(14);
  const Matrix x = random_states(1000, 2, rng);
  const double eps = 0.5;
  const Matrix out = fgsm_perturb(x, eps, [&](const Matrix& s) { return Matrix(s.array().sin()); });
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double expected = x.data()[i] + (std::sin(x.data()[i]) > 0 ? eps : std::sin(x.data()[i]) < 0 ? -eps : 0.0);
    EXPECT_EQ(out.data()[i], expected);
  }
}

TEST(Perturbers, ScaleZeroIsIdentityForEveryKind) {
  const auto pol = small_policy(15);
  auto gan = std::make_shared<const AdGanParams>(small_gan(16));
  for (auto kind : {AttackKind::Identity, AttackKind::RandomGaussian, AttackKind::Fgsm, AttackKind::AdGan}) {
    const AttackSpec spec{kind, 0.0};
    EXPECT_TRUE(spec.is_identity());
    EXPECT_TRUE(make_perturber(spec, gan)->is_identity());
  }
}

TEST(Perturbers, AdGanWithoutParamsIsContractError) {
  EXPECT_THROW(make_perturber({AttackKind::AdGan, 0.5}, nullptr), ContractError);
}

TEST(Perturbers, NamesRoundTrip) {
  for (auto kind : {AttackKind::Identity, AttackKind::RandomGaussian, AttackKind::Fgsm, AttackKind::AdGan})
    EXPECT_EQ(attack_from_string(to_string(kind)), kind);
  EXPECT_THROW(attack_from_string("pgd"), ContractError);
}

TEST(GanLoss, IndifferentDiscriminator) {
  EXPECT_NEAR(gan_loss_from_logits(Vector::Zero(4), Vector::Zero(3)), 2 * std::log(0.5), 1e-12);
  EXPECT_NEAR(gan_loss_from_logits(Vector::Zero(4), Vector::Zero(3)), -1.3863, 5e-5);
}

TEST(GanLoss, PerfectDiscriminatorNearZero) {
  const double v = gan_loss_from_logits(Vector::Constant(3, 20.0), Vector::Constant(3, -20.0));
  EXPECT_LE(v, 0.0);
  EXPECT_GT(v, -1e-8);
  EXPECT_EQ(gan_loss_from_logits(Vector::Constant(1, 500.0), Vector::Constant(1, -500.0)), v);
}

TEST(GanLoss, HandLogits) {
  const double v = gan_loss_from_logits(Vector::Constant(1, 1.0), Vector::Constant(1, -1.0));
  EXPECT_NEAR(v, 2.0 * -std::log1p(std::exp(-1.0)), 1e-14);
  EXPECT_NEAR(v, -0.6266, 1e-4);
}

TEST(GanLoss, SaturatedLogitsBeatRandomAssignments) {
  Rng rng(17);
  const double best = gan_loss_from_logits(Vector::Constant(4, 20.0), Vector::Constant(4, -20.0));
  for (int c = 0; c < 20; ++c) {
    Vector r(4), f(4);
    for (int i = 0; i < 4; ++i) r[i] = uniform(rng, -20, 20), f[i] = uniform(rng, -20, 20);
    EXPECT_GE(best, gan_loss_from_logits(r, f));
  }
}

TEST(GanLoss, EmptyBatchIsContractError) {
  EXPECT_THROW(gan_loss_from_logits(Vector(0), Vector::Zero(1)), ContractError);
}

TEST(GanLoss, NetworkVersionMatchesLogits) {
  const auto gan = small_gan(18);
  Rng rng(19);
  const Matrix real = random_states(5, 2, rng), fake = random_states(6, 2, rng);
  EXPECT_NEAR(gan_loss(gan, real, fake),
              gan_loss_from_logits(discriminator_logits(gan, real).col(0), discriminator_logits(gan, fake).col(0)), 1e-14);
}

TEST(AdvLoss, Negation) {
  EXPECT_EQ(adv_loss(0.0), 0.0);
  EXPECT_EQ(adv_loss(3.5), -3.5);
}

TEST(Hinge, Examples) {
  EXPECT_EQ(hinge_loss_from_norms(Vector::Constant(1, 0.2), 0.2), 0.0);
  EXPECT_EQ(hinge_loss_from_norms(Vector::Zero(3), 0.2), 0.0);
  EXPECT_NEAR(hinge_loss_from_norms(Vector::Constant(1, 0.5), 0.2), 0.3, 1e-15);
  auto gan = small_gan(20);
  gan.generator.values().setZero();
  Rng rng(21);
  EXPECT_EQ(hinge_loss(gan, random_states(4, 2, rng), 0.2), 0.0);
}

TEST(Hinge, ZeroIffInsideBallAndPiecewiseLinear) {
  Rng rng(22);
  for (int c = 0; c < 200; ++c) {
    Vector n(3);
    for (int i = 0; i < 3; ++i) n[i] = uniform(rng, 0.0, 0.4);
    EXPECT_EQ(hinge_loss_from_norms(n, 0.2) == 0.0, n.maxCoeff() <= 0.2);
  }
  // three collinear norms on either side of the kink: linear beyond c, flat inside
  auto h = [](double v) { return hinge_loss_from_norms(Vector::Constant(1, v), 0.2); };
  EXPECT_NEAR(h(0.5) - h(0.4), h(0.4) - h(0.3), 1e-15);
  EXPECT_EQ(h(0.05), h(0.1));
  EXPECT_LE(h(0.3), 0.5 * (h(0.1) + h(0.5)) + 1e-15);
}

TEST(TotalObjective, Examples) {
  EXPECT_EQ(total_gan_objective(0, 0, 0, 0.8, 0.2), 0.0);
  EXPECT_NEAR(total_gan_objective(-3.5, -1.3863, 0.3, 0.8, 0.2), -4.5490, 5e-5);
  EXPECT_EQ(total_gan_objective(-3.5, -1.3863, 0.3, 0.0, 0.0), -3.5);
}

TEST(CompositeObjective, GradientMatchesFiniteDifferencesThroughToyRollout) {
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    auto gan = small_gan(seed);
    gan.generator.values() *= 3.0;  // push some outputs past the hinge ball
    const auto pol = small_policy(seed + 50);
    std::vector<AdversarialQuery> queries{toy_query(pol, seed), toy_query(small_policy(seed + 60), seed + 1)};
    Rng rng(seed + 70);
    const Matrix real = random_states(6, 2, rng, 0.3);
    for (double gain : {1.0, 2.5}) {
      const auto grads = composite_objective_grad(gan, real, queries, gain);
      auto total_at_g = [&](const Vector& v) {
        auto g2 = gan;
        g2.generator.values() = v;
        return composite_objective_grad(g2, real, queries, gain).terms.total;
      };
      auto total_at_d = [&](const Vector& v) {
        auto g2 = gan;
        g2.discriminator.values() = v;
        return composite_objective_grad(g2, real, queries, gain).terms.total;
      };
      const Vector fd_g = diff::finite_diff_oracle(total_at_g, gan.generator.values(), 1e-6);
      const Vector fd_d = diff::finite_diff_oracle(total_at_d, gan.discriminator.values(), 1e-6);
      EXPECT_LE(diff::max_relative_error(grads.generator.values(), fd_g, 1e-4), 1e-3) << seed << " gain " << gain;
      EXPECT_LE(diff::max_relative_error(grads.discriminator.values(), fd_d, 1e-4), 1e-3) << seed << " gain " << gain;
    }
  }
}

TEST(CompositeObjective, TermsMatchStandaloneFunctions) {
  const auto gan = small_gan(40);
  const auto pol = small_policy(41);
  std::vector<AdversarialQuery> queries{toy_query(pol, 42)};
  Rng rng(43);
  const Matrix real = random_states(5, 2, rng, 0.3);
  const auto t = composite_objective_grad(gan, real, queries).terms;
  EXPECT_NEAR(t.gan, gan_loss(gan, real, gan_perturb(gan, real, 1e9)), 1e-12);
  EXPECT_NEAR(t.hinge, hinge_loss(gan, real, gan.c), 1e-12);
  EXPECT_NEAR(t.total, total_gan_objective(t.adv, t.gan, t.hinge, gan.gan_weight_alpha, gan.hinge_weight_beta), 1e-12);
  EXPECT_NEAR(t.mean_perturbation_norm, generator_output(gan, real).rowwise().norm().mean(), 1e-12);
}

TEST(CompositeObjective, ZeroGeneratorAdvTermIsNegatedQuerySurrogate) {
  auto gan = small_gan(44);
  gan.generator.values().setZero();
  const auto pol = small_policy(45);
  const auto q = toy_query(pol, 46);
  std::vector<AdversarialQuery> queries{q};
  Rng rng(47);
  const auto t = composite_objective_grad(gan, random_states(3, 2, rng), queries).terms;
  diff::Tape tape;
  diff::BoundParams b(tape, pol.params);
  auto nodes = rollout::policy_forward(pol.arch, b, tape.leaf(q.batch.true_states));
  const Matrix rows = rollout::log_prob_rows(nodes, q.batch.actions).value();
  const double surrogate = -(rows.col(0).array() * q.batch.advantages.array()).mean();
  EXPECT_NEAR(t.adv, adv_loss(surrogate), 1e-12);
}

TEST(GanUpdate, GeneratorMovesOppositeTheGradient) {
  auto gan = small_gan(50);
  gan.gan_weight_alpha = 0.0;
  gan.hinge_weight_beta = 0.0;
  const auto pol = small_policy(51);
  std::vector<AdversarialQuery> queries{toy_query(pol, 52)};
  Rng rng(53);
  const Matrix real = random_states(4, 2, rng, 0.3);
  const auto grads = composite_objective_grad(gan, real, queries);
  diff::Adam rule;
  rule.lr = 1e-4;
  const auto upd = gan_update(gan, {}, real, queries, rule);
  const Vector step = upd.gan.generator.values() - gan.generator.values();
  for (Eigen::Index i = 0; i < step.size(); ++i) {
    const double g = grads.generator.values()[i];
    if (std::abs(g) > 1e-6) EXPECT_LT(step[i] * g, 0.0) << i;
  }
  EXPECT_LT(composite_objective_grad(upd.gan, real, queries).terms.total, grads.terms.total);
  EXPECT_EQ(upd.state.generator.step, 1);
}

TEST(GanUpdate, DiscriminatorAscendsGanLoss) {
  const auto gan = small_gan(54);
  const auto pol = small_policy(55);
  std::vector<AdversarialQuery> queries{toy_query(pol, 56)};
  Rng rng(57);
  const Matrix real = random_states(8, 2, rng, 0.3);
  const auto before = composite_objective_grad(gan, real, queries).terms.gan;
  auto moved = gan;
  diff::Adam rule;
  rule.lr = 1e-4;
  moved.discriminator = gan_update(gan, {}, real, queries, rule).gan.discriminator;
  EXPECT_GT(composite_objective_grad(moved, real, queries).terms.gan, before);
}

TEST(GanUpdate, EmptyInputsAreContractErrors) {
  const auto gan = small_gan(58);
  std::vector<AdversarialQuery> none;
  EXPECT_THROW(composite_objective_grad(gan, Matrix::Zero(2, 2), none), ContractError);
  std::vector<AdversarialQuery> queries{toy_query(small_policy(59), 60)};
  EXPECT_THROW(composite_objective_grad(gan, Matrix(0, 2), queries), ContractError);
}

TEST(MakeAdgan, DimensionsAndInitInsideBall) {
  const auto gan = small_gan(61, 4);
  EXPECT_EQ(gan.state_dim(), 4u);
  EXPECT_EQ(gan.generator_net.output_dim(), 4u);
  EXPECT_EQ(gan.discriminator_net.output_dim(), 1u);
  Rng rng(62);
  EXPECT_LE(generator_output(gan, random_states(50, 4, rng)).cwiseAbs().maxCoeff(), gan.c);
  AdGanArch bad;
  bad.c = 0.0;
  EXPECT_THROW(make_adgan(2, bad, rng), ContractError);
}
