// Acceptance driver: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "admrl/attacks/gan_training.hpp"
#include "admrl/diffcore/finite_diff.hpp"
#include "admrl/diffcore/gradcheck.hpp"
#include "admrl/harness/experiment.hpp"
#include "admrl/metapg/maml.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#ifndef ADMRL_SOURCE_DIR
#define ADMRL_SOURCE_DIR "."
#endif

using namespace admrl;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using diff::Matrix;
using diff::Vector;

namespace {

// Tolerances.
constexpr double kGradRel = 1e-4;
constexpr double kGradSeconds = 10.0;
constexpr double kQuadrature = 1e-4;
constexpr double kKlSlack = 1e-6;
constexpr double kCompositeRel = 1e-3;
constexpr double kAdaptGain = 0.25;
constexpr double kSeedSeconds = 15 * 60.0;
constexpr double kRetention = 0.15;
constexpr double kHingeFactor = 1.25;
constexpr double kEvalScale = 0.5;
constexpr int kMinEvalTasks = 40;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;
std::set<int> only;

bool want(int id) { return only.empty() || only.count(id) > 0; }

void report(int id, const Outcome& o) {
  if (!want(id)) return;
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix random_matrix(Eigen::Index n, Eigen::Index d, Rng& rng, double spread = 1.0) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = spread * standard_normal(rng);
  return m;
}

rollout::GaussianPolicy small_policy(std::uint64_t seed, std::vector<std::size_t> hidden = {6, 5}) {
  rollout::PolicyArch arch;
  arch.hidden = std::move(hidden);
  arch.output_gain = 1.0;
  Rng rng(seed);
  auto p = arch.initialize(rng);
  p.block("log_std").setConstant(-0.3);
  return {arch, p};
}

attacks::AdGanParams small_gan(std::uint64_t seed) {
  attacks::AdGanArch arch;
  arch.generator_output_gain = 1.0;
  arch.generator_hidden = {6};
  arch.discriminator_hidden = {5};
  Rng rng(seed);
  return attacks::make_adgan(2, arch, rng);
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  diff::GradcheckConfig cfg;
  cfg.cases = 100;
  cfg.tolerance = kGradRel;
  const auto r = diff::run_gradcheck(cfg);
  const double secs = seconds_since(t0);
  return {r.passed() && r.cases == 100 && secs < kGradSeconds,
          fmt("cases=%zu worst_params=%.2e worst_inputs=%.2e (<= %.0e) time=%.2fs (< %.0fs)", r.cases, r.worst_params,
              r.worst_inputs, kGradRel, secs, kGradSeconds)};
}

Outcome criterion2() {
  Rng rng(17);
  int recursion_bad = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto n = 1 + static_cast<Eigen::Index>(uniform01(rng) * 60);
    rollout::Trajectory t;
    t.rewards.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) t.rewards[i] = standard_normal(rng);
    const double g = uniform01(rng);
    const Vector q = rollout::discounted_returns(t, g);
    bool ok = q[n - 1] == t.rewards[n - 1];
    for (Eigen::Index i = 0; i + 1 < n; ++i) ok = ok && q[i] == t.rewards[i] + g * q[i + 1];
    if (!ok) ++recursion_bad;
  }

  double worst_quad = 0.0;
  for (int c = 0; c < 20; ++c) {
    Vector mu(1), sd(1), a(1);
    mu << uniform(rng, -2, 2);
    sd << std::exp(uniform(rng, -1.5, 1.0));
    const double lo = mu[0] - 12 * sd[0], hi = mu[0] + 12 * sd[0];
    const int n = 20000;
    const double h = (hi - lo) / n;
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
      a << lo + h * i;
      total += ((i == 0 || i == n) ? 0.5 : 1.0) * std::exp(rollout::log_prob(mu, sd, a));
    }
    worst_quad = std::max(worst_quad, std::abs(total * h - 1.0));
  }

  int accepted = 0, kl_bad = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 0; accepted < 50 && seed < 1000; ++seed) {
    const auto pol = small_policy(1000 + seed);
    Rng brng(2000 + seed);
    std::vector<rollout::Trajectory> batch;
    for (int k = 0; k < 4; ++k) {
      rollout::Trajectory t;
      t.observed_states = random_matrix(6, 2, brng);
      t.true_states = t.observed_states;
      t.actions = random_matrix(6, 2, brng);
      t.rewards = random_matrix(6, 1, brng).col(0);
      t.returns = t.rewards;
      t.advantages = random_matrix(6, 1, brng).col(0);
      t.log_probs = Vector::Zero(6);
      batch.push_back(t);
    }
    const auto flat = rollout::flatten(batch);
    const Vector old_lp = metapg::batch_log_probs(flat, pol);
    auto ascent = metapg::reinforce_surrogate_grad(flat, pol).grad;
    ascent.values() *= -1.0;
    const metapg::FisherOperator fisher(pol, flat.observed);
    metapg::TrpoConfig cfg;
    cfg.max_kl = 0.01 * static_cast<double>(1 + seed % 5);
    const auto r = metapg::trpo_step(
        pol.params, ascent, [&](const Vector& v) { return fisher.apply(v); },
        [&](const diff::ParamVector& p) { return metapg::importance_objective(flat, old_lp, pol.with_params(p)); },
        [&](const diff::ParamVector& p) { return metapg::mean_kl(pol, pol.with_params(p), flat.observed); }, cfg);
    if (!r.accepted) continue;
    ++accepted;
    const double kl = metapg::mean_kl(pol, pol.with_params(r.params), flat.observed);
    worst_ratio = std::max(worst_ratio, kl / cfg.max_kl);
    if (kl > cfg.max_kl * (1 + kKlSlack)) ++kl_bad;
  }
  return {recursion_bad == 0 && worst_quad <= kQuadrature && accepted == 50 && kl_bad == 0,
          fmt("returns recursion violations=%d/1000; quadrature worst |I-1|=%.2e (<= %.0e); trpo accepted=%d/50 "
              "kl violations=%d max KL/delta=%.6f",
              recursion_bad, worst_quad, kQuadrature, accepted, kl_bad, worst_ratio)};
}

Outcome criterion3() {
  using attacks::AttackKind;
  Rng rng(14);
  // FGSM sign set on an arbitrary gradient field.
  const Matrix x = random_matrix(1000, 2, rng);
  const double eps = 0.5;
  const Matrix out = attacks::fgsm_perturb(x, eps, [](const Matrix& s) { return Matrix(s.array().sin()); });
  int sign_bad = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double g = std::sin(x.data()[i]);
    const double expected = x.data()[i] + (g > 0 ? eps : g < 0 ? -eps : 0.0);
    if (out.data()[i] != expected) ++sign_bad;
  }

  // Budget after projection, every kind and scale, through the policy-driven perturbers.
  const Matrix states = random_matrix(1000, 2, rng, 2.0);
  const auto pol = small_policy(11);
  auto gan = std::make_shared<const attacks::AdGanParams>(small_gan(12));
  double worst_excess = 0.0;
  for (double scale : {0.2, 0.5, 0.8}) {
    for (auto kind : {AttackKind::RandomGaussian, AttackKind::Fgsm, AttackKind::AdGan}) {
      std::vector<Rng> rngs;
      for (Eigen::Index i = 0; i < states.rows(); ++i) rngs.emplace_back(derive_seed(13, {static_cast<std::uint64_t>(i)}));
      std::vector<Rng*> ptrs;
      for (auto& r : rngs) ptrs.push_back(&r);
      const Matrix d = attacks::make_perturber({kind, scale}, gan)->perturb(states, pol, ptrs) - states;
      worst_excess = std::max(worst_excess, d.cwiseAbs().maxCoeff() / scale - 1.0);
    }
  }

  // Scale 0 trajectories are bit-identical to unperturbed ones.
  const auto fam = envs::TaskFamily::defaults(envs::FamilyKind::Nav2D);
  envs::TaskSpec task;
  task.goal = {0.3, -0.2};
  const auto policy = small_policy(21, {16, 16});
  const auto ref = rollout::collect_trajectories(policy, fam, task, 4, fam.horizon, rollout::IdentityPerturber{}, 99);
  auto same = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
  };
  int identity_bad = 0;
  for (auto kind : {AttackKind::RandomGaussian, AttackKind::Fgsm, AttackKind::AdGan}) {
    const auto p = attacks::make_perturber({kind, 0.0}, gan);
    const auto got = rollout::collect_trajectories(policy, fam, task, 4, fam.horizon, *p, 99);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      if (!same(got[k].observed_states, ref[k].observed_states) || !same(got[k].true_states, ref[k].true_states) ||
          !same(got[k].actions, ref[k].actions) || !same(got[k].rewards, ref[k].rewards))
        ++identity_bad;
    }
  }
  return {sign_bad == 0 && worst_excess <= 1e-12 && identity_bad == 0,
          fmt("fgsm off-sign-set coords=%d/2000; worst budget excess=%.1e; scale-0 trajectory mismatches=%d", sign_bad,
              worst_excess, identity_bad)};
}

Outcome criterion4() {
  double worst = 0.0;
  const auto fam = envs::TaskFamily::defaults(envs::FamilyKind::Nav2D);
  envs::TaskSpec task;
  task.goal = {0.3, -0.2};
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    auto gan = small_gan(seed);
    gan.generator.values() *= 3.0;
    std::vector<attacks::AdversarialQuery> queries;
    for (std::uint64_t j = 0; j < 2; ++j) {
      const auto pol = small_policy(seed + 50 + 10 * j, {5});
      auto trajs = rollout::collect_trajectories(pol, fam, task, 1, 2, rollout::IdentityPerturber{}, seed + j);
      rollout::process_batch(trajs, 0.99, 2);
      auto batch = rollout::flatten(trajs);
      batch.advantages << 1.3, -0.7;
      queries.push_back({batch, pol});
    }
    Rng rng(seed + 70);
    const Matrix real = random_matrix(6, 2, rng, 0.3);
    for (double gain : {1.0, 2.5}) {
      const auto grads = attacks::composite_objective_grad(gan, real, queries, gain);
      auto total_at = [&](diff::ParamVector attacks::AdGanParams::*member) {
        return [&, member](const Vector& v) {
          auto g2 = gan;
          (g2.*member).values() = v;
          return attacks::composite_objective_grad(g2, real, queries, gain).terms.total;
        };
      };
      const Vector fd_g = diff::finite_diff_oracle(total_at(&attacks::AdGanParams::generator), gan.generator.values(), 1e-6);
      const Vector fd_d =
          diff::finite_diff_oracle(total_at(&attacks::AdGanParams::discriminator), gan.discriminator.values(), 1e-6);
      worst = std::max(worst, diff::max_relative_error(grads.generator.values(), fd_g, 1e-4));
      worst = std::max(worst, diff::max_relative_error(grads.discriminator.values(), fd_d, 1e-4));
    }
  }
  return {worst <= kCompositeRel, fmt("worst relative error=%.2e (<= %.0e) over 4 seeds x 2 gains", worst, kCompositeRel)};
}

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  double maml_pre = 0, maml_clean = 0, maml_random = 0, maml_adgan = 0;
  double admrl_clean = 0, admrl_adgan = 0;
  double uniform = 0;
  double g_norm = 0;
  int tasks = 0;
};

SeedResult run_desk_seed(const harness::ExperimentConfig& base, std::uint64_t seed, const fs::path& dir) {
  SeedResult r;
  r.seed = seed;
  auto cfg = base;
  cfg.seed = seed;
  cfg.out = dir / ("seed_" + std::to_string(seed));
  cfg.regimes = {trainers::Regime::Maml, trainers::Regime::AdMrl};
  cfg.attack_kinds = {attacks::AttackKind::Identity, attacks::AttackKind::RandomGaussian, attacks::AttackKind::AdGan};
  cfg.scales = {kEvalScale};
  cfg.validate();
  fs::remove_all(cfg.out);
  const auto t0 = Clock::now();
  const auto summary = harness::run_experiment(cfg);
  r.seconds = seconds_since(t0);
  for (const auto& o : summary.regimes) {
    if (!o.ok) {
      r.error = std::string(trainers::to_string(o.regime)) + ": " + o.error;
      return r;
    }
    if (o.regime == trainers::Regime::AdMrl) r.g_norm = o.state.last_gan_terms.mean_perturbation_norm;
  }
  auto cell = [&](const char* regime, attacks::AttackKind kind) -> const trainers::EvalRow* {
    for (const auto& row : summary.rows)
      if (row.regime == regime && row.attack == kind) return &row;
    return nullptr;
  };
  const auto* mc = cell("maml", attacks::AttackKind::Identity);
  const auto* mr = cell("maml", attacks::AttackKind::RandomGaussian);
  const auto* mg = cell("maml", attacks::AttackKind::AdGan);
  const auto* ac = cell("admrl", attacks::AttackKind::Identity);
  const auto* ag = cell("admrl", attacks::AttackKind::AdGan);
  if (!mc || !mr || !mg || !ac || !ag) {
    r.error = "missing report cells";
    return r;
  }
  r.maml_pre = mc->pre_adapt_mean_return;
  r.maml_clean = mc->mean_return;
  r.maml_random = mr->mean_return;
  r.maml_adgan = mg->mean_return;
  r.admrl_clean = ac->mean_return;
  r.admrl_adgan = ag->mean_return;
  r.tasks = mc->n_tasks;
  const auto tasks = trainers::held_out_tasks(cfg.family, static_cast<std::size_t>(cfg.eval_tasks), cfg.seed);
  r.uniform = trainers::uniform_policy_return(cfg.family, tasks, cfg.meta.K, cfg.seed);
  r.ok = true;
  return r;
}

void desk_criteria(const std::vector<SeedResult>& seeds, double c) {
  std::vector<const SeedResult*> ok;
  std::string errors;
  for (const auto& s : seeds) {
    std::cout << fmt("  seed %llu: %s time=%.0fs tasks=%d maml pre=%.3f clean=%.3f random=%.3f adgan=%.3f | admrl "
                     "clean=%.3f adgan=%.3f | uniform=%.3f |G|=%.4f",
                     static_cast<unsigned long long>(s.seed), s.ok ? "ok" : s.error.c_str(), s.seconds, s.tasks,
                     s.maml_pre, s.maml_clean, s.maml_random, s.maml_adgan, s.admrl_clean, s.admrl_adgan, s.uniform,
                     s.g_norm)
              << std::endl;
    if (s.ok) ok.push_back(&s);
    else errors += " seed " + std::to_string(s.seed) + " failed;";
  }
  const bool all_ok = ok.size() == seeds.size() && !seeds.empty();
  auto mean = [&](double SeedResult::*f) {
    double t = 0.0;
    for (const auto* s : ok) t += s->*f;
    return ok.empty() ? NAN : t / static_cast<double>(ok.size());
  };
  bool tasks_ok = all_ok;
  double slowest = 0.0;
  for (const auto* s : ok) {
    tasks_ok = tasks_ok && s->tasks >= kMinEvalTasks;
    slowest = std::max(slowest, s->seconds);
  }

  {
    const double pre = mean(&SeedResult::maml_pre), post = mean(&SeedResult::maml_clean);
    const double need = pre + kAdaptGain * std::abs(pre);
    report(5, {all_ok && post >= need && slowest <= kSeedSeconds,
               fmt("seed-mean maml post=%.3f pre=%.3f (need post >= %.3f); slowest seed %.0fs (<= %.0fs)%s", post, pre,
                   need, slowest, kSeedSeconds, errors.c_str())});
  }
  {
    int wins = 0;
    for (const auto* s : ok) wins += s->maml_clean > s->maml_random && s->maml_random >= s->maml_adgan;
    report(6, {all_ok && tasks_ok && wins >= 2,
               fmt("clean > random >= adgan(%.1f) for maml in %d/%zu seeds (need 2/3)", kEvalScale, wins, seeds.size())});
  }
  {
    int wins = 0;
    for (const auto* s : ok) wins += s->admrl_adgan > s->maml_adgan;
    report(7, {all_ok && tasks_ok && wins >= 2,
               fmt("admrl adgan(%.1f) > maml adgan in %d/%zu seeds (need 2/3)", kEvalScale, wins, seeds.size())});
  }
  {
    const double u = mean(&SeedResult::uniform);
    const double m = mean(&SeedResult::maml_clean) - u, a = mean(&SeedResult::admrl_clean) - u;
    const double gap = m > 0 ? std::abs(a - m) / m : INFINITY;
    report(8, {all_ok && m > 0 && gap <= kRetention,
               fmt("improvement over uniform-random policy: maml=%.3f admrl=%.3f relative gap=%.1f%% (<= %.0f%%)", m, a,
                   100 * gap, 100 * kRetention)});
  }
  {
    double worst = 0.0;
    for (const auto* s : ok) worst = std::max(worst, s->g_norm);
    report(9, {all_ok && worst <= kHingeFactor * c,
               fmt("worst seed mean |G(x)|=%.4f (<= %.2f * c = %.4f)", worst, kHingeFactor, kHingeFactor * c)});
  }
}

Outcome criterion10(const harness::ExperimentConfig& desk, const fs::path& dir) {
  // Every regime, kind and scale, at a reduced iteration count.
  auto cfg = desk;
  cfg.regimes = {trainers::Regime::Maml, trainers::Regime::RandomNoise, trainers::Regime::FgsmTrain,
                 trainers::Regime::AdMrl};
  cfg.attack_kinds = {attacks::AttackKind::Identity, attacks::AttackKind::RandomGaussian, attacks::AttackKind::Fgsm,
                      attacks::AttackKind::AdGan};
  cfg.scales = {0.2, 0.5, 0.8};
  cfg.total_iterations = 6;
  cfg.noise_start_iteration = 3;
  cfg.log_every = 2;
  cfg.attacker_iterations = 3;
  cfg.meta.meta_batch_size = 4;
  cfg.meta.K = 3;
  cfg.family.horizon = 20;
  cfg.eval_tasks = 8;
  cfg.seed = 7;

  const std::vector<std::string> files{"report.csv", "report_table.csv", "report.md", "eval_tasks.csv",
                                       "convergence_maml.csv", "convergence_random_noise.csv", "convergence_fgsm.csv",
                                       "convergence_admrl.csv"};
  auto run = [&](const std::string& name, int stop_after) {
    auto c = cfg;
    c.out = dir / name;
    fs::remove_all(c.out);
    if (stop_after > 0) {
      harness::RunOptions stop;
      stop.stop_after = stop_after;
      harness::run_experiment(c, stop);
      harness::RunOptions resume;
      resume.resume = true;
      harness::run_experiment(c, resume);
    } else {
      harness::run_experiment(c);
    }
    std::vector<std::string> out;
    for (const auto& f : files) out.push_back(fs::exists(c.out / f) ? slurp(c.out / f) : std::string("<missing>"));
    return out;
  };
  const auto a = run("repro_a", -1);
  const auto b = run("repro_b", -1);
  const auto r = run("repro_resume", 4);
  std::string diff_ab, diff_ar;
  bool missing = false;
  for (std::size_t i = 0; i < files.size(); ++i) {
    missing = missing || a[i] == "<missing>";
    if (a[i] != b[i]) diff_ab += " " + files[i];
    if (a[i] != r[i]) diff_ar += " " + files[i];
  }
  return {!missing && diff_ab.empty() && diff_ar.empty(),
          fmt("%zu outputs compared; rerun differs:[%s ] resume differs:[%s ]%s", files.size(), diff_ab.c_str(),
              diff_ar.c_str(), missing ? " (missing outputs)" : "")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = "acceptance_runs";
  std::string config = std::string(ADMRL_SOURCE_DIR) + "/configs/desk_nav2d.ini";
  std::vector<std::uint64_t> seeds{1, 2, 3};
  app.add_option("--work-dir", work, "Scratch directory for experiment outputs");
  app.add_option("--config", config, "Desk configuration");
  app.add_option("--seeds", seeds, "Seeds for the desk experiments");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  auto guarded = [&](int id, const std::function<Outcome()>& f) {
    if (!want(id)) return;
    try {
      report(id, f());
    } catch (const std::exception& e) {
      report(id, {false, std::string("exception: ") + e.what()});
    }
  };

  fs::create_directories(work);
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);

  harness::ExperimentConfig desk;
  try {
    desk = harness::load_config(config);
  } catch (const std::exception& e) {
    for (int id = 5; id <= 10; ++id)
      if (want(id)) report(id, {false, std::string("config: ") + e.what()});
    return 1;
  }
  if (want(5) || want(6) || want(7) || want(8) || want(9)) {
    std::vector<SeedResult> results;
    for (auto s : seeds) {
      try {
        results.push_back(run_desk_seed(desk, s, work));
      } catch (const std::exception& e) {
        SeedResult r;
        r.seed = s;
        r.error = e.what();
        results.push_back(r);
      }
    }
    desk_criteria(results, desk.gan.c);
  }
  guarded(10, [&] { return criterion10(desk, work); });
  std::cout << (failures == 0 ? "acceptance: all criteria passed" : fmt("acceptance: %d criteria failed", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
