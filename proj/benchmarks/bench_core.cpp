#include "admrl/attacks/attacks.hpp"
#include "admrl/harness/config.hpp"
#include "admrl/metapg/surrogate.hpp"
#include "admrl/rollout/collect.hpp"

#include <benchmark/benchmark.h>

using namespace admrl;

namespace {

rollout::GaussianPolicy desk_policy() {
  rollout::PolicyArch arch;
  Rng rng(1);
  return {arch, arch.initialize(rng)};
}

std::vector<rollout::Trajectory> desk_batch(const rollout::GaussianPolicy& pol, int K) {
  const auto fam = envs::TaskFamily::defaults(envs::FamilyKind::Nav2D);
  envs::TaskSpec task;
  task.goal = {0.3, -0.2};
  auto trajs = rollout::collect_trajectories(pol, fam, task, K, fam.horizon, rollout::IdentityPerturber{}, 5);
  rollout::process_batch(trajs, 0.99, fam.horizon);
  return trajs;
}

// Forward + reverse pass of the surrogate over K * 50 rows.
void BM_SurrogateGrad(benchmark::State& state) {
  const auto pol = desk_policy();
  const auto trajs = desk_batch(pol, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metapg::reinforce_surrogate_grad(trajs, pol));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 50);
}
BENCHMARK(BM_SurrogateGrad)->Arg(1)->Arg(10)->Arg(40);

void BM_Collect(benchmark::State& state) {
  const auto pol = desk_policy();
  const auto fam = envs::TaskFamily::defaults(envs::FamilyKind::Nav2D);
  envs::TaskSpec task;
  task.goal = {0.3, -0.2};
  const auto kind = static_cast<attacks::AttackKind>(state.range(0));
  Rng rng(2);
  attacks::AdGanArch arch;
  auto gan = std::make_shared<const attacks::AdGanParams>(attacks::make_adgan(2, arch, rng));
  const auto perturber = attacks::make_perturber({kind, kind == attacks::AttackKind::Identity ? 0.0 : 0.5}, gan);
  for (auto _ : state)
    benchmark::DoNotOptimize(rollout::collect_trajectories(pol, fam, task, 10, fam.horizon, *perturber, 3));
  state.SetLabel(std::string(attacks::to_string(kind)));
  state.SetItemsProcessed(state.iterations() * 10 * fam.horizon);
}
BENCHMARK(BM_Collect)
    ->Arg(static_cast<int>(attacks::AttackKind::Identity))
    ->Arg(static_cast<int>(attacks::AttackKind::RandomGaussian))
    ->Arg(static_cast<int>(attacks::AttackKind::Fgsm))
    ->Arg(static_cast<int>(attacks::AttackKind::AdGan));

// One desk-size meta-iteration (20 tasks, K = 10, H = 50) with TRPO.
void BM_MetaIteration(benchmark::State& state) {
  harness::ExperimentConfig cfg;
  const auto regime = static_cast<trainers::Regime>(state.range(0));
  auto run = cfg.train_run(regime);
  run.noise_start_iteration = 0;
  run.total_iterations = 1;
  const auto init = trainers::initial_state(run);
  for (auto _ : state) benchmark::DoNotOptimize(trainers::train(run, init, {.log = [](const std::string&) {}}));
  state.SetLabel(std::string(trainers::to_string(regime)));
}
BENCHMARK(BM_MetaIteration)
    ->Arg(static_cast<int>(trainers::Regime::Maml))
    ->Arg(static_cast<int>(trainers::Regime::AdMrl))
    ->Unit(benchmark::kMillisecond)
    ->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
