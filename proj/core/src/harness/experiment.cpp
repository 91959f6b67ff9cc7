#include "admrl/harness/experiment.hpp"

#include "admrl/common/error.hpp"
#include "admrl/common/format.hpp"
#include "admrl/common/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <map>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace admrl::harness {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void dump_iteration(const std::filesystem::path& dir, const trainers::IterationInfo& info) {
  std::ostringstream support, query;
  bool first_s = true, first_q = true;
  for (std::size_t i = 0; i < info.objective->tasks.size(); ++i) {
    const auto& t = info.objective->tasks[i];
    rollout::write_trajectories_csv(support, t.adaptation.support, i, first_s);
    rollout::write_trajectories_csv(query, t.query, i, first_q);
    first_s = first_q = false;
  }
  const std::string stem = "iter_" + std::to_string(info.iteration);
  write_file_atomic(dir / (stem + "_support.csv"), support.str());
  write_file_atomic(dir / (stem + "_query.csv"), query.str());
}

trainers::TrainHooks make_hooks(const ExperimentConfig& cfg, const RunPaths& paths, const std::string& ckpt_name,
                                std::optional<trainers::Regime> convergence_for, int last_iteration,
                                const std::function<void(const std::string&)>& log) {
  const auto hash = config_hash(cfg);
  trainers::TrainHooks hooks;
  hooks.log = log;
  hooks.on_checkpoint = [&cfg, paths, ckpt_name, convergence_for, hash](const trainers::TrainState& s) {
    save_checkpoint(make_checkpoint(s, hash, cfg.seed), paths.checkpoint(ckpt_name));
    if (convergence_for) write_file_atomic(paths.convergence(*convergence_for), convergence_csv(*convergence_for, s.series));
  };
  if (cfg.dump_trajectories) {
    const auto dir = paths.trajectories() / ckpt_name;
    const int log_every = cfg.log_every;
    hooks.on_iteration = [dir, log_every, last_iteration](const trainers::IterationInfo& info) {
      if (info.iteration % log_every == 0 || info.iteration == last_iteration) dump_iteration(dir, info);
    };
  }
  return hooks;
}

trainers::TrainState resume_or(const ExperimentConfig& cfg, const RunPaths& paths, const std::string& name,
                               const trainers::TrainRun& run, bool resume,
                               const std::function<trainers::TrainState()>& fresh) {
  const auto path = paths.checkpoint(name);
  if (resume && std::filesystem::exists(path)) {
    const auto ckpt = load_checkpoint(path);
    if (ckpt.config_hash != config_hash(cfg))
      throw CheckpointError("checkpoint " + path.string() + " was written with a different configuration");
    if (ckpt.regime != run.regime) throw CheckpointError("checkpoint " + path.string() + " holds a different regime");
    return restore_state(ckpt, run);
  }
  return fresh();
}

}  // namespace

std::vector<RegimeOutcome> train_regimes(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const RunPaths paths{cfg.out};
  const auto hash = config_hash(cfg);
  auto log = opts.log ? opts.log : [](const std::string& m) { std::clog << m << '\n'; };
  auto limit = [&](int target) { return opts.stop_after >= 0 ? std::min(target, opts.stop_after) : target; };

  std::vector<RegimeOutcome> outcomes;
  for (auto r : cfg.regimes) outcomes.push_back({r, false, {}, {}});

  // Shared clean prefix [0, noise_start).
  trainers::TrainRun prefix_run = cfg.train_run(trainers::Regime::Maml);
  prefix_run.total_iterations = limit(cfg.noise_start_iteration);
  prefix_run.noise_start_iteration = prefix_run.total_iterations;
  trainers::TrainState prefix;
  try {
    prefix = resume_or(cfg, paths, "prefix", prefix_run, opts.resume, [&] { return trainers::initial_state(prefix_run); });
    if (prefix.iteration < prefix_run.total_iterations)
      log("training shared clean prefix: iterations " + std::to_string(prefix.iteration) + ".." +
          std::to_string(prefix_run.total_iterations - 1));
    prefix = trainers::train(prefix_run, std::move(prefix),
                             make_hooks(cfg, paths, "prefix", std::nullopt, cfg.total_iterations - 1, log));
    save_checkpoint(make_checkpoint(prefix, hash, cfg.seed), paths.checkpoint("prefix"));
  } catch (const std::exception& e) {
    for (auto& o : outcomes) o.error = std::string("shared prefix failed: ") + e.what();
    log(outcomes.front().error);
    return outcomes;
  }
  if (prefix.iteration < cfg.noise_start_iteration) {
    for (auto& o : outcomes) {
      o.state = prefix;
      o.state.regime = o.regime;
      o.error = "stopped early";
    }
    return outcomes;
  }

  for (auto& o : outcomes) {
    try {
      trainers::TrainRun run = cfg.train_run(o.regime);
      run.total_iterations = limit(cfg.total_iterations);
      auto state = resume_or(cfg, paths, std::string(trainers::to_string(o.regime)), run, opts.resume, [&] {
        trainers::TrainState s = prefix;
        s.regime = o.regime;
        s.gan = trainers::initial_state(run).gan;
        return s;
      });
      log("training " + std::string(trainers::to_string(o.regime)) + ": iterations " + std::to_string(state.iteration) +
          ".." + std::to_string(run.total_iterations - 1));
      const std::string name(trainers::to_string(o.regime));
      state = trainers::train(run, std::move(state), make_hooks(cfg, paths, name, o.regime, cfg.total_iterations - 1, log));
      save_checkpoint(make_checkpoint(state, hash, cfg.seed), paths.checkpoint(name));
      write_file_atomic(paths.convergence(o.regime), convergence_csv(o.regime, state.series));
      o.ok = state.iteration == cfg.total_iterations;
      if (!o.ok) o.error = "stopped early";
      o.state = std::move(state);
    } catch (const std::exception& e) {
      o.ok = false;
      o.error = e.what();
      log("regime " + std::string(trainers::to_string(o.regime)) + " aborted: " + e.what());
    }
  }
  return outcomes;
}

std::vector<attacks::AttackSpec> evaluation_grid(const ExperimentConfig& cfg) {
  std::vector<attacks::AttackSpec> grid{{attacks::AttackKind::Identity, 0.0, cfg.noise_mu, cfg.noise_sigma}};
  for (auto kind : cfg.attack_kinds) {
    if (kind == attacks::AttackKind::Identity) continue;
    for (double s : cfg.scales) grid.push_back({kind, s, cfg.noise_mu, cfg.noise_sigma});
  }
  return grid;
}

std::vector<trainers::EvalRow> evaluate_policy(const ExperimentConfig& cfg, trainers::Regime regime,
                                               const diff::ParamVector& theta,
                                               std::shared_ptr<const attacks::AdGanParams> admrl_gan,
                                               const std::vector<envs::TaskSpec>& tasks) {
  const auto grid = evaluation_grid(cfg);
  const rollout::GaussianPolicy policy{cfg.policy_arch(), theta};
  // One generator per adgan scale: either a fresh attacker trained at that
  // budget against this policy, or the shared adMRL generator.
  std::map<double, std::shared_ptr<const attacks::AdGanParams>> gans;
  for (const auto& a : grid) {
    if (a.kind != attacks::AttackKind::AdGan || a.is_identity() || gans.count(a.scale)) continue;
    if (cfg.gan_source == GanSource::AdMrl) {
      if (!admrl_gan) throw ContractError("adgan evaluation needs the generator of a completed admrl run");
      gans[a.scale] = admrl_gan;
      continue;
    }
    trainers::AttackerRun ar;
    ar.iterations = cfg.attacker_iterations;
    ar.budget = a.scale;
    ar.arch = cfg.gan;
    ar.optimizer.lr = cfg.attacker_lr;
    ar.seed = cfg.seed;
    ar.workers = cfg.workers;
    gans[a.scale] = std::make_shared<const attacks::AdGanParams>(trainers::train_attacker(policy, cfg.family, cfg.meta, ar));
  }
  std::vector<trainers::EvalRow> rows(grid.size());
  parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
    const bool adgan = grid[i].kind == attacks::AttackKind::AdGan && !grid[i].is_identity();
    rows[i] = trainers::meta_test(policy, grid[i], tasks, cfg.family, cfg.meta, adgan ? gans.at(grid[i].scale) : nullptr,
                                  cfg.seed, 1);
    rows[i].regime = std::string(trainers::to_string(regime));
  });
  return rows;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const RunPaths paths{cfg.out};
  std::filesystem::create_directories(paths.root);
  auto log = opts.log ? opts.log : [](const std::string& m) { std::clog << m << '\n'; };

  const auto tasks = trainers::held_out_tasks(cfg.family, static_cast<std::size_t>(cfg.eval_tasks), cfg.seed);
  {
    std::ostringstream ss;
    envs::write_tasks_csv(ss, tasks);
    write_file_atomic(paths.tasks_csv(), ss.str());
  }

  RunSummary summary;
  summary.dir = paths.root;
  RunOptions train_opts = opts;
  train_opts.log = log;
  summary.regimes = train_regimes(cfg, train_opts);
  summary.complete = opts.stop_after < 0 || opts.stop_after >= cfg.total_iterations;

  nlohmann::json manifest;
  manifest["config_hash"] = hex64(config_hash(cfg));
  manifest["seed"] = cfg.seed;
  manifest["eval_task_seed"] = cfg.seed;
  manifest["complete"] = summary.complete;
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(cfg)) config[k] = v;
  manifest["config"] = config;

  if (summary.complete) {
    std::shared_ptr<const attacks::AdGanParams> admrl_gan;
    for (const auto& o : summary.regimes)
      if (o.ok && o.regime == trainers::Regime::AdMrl && o.state.gan)
        admrl_gan = std::make_shared<const attacks::AdGanParams>(*o.state.gan);
    for (auto& o : summary.regimes) {
      if (!o.ok) continue;
      try {
        log("evaluating " + std::string(trainers::to_string(o.regime)));
        auto rows = evaluate_policy(cfg, o.regime, o.state.theta, admrl_gan, tasks);
        summary.rows.insert(summary.rows.end(), rows.begin(), rows.end());
      } catch (const std::exception& e) {
        o.ok = false;
        o.error = std::string("evaluation failed: ") + e.what();
        log(std::string(trainers::to_string(o.regime)) + ": " + o.error);
      }
    }
    write_file_atomic(paths.report_csv(), eval_rows_csv(summary.rows));
    if (!summary.rows.empty()) {
      // Every configured regime gets a line, even one with no rows.
      std::vector<std::string> expected;
      for (const auto& o : summary.regimes) expected.emplace_back(trainers::to_string(o.regime));
      const auto tables = emit_report(summary.rows, expected);
      write_file_atomic(paths.table_md(), tables.markdown);
      write_file_atomic(paths.table_csv(), tables.csv);
    }
  }

  nlohmann::json regimes = nlohmann::json::array();
  for (const auto& o : summary.regimes) {
    nlohmann::json r;
    r["regime"] = std::string(trainers::to_string(o.regime));
    r["status"] = o.ok ? "ok" : "failed";
    if (!o.ok) r["error"] = o.error;
    r["iterations"] = o.state.iteration;
    r["aborted_trpo_steps"] = o.state.aborted_trpo_steps;
    if (o.state.gan) r["final_mean_perturbation_norm"] = o.state.last_gan_terms.mean_perturbation_norm;
    regimes.push_back(r);
  }
  manifest["regimes"] = regimes;
  manifest["report_rows"] = summary.rows.size();
  manifest["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file_atomic(paths.manifest(), manifest.dump(2) + "\n");
  return summary;
}

}  // namespace admrl::harness
