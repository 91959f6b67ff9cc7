#pragma once

#include "admrl/harness/checkpoint.hpp"
#include "admrl/harness/config.hpp"
#include "admrl/harness/report.hpp"
#include "admrl/trainers/meta_test.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace admrl::harness {

struct RunOptions {
  /// Continue from checkpoints found in the output directory.
  bool resume = false;
  /// Stop every regime (and the shared clean prefix) after this many total
  /// iterations, leaving checkpoints behind; -1 runs to completion.
  int stop_after = -1;
  std::function<void(const std::string&)> log;
};

/// Output layout below cfg.out.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path checkpoint(const std::string& name) const { return root / "checkpoints" / (name + ".ckpt"); }
  std::filesystem::path convergence(trainers::Regime r) const {
    return root / ("convergence_" + std::string(trainers::to_string(r)) + ".csv");
  }
  std::filesystem::path report_csv() const { return root / "report.csv"; }
  std::filesystem::path table_csv() const { return root / "report_table.csv"; }
  std::filesystem::path table_md() const { return root / "report.md"; }
  std::filesystem::path tasks_csv() const { return root / "eval_tasks.csv"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path trajectories() const { return root / "trajectories"; }
};

struct RegimeOutcome {
  trainers::Regime regime;
  bool ok = false;
  std::string error;
  trainers::TrainState state;
};

/// Trains the listed regimes. Iterations before noise_start_iteration are
/// identical for every regime (randomness depends only on the seed), so they
/// are computed once and shared. Checkpoints and convergence CSVs are written
/// every log_every iterations. A regime that throws is recorded, not rethrown.
std::vector<RegimeOutcome> train_regimes(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Evaluates one trained policy on the configured grid: a clean row followed
/// by every non-identity kind at every scale.
std::vector<trainers::EvalRow> evaluate_policy(const ExperimentConfig& cfg, trainers::Regime regime,
                                               const diff::ParamVector& theta,
                                               std::shared_ptr<const attacks::AdGanParams> admrl_gan,
                                               const std::vector<envs::TaskSpec>& tasks);

/// The grid cells evaluated for every regime.
std::vector<attacks::AttackSpec> evaluation_grid(const ExperimentConfig& cfg);

struct RunSummary {
  std::filesystem::path dir;
  std::vector<RegimeOutcome> regimes;
  std::vector<trainers::EvalRow> rows;
  bool complete = false;  // false when stopped early via stop_after
};

/// Trains every regime, evaluates the grid on a shared held-out task set and
/// writes report.csv, report.md, report_table.csv, convergence CSVs,
/// eval_tasks.csv and manifest.json (all atomically).
RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

}  // namespace admrl::harness
