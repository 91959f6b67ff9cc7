// admrl: train, evaluate and report adversarially robust meta-RL runs.

#include "admrl/diffcore/gradcheck.hpp"
#include "admrl/harness/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace admrl;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::vector<std::string> regimes;
  std::vector<std::string> attacks;
  std::vector<double> scales;
  bool resume = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Config file (key = value, [section] headers)");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

harness::ExperimentConfig effective_config(const Common& c) {
  harness::ExperimentConfig cfg = c.config.empty() ? harness::parse_config("") : harness::load_config(c.config);
  harness::apply_env_overrides(cfg);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out = *c.out;
  if (c.workers) cfg.workers = *c.workers;
  if (!c.regimes.empty()) {
    cfg.regimes.clear();
    for (const auto& r : c.regimes) cfg.regimes.push_back(trainers::regime_from_string(r));
  }
  if (!c.attacks.empty()) {
    cfg.attack_kinds.clear();
    for (const auto& a : c.attacks) cfg.attack_kinds.push_back(attacks::attack_from_string(a));
  }
  if (!c.scales.empty()) cfg.scales = c.scales;
  cfg.validate();
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_train(const Common& c) {
  const auto cfg = effective_config(c);
  harness::RunOptions opts;
  opts.resume = c.resume;
  const auto outcomes = harness::train_regimes(cfg, opts);
  int rc = 0;
  for (const auto& o : outcomes) {
    std::cout << trainers::to_string(o.regime) << ": " << (o.ok ? "ok" : "failed: " + o.error) << " (iteration "
              << o.state.iteration << ")\n";
    if (!o.ok) rc = 1;
  }
  return rc;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint) {
  const auto cfg = effective_config(c);
  const harness::RunPaths paths{cfg.out};
  const auto tasks = trainers::held_out_tasks(cfg.family, static_cast<std::size_t>(cfg.eval_tasks), cfg.seed);
  std::shared_ptr<const attacks::AdGanParams> admrl_gan;
  const auto admrl_ckpt = paths.checkpoint("admrl");
  if (cfg.gan_source == harness::GanSource::AdMrl && std::filesystem::exists(admrl_ckpt)) {
    const auto run = cfg.train_run(trainers::Regime::AdMrl);
    auto s = harness::restore_state(harness::load_checkpoint(admrl_ckpt), run);
    if (s.gan) admrl_gan = std::make_shared<const attacks::AdGanParams>(*s.gan);
  }
  std::vector<trainers::EvalRow> rows;
  for (auto regime : cfg.regimes) {
    const std::string name(trainers::to_string(regime));
    const auto path = checkpoint.empty() ? paths.checkpoint(name) : std::filesystem::path(checkpoint);
    const auto ckpt = harness::load_checkpoint(path);
    if (ckpt.config_hash != harness::config_hash(cfg))
      std::cerr << "warning: " << path << " was written with a different configuration\n";
    const auto state = harness::restore_state(ckpt, cfg.train_run(regime));
    auto r = harness::evaluate_policy(cfg, regime, state.theta, admrl_gan, tasks);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::cout << harness::eval_rows_csv(rows);
  return 0;
}

int cmd_report(const std::string& input, const std::string& out_dir) {
  const auto rows = harness::parse_eval_rows_csv(slurp(input));
  const auto tables = harness::emit_report(rows);
  if (!out_dir.empty()) {
    harness::write_file_atomic(std::filesystem::path(out_dir) / "report.md", tables.markdown);
    harness::write_file_atomic(std::filesystem::path(out_dir) / "report_table.csv", tables.csv);
  }
  std::cout << tables.markdown;
  return 0;
}

int cmd_run_all(const Common& c, int stop_after) {
  const auto cfg = effective_config(c);
  harness::RunOptions opts;
  opts.resume = c.resume;
  opts.stop_after = stop_after;
  const auto summary = harness::run_experiment(cfg, opts);
  int rc = 0;
  for (const auto& o : summary.regimes)
    if (!o.ok && summary.complete) {
      std::cerr << trainers::to_string(o.regime) << " failed: " << o.error << "\n";
      rc = 1;
    }
  if (summary.complete) {
    const auto expected = harness::evaluation_grid(cfg).size() * cfg.regimes.size();
    if (summary.rows.size() != expected) {
      std::cerr << "report has " << summary.rows.size() << " rows, expected " << expected << "\n";
      rc = 1;
    }
    std::cout << slurp((summary.dir / "report.md").string());
  }
  std::cout << "artifacts in " << summary.dir.string() << "\n";
  return rc;
}

int cmd_gradcheck(const diff::GradcheckConfig& gc) {
  const auto r = diff::run_gradcheck(gc);
  std::cout << "cases " << r.cases << ", worst relative error: params " << r.worst_params << ", inputs "
            << r.worst_inputs << ", failures " << r.failures << " (tolerance " << gc.tolerance << ")\n";
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarially robust meta reinforcement learning laboratory"};
  app.require_subcommand(1);

  Common train_c, eval_c, run_c, show_c;
  auto* train = app.add_subcommand("train", "Train regimes, writing checkpoints and convergence CSVs");
  add_common(train, train_c);
  train->add_option("--regime", train_c.regimes, "Regime(s): maml, random_noise, fgsm, admrl");
  train->add_flag("--resume", train_c.resume, "Continue from checkpoints in the output directory");

  std::string checkpoint;
  auto* evaluate = app.add_subcommand("evaluate", "Meta-test trained checkpoints on the attack grid");
  add_common(evaluate, eval_c);
  evaluate->add_option("--regime", eval_c.regimes, "Regime(s) to evaluate");
  evaluate->add_option("--attack", eval_c.attacks, "Attack kind(s): identity, random, fgsm, adgan");
  evaluate->add_option("--scale", eval_c.scales, "Attack scale(s)");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file (default: <out>/checkpoints/<regime>.ckpt)");

  std::string report_in, report_out;
  auto* report = app.add_subcommand("report", "Render report.csv as Markdown and a wide CSV table");
  report->add_option("input", report_in, "Evaluation CSV (report.csv)")->required();
  report->add_option("--out", report_out, "Directory for report.md and report_table.csv");

  int stop_after = -1;
  auto* run_all = app.add_subcommand("run-all", "Train every regime and evaluate the full grid");
  add_common(run_all, run_c);
  run_all->add_option("--regime", run_c.regimes, "Restrict the regimes");
  run_all->add_option("--attack", run_c.attacks, "Restrict the attack kinds");
  run_all->add_option("--scale", run_c.scales, "Restrict the scales");
  run_all->add_flag("--resume", run_c.resume, "Continue from checkpoints in the output directory");
  run_all->add_option("--stop-after", stop_after, "Stop training after this many iterations (leaves checkpoints)");

  diff::GradcheckConfig gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the differentiation engine");
  gradcheck->add_option("--cases", gc.cases, "Random cases");
  gradcheck->add_option("--seed", gc.seed, "Seed");

  auto* show = app.add_subcommand("show-config", "Print the effective configuration and its hash");
  add_common(show, show_c);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_c);
    if (*evaluate) return cmd_evaluate(eval_c, checkpoint);
    if (*report) return cmd_report(report_in, report_out);
    if (*run_all) return cmd_run_all(run_c, stop_after);
    if (*gradcheck) return cmd_gradcheck(gc);
    if (*show) {
      const auto cfg = effective_config(show_c);
      std::cout << harness::dump_config(cfg);
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(harness::config_hash(cfg)));
      std::cout << "# hash " << buf << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
