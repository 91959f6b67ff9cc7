#pragma once

#include "admrl/attacks/attacks.hpp"
#include "admrl/metapg/maml.hpp"
#include "admrl/trainers/trainers.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace admrl::harness {

/// Which generator the adGAN evaluation cells use.
enum class GanSource {
  Attacker,  // a fresh generator trained against each frozen policy
  AdMrl,     // the generator co-trained by the adMRL regime (shared by all regimes)
};

std::string_view to_string(GanSource source);

struct ExperimentConfig {
  envs::TaskFamily family = envs::TaskFamily::defaults(envs::FamilyKind::Nav2D);
  std::vector<std::size_t> policy_hidden{64, 64};
  double init_log_std = 0.0;
  metapg::MetaConfig meta = metapg::MetaConfig::defaults(envs::FamilyKind::Nav2D);

  std::vector<attacks::AttackKind> attack_kinds{attacks::AttackKind::Identity, attacks::AttackKind::RandomGaussian,
                                                attacks::AttackKind::Fgsm, attacks::AttackKind::AdGan};
  std::vector<double> scales{0.2, 0.5, 0.8};
  double noise_mu = 0.0;
  double noise_sigma = 1.0;
  attacks::AdGanArch gan;
  double gan_lr = 1e-3;
  double attacker_lr = 1e-2;  // fresh evaluation attackers only
  double train_scale = 0.2;
  int attacker_iterations = 100;
  GanSource gan_source = GanSource::Attacker;

  std::vector<trainers::Regime> regimes{trainers::Regime::Maml, trainers::Regime::RandomNoise,
                                        trainers::Regime::FgsmTrain, trainers::Regime::AdMrl};
  int total_iterations = 500;
  int noise_start_iteration = 300;
  int log_every = 50;
  bool dump_trajectories = false;

  int eval_tasks = 40;

  std::uint64_t seed = 1;
  std::filesystem::path out = "runs/default";
  std::size_t workers = 1;

  void validate() const;
  rollout::PolicyArch policy_arch() const;
  trainers::TrainRun train_run(trainers::Regime regime) const;
};

/// Every known key with its current value, sorted by key.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);
std::vector<std::string> known_keys();

/// Sets one dotted key from its text form. Throws ConfigError on an unknown
/// key or a malformed value.
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value, int line = 0);

/// Parses configuration text: `[section]` headers, `key = value` lines
/// (a dotted key is fully qualified even inside a section), `#`/`;` comments, lists as `[a, b]`.
/// Starts from the defaults. Errors carry the line number.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

inline constexpr std::string_view kEnvPrefix = "ADMRL_";

/// Env var name for a key: ADMRL_ + key uppercased with '.' replaced by '_'.
std::string env_var_name(std::string_view key);

/// Applies every known key found through `getenv` (defaults to std::getenv).
void apply_env_overrides(ExperimentConfig& cfg,
                         const std::function<std::optional<std::string>(const std::string&)>& getenv = {});

/// Canonical `key = value` dump; parse_config(dump(cfg)) reproduces cfg.
std::string dump_config(const ExperimentConfig& cfg);

/// FNV-1a over the canonical dump of every value that can change results
/// (run.out and run.workers are excluded).
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace admrl::harness
