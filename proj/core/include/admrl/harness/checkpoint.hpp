#pragma once

#include "admrl/common/error.hpp"
#include "admrl/harness/config.hpp"
#include "admrl/trainers/trainers.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace admrl::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Incompatible checkpoint format version.
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Everything needed to continue a run bit-exactly. No generator state is
/// stored: every random stream is re-derived from (seed, iteration).
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  trainers::Regime regime = trainers::Regime::Maml;
  int iteration = 0;
  int aborted_trpo_steps = 0;
  diff::ParamVector theta;
  std::optional<diff::ParamVector> generator;
  std::optional<diff::ParamVector> discriminator;
  diff::AdamState generator_adam;
  diff::AdamState discriminator_adam;
  attacks::GanTerms last_gan_terms;
  std::vector<trainers::ConvergencePoint> series;
};

Checkpoint make_checkpoint(const trainers::TrainState& state, std::uint64_t config_hash, std::uint64_t seed);

/// Rebuilds a train state; the generator architecture comes from `run`.
/// Throws CheckpointError when the stored layouts do not match it.
trainers::TrainState restore_state(const Checkpoint& ckpt, const trainers::TrainRun& run);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// Atomic write (temp file + rename).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws CheckpointError on truncation or corruption and
/// CheckpointVersionError on a format mismatch. Never returns partial state.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace admrl::harness
