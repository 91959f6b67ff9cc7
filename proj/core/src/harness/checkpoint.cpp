#include "admrl/harness/checkpoint.hpp"

#include "admrl/common/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace admrl::harness {

namespace {

constexpr std::array<char, 8> kMagic{'A', 'D', 'M', 'R', 'L', 'C', 'K', '\0'};

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> b{};
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.write(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), sizeof(T))) throw CheckpointError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

void put_vector(std::ostream& out, const diff::Vector& v) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(out, v[i]);
}

diff::Vector get_vector(std::istream& in, std::size_t max_len) {
  const auto n = get<std::uint64_t>(in);
  if (n > max_len) throw CheckpointError("checkpoint vector length is implausible");
  diff::Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get<double>(in);
  return v;
}

void put_adam(std::ostream& out, const diff::AdamState& s) {
  put_vector(out, s.m);
  put_vector(out, s.v);
  put<std::int64_t>(out, s.step);
}

diff::AdamState get_adam(std::istream& in, std::size_t max_len) {
  diff::AdamState s;
  s.m = get_vector(in, max_len);
  s.v = get_vector(in, max_len);
  s.step = get<std::int64_t>(in);
  return s;
}

std::uint64_t checksum(std::string_view bytes) { return fnv1a(bytes); }

}  // namespace

Checkpoint make_checkpoint(const trainers::TrainState& state, std::uint64_t config_hash, std::uint64_t seed) {
  Checkpoint c;
  c.config_hash = config_hash;
  c.seed = seed;
  c.regime = state.regime;
  c.iteration = state.iteration;
  c.aborted_trpo_steps = state.aborted_trpo_steps;
  c.theta = state.theta;
  if (state.gan) {
    c.generator = state.gan->generator;
    c.discriminator = state.gan->discriminator;
  }
  c.generator_adam = state.gan_optimizer.generator;
  c.discriminator_adam = state.gan_optimizer.discriminator;
  c.last_gan_terms = state.last_gan_terms;
  c.series = state.series;
  return c;
}

trainers::TrainState restore_state(const Checkpoint& ckpt, const trainers::TrainRun& run) {
  if (ckpt.seed != run.seed) throw CheckpointError("checkpoint was written with a different seed");
  trainers::TrainState s = trainers::initial_state(run);
  if (!s.theta.same_layout(ckpt.theta))
    throw CheckpointError("checkpoint policy layout does not match the configuration");
  s.regime = ckpt.regime;
  s.iteration = ckpt.iteration;
  s.aborted_trpo_steps = ckpt.aborted_trpo_steps;
  s.theta = ckpt.theta;
  if (ckpt.generator && ckpt.discriminator) {
    if (!s.gan) {
      Rng rng(0);
      s.gan = attacks::make_adgan(run.family.state_dim(), run.gan, rng);
    }
    if (!s.gan->generator.same_layout(*ckpt.generator) ||
        !s.gan->discriminator.same_layout(*ckpt.discriminator))
      throw CheckpointError("checkpoint generator layout does not match the configuration");
    s.gan->generator = *ckpt.generator;
    s.gan->discriminator = *ckpt.discriminator;
  }
  s.gan_optimizer.generator = ckpt.generator_adam;
  s.gan_optimizer.discriminator = ckpt.discriminator_adam;
  s.last_gan_terms = ckpt.last_gan_terms;
  s.series = ckpt.series;
  return s;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, c.config_hash);
  put<std::uint64_t>(out, c.seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.regime));
  put<std::int64_t>(out, c.iteration);
  put<std::int64_t>(out, c.aborted_trpo_steps);
  diff::write_params(out, c.theta);
  const bool has_gan = c.generator && c.discriminator;
  put<std::uint8_t>(out, has_gan ? 1 : 0);
  if (has_gan) {
    diff::write_params(out, *c.generator);
    diff::write_params(out, *c.discriminator);
  }
  put_adam(out, c.generator_adam);
  put_adam(out, c.discriminator_adam);
  for (double v : {c.last_gan_terms.adv, c.last_gan_terms.gan, c.last_gan_terms.hinge, c.last_gan_terms.total,
                   c.last_gan_terms.mean_perturbation_norm})
    put<double>(out, v);
  put<std::uint64_t>(out, c.series.size());
  for (const auto& p : c.series) {
    put<std::int64_t>(out, p.iteration);
    put<double>(out, p.mean_return);
    put<double>(out, p.pre_adapt_return);
  }
  std::string bytes = out.str();
  std::ostringstream tail(std::ios::binary);
  put<std::uint64_t>(tail, checksum(bytes));
  return bytes + tail.str();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagic.size() + sizeof(std::uint32_t) + sizeof(std::uint64_t))
    throw CheckpointError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) throw CheckpointError("not a checkpoint file");
  {
    std::istringstream hdr(bytes.substr(kMagic.size(), sizeof(std::uint32_t)), std::ios::binary);
    const auto version = get<std::uint32_t>(hdr);
    if (version != kCheckpointVersion)
      throw CheckpointVersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(kCheckpointVersion) + ")");
  }
  const std::string body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  {
    std::istringstream tail(bytes.substr(body.size()), std::ios::binary);
    if (get<std::uint64_t>(tail) != checksum(body)) throw CheckpointError("checkpoint checksum mismatch (truncated or corrupt)");
  }

  std::istringstream in(body, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(kMagic.size() + sizeof(std::uint32_t)));
  const std::size_t max_len = body.size() / sizeof(double);
  Checkpoint c;
  c.config_hash = get<std::uint64_t>(in);
  c.seed = get<std::uint64_t>(in);
  const auto regime = get<std::uint32_t>(in);
  if (regime > static_cast<std::uint32_t>(trainers::Regime::AdMrl)) throw CheckpointError("checkpoint regime is invalid");
  c.regime = static_cast<trainers::Regime>(regime);
  c.iteration = static_cast<int>(get<std::int64_t>(in));
  c.aborted_trpo_steps = static_cast<int>(get<std::int64_t>(in));
  c.theta = diff::read_params(in);
  const auto has_gan = get<std::uint8_t>(in);
  if (has_gan > 1) throw CheckpointError("checkpoint generator flag is invalid");
  if (has_gan) {
    c.generator = diff::read_params(in);
    c.discriminator = diff::read_params(in);
  }
  c.generator_adam = get_adam(in, max_len);
  c.discriminator_adam = get_adam(in, max_len);
  c.last_gan_terms.adv = get<double>(in);
  c.last_gan_terms.gan = get<double>(in);
  c.last_gan_terms.hinge = get<double>(in);
  c.last_gan_terms.total = get<double>(in);
  c.last_gan_terms.mean_perturbation_norm = get<double>(in);
  const auto n = get<std::uint64_t>(in);
  if (n > max_len) throw CheckpointError("checkpoint series length is implausible");
  c.series.resize(n);
  for (auto& p : c.series) {
    p.iteration = static_cast<int>(get<std::int64_t>(in));
    p.mean_return = get<double>(in);
    p.pre_adapt_return = get<double>(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing bytes");
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace admrl::harness
