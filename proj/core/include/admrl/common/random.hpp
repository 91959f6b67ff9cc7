#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace admrl {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hash a master seed together with any number of stream coordinates
/// (iteration, task index, trajectory index, purpose tag, ...).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Purpose tags keep streams that share coordinates apart.
enum class Stream : std::uint64_t {
  TaskBatch = 1,
  Support = 2,
  Query = 3,
  PolicyInit = 4,
  GanInit = 5,
  EvalTasks = 6,
  EvalSupport = 7,
  EvalQuery = 8,
  AttackerTasks = 9,
  AttackerSupport = 10,
  AttackerQuery = 11,
  AttackerInit = 12,
  UniformPolicy = 13,
};

constexpr std::uint64_t tag(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

/// Uniform double in [0, 1) with 53 random bits; independent of the
/// standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Marsaglia polar method without caching the second variate, so every call
/// consumes the generator identically regardless of history.
inline double standard_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

}  // namespace admrl
