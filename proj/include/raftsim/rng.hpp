#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>

namespace raftsim {

/// Seeded pseudo-random stream identified by (seed, label).
///
/// Children are a pure function of the parent's seed and the child label, so
/// the order in which streams are forked never changes what they produce.
/// Draw helpers avoid std:: distributions so sequences do not depend on the
/// standard library implementation.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed, std::string label = "root");

  /// Seed of the child stream `label` under a parent seeded with `parent_seed`.
  static std::uint64_t derive_seed(std::uint64_t parent_seed, std::string_view label);

  /// Forks an independent child. Forking the same label twice from one
  /// parent is a programming error and throws std::logic_error.
  RngStream fork(std::string_view label);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi] (inclusive), unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1)); }
  /// Standard normal via Box-Muller.
  double normal();
  bool bernoulli(double p) { return uniform01() < p; }

private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
  std::set<std::string, std::less<>> forked_;
  std::optional<double> spare_normal_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

} // namespace raftsim
