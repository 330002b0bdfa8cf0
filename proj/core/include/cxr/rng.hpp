#pragma once

#include <cstdint>
#include <random>

namespace cxr {

/// Seedable generator whose output is identical on every platform.
///
/// The engine is MT19937-64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so
/// bounded integers and unit reals are derived here from raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Generator for an independent stream `stream` of a base seed. Used when
  /// work is split across threads but results must not depend on the split.
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound). Unbiased (rejection sampling).
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform_unit();

  /// Uniform real in [-1, 1).
  double uniform_symmetric() { return 2.0 * uniform_unit() - 1.0; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace cxr
