#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace levelset {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Mix up to three words into a stream identifier (splitmix64 chaining).
std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Purpose tags so that streams for different uses never collide.
enum class StreamTag : std::uint64_t {
  ensemble = 0x454e53,
  lines = 0x4c494e,
  line_sample = 0x4c5350,
  bootstrap = 0x424f4f,
  sphere_shift = 0x535048,
  gaussian_mc = 0x474d43,
  conditional = 0x434e44,
};

inline std::uint64_t derive_stream(StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  return derive_stream(static_cast<std::uint64_t>(tag), a, b);
}

/// Counter-based generator: the output is a pure function of
/// (seed, stream, position), so work items can be scheduled in any order
/// without changing results.
///
/// Satisfies UniformRandomBitGenerator, so std distributions accept it.
class CounterRng {
public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Box-Muller; the second variate is cached).
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int available_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace levelset
