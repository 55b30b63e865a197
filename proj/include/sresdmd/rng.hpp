#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace sresdmd {

// Philox4x32-10 block function (Salmon et al., counter-based RNG).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Stream id for a labeled substream: hash of the label in the high word,
// index in the low word. Distinct (label, index) pairs give distinct streams.
std::uint64_t stream_id(std::string_view label, std::uint32_t index = 0);

// Inverse of the standard normal CDF, p in (0, 1).
double normal_quantile(double p);

// Seeded counter-based generator. The counter is (stream, substream, block);
// every (seed, stream, substream) triple is an independent sequence, so
// realizations can be produced in any order or in parallel.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint32_t substream = 0);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  // Standard normal by inverse CDF of one uniform draw.
  double normal();

  // Position at the start of the given 128-bit block.
  void seek(std::uint32_t block);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;  // 64-bit halves consumed from buffer_ (0, 2 or 4)
};

}  // namespace sresdmd
