#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>

namespace manyhyp {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is
// identified by (key, stream id); the 64-bit block counter walks within it.
// Any stream can be constructed independently of every other stream, so
// parallel work scheduling never changes which numbers a task sees.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;

  Philox4x32(std::uint64_t key, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Raw 4x32 block for a given counter, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  int consumed_ = 4;
};

using RngStream = Philox4x32;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Hash a path of integers (chain, purpose, iteration, item, ...) to a stream id.
std::uint64_t stream_id(std::initializer_list<std::uint64_t> path);

inline RngStream make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return RngStream(seed, stream_id(path));
}

// Purpose tags for stream paths.
enum class StreamPurpose : std::uint64_t {
  kAssignment = 1,
  kMixtureWeights = 2,
  kMetropolis = 3,
  kOrderFactor = 4,
  kChainSeed = 5,
  kSimulation = 6,
  kReplicate = 7,
};

inline std::uint64_t tag(StreamPurpose p) { return static_cast<std::uint64_t>(p); }

// Uniform on the open interval (0, 1).
double uniform01(RngStream& rng);
double standard_normal(RngStream& rng);
// Gamma(shape, 1).
double gamma_variate(double shape, RngStream& rng);
// log of a Gamma(shape, 1) draw, accurate for very small shapes where the
// draw itself underflows.
double log_gamma_variate(double shape, RngStream& rng);
// Inverse-Gamma with shape and scale: density proportional to
// v^(-shape-1) exp(-scale / v).
double inverse_gamma_variate(double shape, double scale, RngStream& rng);

// Draw an index with probability proportional to exp(log_weights[k]).
// Entries equal to -inf are never drawn.
std::size_t sample_log_categorical(std::span<const double> log_weights, RngStream& rng);

}  // namespace manyhyp
