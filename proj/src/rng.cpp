#include "manyhyp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace manyhyp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMul0, ctr[0], lo0, hi0);
    mulhilo(kMul1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

Philox4x32::Philox4x32(std::uint64_t key, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
      counter_{0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

void Philox4x32::refill() {
  buffer_ = block(counter_, key_);
  if (++counter_[0] == 0) ++counter_[1];
  consumed_ = 0;
}

Philox4x32::result_type Philox4x32::operator()() {
  if (consumed_ >= 4) refill();
  const std::uint64_t lo = buffer_[static_cast<std::size_t>(consumed_)];
  const std::uint64_t hi = buffer_[static_cast<std::size_t>(consumed_) + 1];
  consumed_ += 2;
  return lo | (hi << 32);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t stream_id(std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = 0x6A09E667F3BCC909ull;
  for (std::uint64_t v : path) h = mix64(h ^ mix64(v));
  return h;
}

double uniform01(RngStream& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(RngStream& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double gamma_variate(double shape, RngStream& rng) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(rng);
}

double log_gamma_variate(double shape, RngStream& rng) {
  if (shape >= 1.0) return std::log(gamma_variate(shape, rng));
  // Gamma(a) = Gamma(a + 1) * U^(1/a)
  const double g = gamma_variate(shape + 1.0, rng);
  return std::log(g) + std::log(uniform01(rng)) / shape;
}

double inverse_gamma_variate(double shape, double scale, RngStream& rng) {
  return scale / gamma_variate(shape, rng);
}

std::size_t sample_log_categorical(std::span<const double> log_weights, RngStream& rng) {
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - top);
  double u = uniform01(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    const double w = std::exp(log_weights[k] - top);
    if (w > 0.0) last_positive = k;
    if (u < w) return k;
    u -= w;
  }
  return last_positive;
}

}  // namespace manyhyp
