#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "manyhyp/rng.hpp"

using namespace manyhyp;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using B = std::array<std::uint32_t, 4>;
  CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) ==
        B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          {0xffffffffu, 0xffffffffu}) ==
        B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          {0xa4093822u, 0x299f31d0u}) ==
        B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  auto a = make_stream(7, {1, 2, 3});
  auto b = make_stream(7, {1, 2, 3});
  auto c = make_stream(7, {1, 2, 4});
  auto d = make_stream(8, {1, 2, 3});
  int same_c = 0;
  int same_d = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    CHECK(x == b());
    same_c += x == c() ? 1 : 0;
    same_d += x == d() ? 1 : 0;
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);
  CHECK(stream_id({1, 2}) != stream_id({2, 1}));
  CHECK(stream_id({1}) != stream_id({1, 0}));
}

TEST_CASE("uniform01 stays in the open interval with the right moments") {
  auto rng = make_stream(1, {9});
  double s = 0.0;
  double s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    s += u;
    s2 += u * u;
  }
  CHECK(s / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("gamma and inverse-gamma variates match their moments") {
  auto rng = make_stream(2, {1});
  for (double shape : {0.3, 1.0, 4.5, 25.0}) {
    const int n = 200000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = gamma_variate(shape, rng);
      s += x;
      s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    const double se = std::sqrt(shape / n);
    CHECK(std::abs(mean - shape) < 4.0 * se);
    CHECK(var == doctest::Approx(shape).epsilon(0.05));
  }
  const double a = 6.0;
  const double b = 45.0;
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) s += inverse_gamma_variate(a, b, rng);
  const double sd = b / (a - 1.0) / std::sqrt(a - 2.0);
  CHECK(std::abs(s / n - b / (a - 1.0)) < 4.0 * sd / std::sqrt(n));
}

TEST_CASE("log gamma variate handles shapes where the draw underflows") {
  auto rng = make_stream(3, {1});
  const double shape = 1e-3;
  int finite = 0;
  double mean_exp = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double l = log_gamma_variate(shape, rng);
    REQUIRE_FALSE(std::isnan(l));
    if (std::isfinite(l)) ++finite;
    mean_exp += std::exp(l);
  }
  CHECK(finite == n);
  CHECK(std::abs(mean_exp / n - shape) < 4.0 * std::sqrt(shape / n));
}

TEST_CASE("log categorical draws follow the weights and skip -inf") {
  auto rng = make_stream(4, {1});
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> lw{std::log(0.2), ninf, std::log(0.5) + 700.0 - 700.0, std::log(0.3)};
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[sample_log_categorical(lw, rng)];
  CHECK(counts[1] == 0);
  CHECK(std::abs(counts[0] / double(n) - 0.2) < 0.01);
  CHECK(std::abs(counts[2] / double(n) - 0.5) < 0.01);
  std::vector<double> shifted{800.0, 800.0 + std::log(3.0)};
  int second = 0;
  for (int i = 0; i < n; ++i) second += sample_log_categorical(shifted, rng) == 1 ? 1 : 0;
  CHECK(std::abs(second / double(n) - 0.75) < 0.01);
}
