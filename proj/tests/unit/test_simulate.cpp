#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "../support/oracles.hpp"
#include "manyhyp/error.hpp"
#include "manyhyp/simulate.hpp"

using namespace manyhyp;

namespace {

GlobalParams two_state() {
  GlobalParams p;
  p.state_shapes = {10.0, 14.0};
  p.prior_shape = 4.0;
  p.prior_mean_scale = 8.0;
  p.mixture_weights = {0.5, 0.25, 0.25};
  return p;
}

// Posterior shape/scale centre of one group, used to place quadrature windows.
double centre(std::span<const double> x, int n, std::span<const int> states, const GlobalParams& p,
              double& shape) {
  double a = p.prior_shape;
  double b = p.prior_shape * p.prior_mean_scale;
  for (int c : states) {
    const auto i = static_cast<std::size_t>(c - 1);
    a += n * p.state_shapes[i];
    for (int j = 0; j < n; ++j) b += p.state_shapes[i] * x[i * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
  }
  shape = a;
  return std::log(b / a);
}

// log of the integral of observations x 2! InvGamma x InvGamma over
// mu_low < mu_high, by nested Gauss-Kronrod in log space.
double ordered_quadrature(std::span<const double> x, int n, const Hypothesis& h,
                          const GlobalParams& p) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto g = [&](std::size_t m, double t) {
    const double mu = std::exp(t);
    return oracle::log_obs(x, n, h.groups[m], p, mu) +
           log_latent_prior_density(mu, p.prior_shape, p.prior_mean_scale) + t;
  };
  double a0 = 0.0;
  double a1 = 0.0;
  const double c0 = centre(x, n, h.groups[0], p, a0);
  const double c1 = centre(x, n, h.groups[1], p, a1);
  const double peak0 = g(0, c0);
  const double peak1 = g(1, c1);
  const double lo = std::min(c0, c1) - 6.0;
  const double hi = std::max(c0, c1) + 60.0 / std::min(a0, a1) + 6.0;
  auto inner = [&](double t1) {
    auto f = [&](double t2) { return std::exp(g(1, t2) - peak1); };
    return GK::integrate(f, t1, hi, 15, 1e-12);
  };
  auto outer = [&](double t1) { return std::exp(g(0, t1) - peak0) * inner(t1); };
  const double v = GK::integrate(outer, lo, hi, 15, 1e-12);
  return std::log(2.0 * v) + peak0 + peak1;
}

}  // namespace

TEST_CASE("presets are valid mixtures with the documented shape") {
  const GlobalParams t = table3_preset();
  CHECK_NOTHROW(t.validate(75));
  CHECK(t.mixture_weights[0] == doctest::Approx(0.75));
  CHECK(t.state_shapes == std::vector<double>(4, 25.0));
  CHECK(t.prior_shape == 5.0);
  CHECK(t.prior_mean_scale == 9.0);
  const std::vector<int> up{1, 2, 1, 2};
  const std::vector<int> down{2, 1, 2, 1};
  const double w_up = t.mixture_weights[hypothesis_index(up)];
  const double w_down = t.mixture_weights[hypothesis_index(down)];
  CHECK(w_up / w_down == doctest::Approx(0.118 / 0.078));
  CHECK(w_up + w_down == doctest::Approx(0.23));
  const GlobalParams s = strong_preset();
  CHECK_NOTHROW(s.validate(75));
  CHECK(s.mixture_weights[0] == doctest::Approx(0.70));
}

TEST_CASE("generated means respect the assigned hypotheses") {
  auto rng = make_stream(61, {1});
  const GlobalParams p = table3_preset();
  std::vector<std::size_t> z(75);
  std::iota(z.begin(), z.end(), 0);
  const SimulatedData sim = generate_dataset(p, z, 4, rng);
  CHECK(sim.data.num_genes() == 75);
  for (std::size_t g = 0; g < 75; ++g) {
    const std::span<const double> mu(sim.truth.means.data() + 4 * g, 4);
    CHECK(hypothesis_from_means(mu).index == g);
  }
  CHECK(sim.data.gene_ids()[0] == "g00001");
}

TEST_CASE("generation is reproducible from the stream") {
  auto r1 = make_stream(62, {1});
  auto r2 = make_stream(62, {1});
  const auto a = generate_dataset(table3_preset(), 20, 5, r1);
  const auto b = generate_dataset(table3_preset(), 20, 5, r2);
  CHECK(std::vector<double>(a.data.values().begin(), a.data.values().end()) ==
        std::vector<double>(b.data.values().begin(), b.data.values().end()));
  CHECK(a.truth.assignments == b.truth.assignments);
}

TEST_CASE("within-state coefficient of variation is about 1/sqrt(alpha)") {
  auto rng = make_stream(63, {1});
  const auto sim = generate_dataset(table3_preset(), 100, 13, rng);
  for (int i = 0; i < 4; ++i) {
    double total = 0.0;
    for (int g = 0; g < 100; ++g) {
      double m = 0.0;
      double ss = 0.0;
      for (int j = 0; j < 13; ++j) m += sim.data.value(g, i, j);
      m /= 13.0;
      for (int j = 0; j < 13; ++j) ss += std::pow(sim.data.value(g, i, j) - m, 2);
      total += std::sqrt(ss / 12.0) / m;
    }
    CHECK(total / 100.0 == doctest::Approx(0.2).epsilon(0.1));
  }
}

TEST_CASE("exact posterior matches two-dimensional quadrature of the unintegrated model") {
  auto rng = make_stream(64, {1});
  const GlobalParams p = two_state();
  const std::vector<std::size_t> z{0, 1, 2, 1, 0};
  const auto sim = generate_dataset(p, z, 4, rng);
  const auto exact = exact_posterior_small(sim.data, p);
  const auto hyps = enumerate_hypotheses(2);
  for (int g = 0; g < 5; ++g) {
    const auto x = sim.data.gene(g);
    std::vector<double> l{oracle::null_quadrature(x, 4, p), ordered_quadrature(x, 4, hyps[1], p),
                          ordered_quadrature(x, 4, hyps[2], p)};
    double top = *std::max_element(l.begin(), l.end());
    double total = 0.0;
    for (std::size_t h = 0; h < 3; ++h) total += (l[h] = p.mixture_weights[h] * std::exp(l[h] - top));
    for (std::size_t h = 0; h < 3; ++h) {
      CHECK(std::abs(l[h] / total - exact[static_cast<std::size_t>(g) * 3 + h]) < 1e-4);
    }
  }
}

TEST_CASE("exact posterior refuses large instances") {
  auto rng = make_stream(65, {1});
  const auto sim = generate_dataset(table3_preset(), 200, 3, rng);
  CHECK_THROWS_AS(exact_posterior_small(sim.data, table3_preset()), ValidationError);
}

TEST_CASE("realized false discovery proportion") {
  InferenceResult r;
  r.genes = {{1, 0.9, true}, {2, 0.8, true}, {0, 0.6, false}, {3, 0.95, true}};
  const std::vector<std::size_t> truth{1, 5, 3, 3};
  CHECK(realized_fdp(r, truth) == doctest::Approx(1.0 / 3.0));
  for (auto& c : r.genes) c.selected = false;
  CHECK(realized_fdp(r, truth) == 0.0);
}

TEST_CASE("small coverage experiment is reproducible across worker counts") {
  CoverageConfig c;
  c.num_genes = 25;
  c.num_individuals = 5;
  c.num_datasets = 3;
  c.sampler.num_chains = 2;
  c.sampler.num_iterations = 80;
  c.sampler.burn_in = 20;
  c.seed = 5;
  const CoverageReport a = coverage_experiment(c);
  c.workers = 3;
  const CoverageReport b = coverage_experiment(c);
  REQUIRE(a.params.size() == 6);
  for (std::size_t p = 0; p < 6; ++p) {
    CHECK(a.params[p].mean_of_means == b.params[p].mean_of_means);
    CHECK(a.params[p].coverage == b.params[p].coverage);
    CHECK(a.params[p].coverage >= 0.0);
    CHECK(a.params[p].coverage <= 100.0);
  }
  CHECK(a.params[4].name == "alpha_0");
  CHECK(a.params[5].true_value == 9.0);
  CHECK(a.nonnull_mean == b.nonnull_mean);
  CHECK(a.replicates.size() == 3);
}
