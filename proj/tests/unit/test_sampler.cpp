#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "manyhyp/error.hpp"
#include "manyhyp/sampler.hpp"
#include "manyhyp/simulate.hpp"

using namespace manyhyp;

namespace {

GlobalParams flat_params(std::vector<double> alpha, double a0, double mu0) {
  GlobalParams p;
  p.state_shapes = std::move(alpha);
  p.prior_shape = a0;
  p.prior_mean_scale = mu0;
  const auto h = hypothesis_count(p.num_states());
  p.mixture_weights.assign(h, 1.0 / static_cast<double>(h));
  return p;
}

std::vector<double> exact_conditional(std::span<const double> x, int n, const GlobalParams& p) {
  const HypothesisSpace space(p.num_states());
  const CollapsedLikelihood lik(space, p, n);
  const GeneStatsTable stats(x, p.num_states(), n);
  std::vector<double> l(space.size());
  lik.evaluate_all(stats.sums(0), stats.log_sums(0), l);
  double top = -1e300;
  for (std::size_t h = 0; h < l.size(); ++h) {
    l[h] += std::log(p.mixture_weights[h]);
    top = std::max(top, l[h]);
  }
  double total = 0.0;
  for (double& v : l) total += (v = std::exp(v - top));
  for (double& v : l) v /= total;
  return l;
}

ExpressionDataset small_dataset(int genes, std::uint64_t seed) {
  auto rng = make_stream(seed, {1});
  return generate_dataset(table3_preset(), genes, 6, rng).data;
}

SamplerConfig short_config() {
  SamplerConfig c;
  c.num_chains = 2;
  c.num_iterations = 120;
  c.burn_in = 40;
  c.master_seed = 99;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  SamplerConfig c;
  CHECK_NOTHROW(c.validate());
  c.burn_in = c.num_iterations;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SamplerConfig{};
  c.num_chains = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SamplerConfig{};
  c.thinning = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SamplerConfig{};
  c.prior.uniform_upper = -1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("well separated two-state gene is assigned to the increasing pattern") {
  auto rng = make_stream(31, {1});
  const GlobalParams p = flat_params({25.0, 25.0}, 5.0, 9.0);
  std::vector<double> x;
  for (double mu : {5.0, 50.0}) {
    for (int j = 0; j < 10; ++j) x.push_back(mu / 25.0 * gamma_variate(25.0, rng));
  }
  const auto exact = exact_conditional(x, 10, p);
  CHECK(exact[1] > 0.99);
  int hits = 0;
  for (int k = 0; k < 2000; ++k) hits += sample_assignment(x, 10, p, rng) == 1 ? 1 : 0;
  CHECK(hits > 1960);
}

TEST_CASE("identical states favour the null over every single alternative") {
  const GlobalParams p = flat_params({20.0, 20.0, 20.0, 20.0}, 5.0, 9.0);
  auto rng = make_stream(32, {1});
  std::vector<double> row;
  for (int j = 0; j < 40; ++j) row.push_back(9.0 / 20.0 * gamma_variate(20.0, rng));
  std::vector<double> x;
  for (int i = 0; i < 4; ++i) x.insert(x.end(), row.begin(), row.end());
  const auto exact = exact_conditional(x, 40, p);
  for (std::size_t h = 1; h < exact.size(); ++h) CHECK(exact[0] > exact[h]);
}

TEST_CASE("assignment draws follow the exact conditional") {
  auto rng = make_stream(33, {1});
  GlobalParams p = flat_params({6.0, 6.0, 6.0}, 4.0, 9.0);
  std::vector<double> x;
  for (double mu : {8.0, 10.0, 9.0}) {
    for (int j = 0; j < 3; ++j) x.push_back(mu / 6.0 * gamma_variate(6.0, rng));
  }
  const auto exact = exact_conditional(x, 3, p);
  std::vector<int> counts(exact.size(), 0);
  const int n = 40000;
  for (int k = 0; k < n; ++k) ++counts[sample_assignment(x, 3, p, rng)];
  for (std::size_t h = 0; h < exact.size(); ++h) {
    const double se = std::sqrt(exact[h] * (1.0 - exact[h]) / n);
    CHECK(std::abs(counts[h] / double(n) - exact[h]) < 4.0 * se + 1e-9);
  }
}

TEST_CASE("Dirichlet conditional of the mixture weights") {
  auto rng = make_stream(34, {1});
  const std::vector<std::uint64_t> counts{1, 1};
  // counts (1, 1) with omega = 1: first component ~ Beta(2, 2), mean 1/2, var 1/20.
  double s = 0.0;
  double s2 = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const auto w = sample_mixture_weights(counts, 1.0, rng);
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-14));
    s += w[0];
    s2 += w[0] * w[0];
  }
  CHECK(std::abs(s / n - 0.5) < 4.0 * std::sqrt(0.05 / n));
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(0.05).epsilon(0.05));
  const std::vector<std::uint64_t> sparse(75, 0);
  const auto lw = sample_log_mixture_weights(sparse, 0.001, rng);
  double total = 0.0;
  for (double v : lw) {
    CHECK(std::isfinite(v));
    total += std::exp(v);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(sample_log_mixture_weights(counts, 0.0, rng), ValidationError);
}

TEST_CASE("Metropolis step with zero proposal scale always accepts") {
  const auto data = small_dataset(10, 35);
  const HypothesisSpace space(4);
  const GeneStatsTable stats(data);
  SamplerConfig config = short_config();
  ChainState state;
  state.params = initial_params(data, space.size(), config.prior);
  state.assignments.assign(10, 0);
  state.mh_step_sizes.assign(6, 0.0);
  const double ll =
      assignment_log_likelihood(state.params, stats, space, state.assignments, config.order_options());
  auto rng = make_stream(1, {2});
  for (int id = 0; id < 6; ++id) {
    const MhResult r = mh_update_global(id, state, stats, space, config, ll, rng);
    CHECK(r.accepted);
    CHECK(r.log_likelihood == ll);
  }
}

TEST_CASE("Metropolis proposals beyond the uniform bound are rejected") {
  const auto data = small_dataset(10, 36);
  const HypothesisSpace space(4);
  const GeneStatsTable stats(data);
  SamplerConfig config = short_config();
  ChainState state;
  state.params = initial_params(data, space.size(), config.prior);
  config.prior.uniform_upper = state.params.prior_shape * 1.001;
  state.params.prior_mean_scale = std::min(state.params.prior_mean_scale, 1.0);
  state.assignments.assign(10, 0);
  state.mh_step_sizes.assign(6, 2.0);
  double ll =
      assignment_log_likelihood(state.params, stats, space, state.assignments, config.order_options());
  auto rng = make_stream(1, {3});
  for (int k = 0; k < 200; ++k) {
    const MhResult r = mh_update_global(4, state, stats, space, config, ll, rng);
    ll = r.log_likelihood;
    CHECK(state.params.prior_shape < config.prior.uniform_upper);
  }
}

TEST_CASE("initial parameters are data driven and valid") {
  const auto data = small_dataset(50, 37);
  const GlobalParams p = initial_params(data, 75, PriorConfig{});
  CHECK_NOTHROW(p.validate(75));
  CHECK(p.mixture_weights[0] == doctest::Approx(0.75));
  for (double a : p.state_shapes) CHECK(a > 5.0);
  CHECK(p.prior_shape == 2.0);
}

TEST_CASE("chains are reproducible and independent of the worker count") {
  const auto data = small_dataset(30, 38);
  SamplerConfig c = short_config();
  const ChainsResult a = run_chains(data, c);
  c.workers = 3;
  const ChainsResult b = run_chains(data, c);
  REQUIRE(a.traces.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(a.traces[k].globals == b.traces[k].globals);
    CHECK(a.traces[k].weights == b.traces[k].weights);
    CHECK(a.traces[k].visits == b.traces[k].visits);
    CHECK(a.traces[k].iterations == b.traces[k].iterations);
    CHECK(a.traces[k].acceptance_rates == b.traces[k].acceptance_rates);
  }
  CHECK(a.traces[0].globals != a.traces[1].globals);
  CHECK(a.traces[0].num_retained() == 80);
  CHECK(a.convergence.available);
  CHECK(a.convergence.names.size() == 6);
}

TEST_CASE("thinning, retention and visit totals") {
  const auto data = small_dataset(12, 39);
  SamplerConfig c = short_config();
  c.num_chains = 1;
  c.thinning = 4;
  const ChainsResult r = run_chains(data, c);
  const TraceSet& t = r.traces[0];
  CHECK(t.num_retained() == 20);
  CHECK(t.iterations.front() == 44);
  for (std::size_t g = 0; g < t.num_genes; ++g) {
    std::uint64_t total = 0;
    for (std::size_t h = 0; h < t.num_hypotheses; ++h) total += t.visit(g, h);
    CHECK(total == 20);
  }
  CHECK_FALSE(r.convergence.available);
  CHECK_FALSE(r.convergence.converged());
}

TEST_CASE("frozen parameters and fixed weights stay at their starting values") {
  const auto data = small_dataset(12, 40);
  SamplerConfig c = short_config();
  c.num_chains = 1;
  GlobalParams start = initial_params(data, 75, c.prior);
  c.initial_params = start;
  c.update_mixture_weights = false;
  c.frozen_params = {0, 1, 2, 3};
  const TraceSet t = run_chain(data, c, 0);
  for (std::size_t d = 0; d < t.num_retained(); ++d) {
    for (std::size_t p = 0; p < 4; ++p) CHECK(t.global(d, p) == start.state_shapes[p]);
    CHECK(t.weight(d, 0) == start.mixture_weights[0]);
  }
  bool moved = false;
  for (std::size_t d = 0; d < t.num_retained(); ++d) moved |= t.global(d, 5) != start.prior_mean_scale;
  CHECK(moved);
  c.frozen_params = {6};
  CHECK_THROWS_AS(run_chain(data, c, 0), ValidationError);
}

TEST_CASE("split potential scale reduction flags disagreeing chains") {
  TraceSet a;
  a.num_states = 1;
  a.num_hypotheses = 1;
  TraceSet b = a;
  for (int d = 0; d < 100; ++d) {
    a.iterations.push_back(d);
    b.iterations.push_back(d);
    const double wiggle = std::sin(d * 1.7);
    for (std::size_t p = 0; p < 3; ++p) {
      a.globals.push_back(1.0 + wiggle);
      b.globals.push_back(p == 2 ? 50.0 + wiggle : 1.0 - wiggle);
    }
  }
  std::vector<TraceSet> both{a, b};
  const ConvergenceReport r = convergence_report(both);
  REQUIRE(r.available);
  CHECK(r.rhat[0] < 1.1);
  CHECK(r.rhat[2] > 1.1);
  CHECK_FALSE(r.converged());
}

TEST_CASE("mu_0 draws follow its marginal posterior with the shapes and weights held") {
  GlobalParams truth = flat_params({25.0, 25.0}, 5.0, 9.0);
  truth.mixture_weights = {0.6, 0.2, 0.2};
  auto rng = make_stream(91, {1});
  const auto sim = generate_dataset(truth, 20, 6, rng);

  SamplerConfig c;
  c.num_chains = 1;
  c.burn_in = 2000;
  c.num_iterations = 52000;
  c.master_seed = 91;
  c.initial_params = truth;
  c.update_mixture_weights = false;
  c.frozen_params = {0, 1};
  const auto trace = run_chain(sim.data, c, 0);
  std::vector<double> mu;
  for (std::size_t d = 0; d < trace.num_retained(); ++d) mu.push_back(trace.global(d, 3));
  std::sort(mu.begin(), mu.end());

  // Grid posterior over (alpha_0, mu_0) with Z summed out; flat priors.
  const GeneStatsTable stats(sim.data);
  const HypothesisSpace space(2);
  double a_hi = 0.0;
  for (std::size_t d = 0; d < trace.num_retained(); ++d) a_hi = std::max(a_hi, trace.global(d, 2));
  const int na = 160;
  const int nm = 240;
  const double a_lo_g = 1e-3;
  const double a_hi_g = 1.5 * a_hi;
  const double m_lo = 0.5 * mu.front();
  const double m_hi = 1.5 * mu.back();
  std::vector<double> logpost(static_cast<std::size_t>(na * nm));
  std::vector<double> l(space.size());
  double top = -1e300;
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nm; ++j) {
      GlobalParams p = truth;
      p.prior_shape = a_lo_g + (a_hi_g - a_lo_g) * (i + 0.5) / na;
      p.prior_mean_scale = m_lo + (m_hi - m_lo) * (j + 0.5) / nm;
      const CollapsedLikelihood lik(space, p, 6);
      double total = 0.0;
      for (int g = 0; g < 20; ++g) {
        lik.evaluate_all(stats.sums(g), stats.log_sums(g), l);
        double mx = -1e300;
        for (std::size_t h = 0; h < l.size(); ++h) {
          l[h] += std::log(p.mixture_weights[h]);
          mx = std::max(mx, l[h]);
        }
        double s = 0.0;
        for (double v : l) s += std::exp(v - mx);
        total += mx + std::log(s);
      }
      logpost[static_cast<std::size_t>(i * nm + j)] = total;
      top = std::max(top, total);
    }
  }
  std::vector<double> marginal(static_cast<std::size_t>(nm), 0.0);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nm; ++j) {
      marginal[static_cast<std::size_t>(j)] += std::exp(logpost[static_cast<std::size_t>(i * nm + j)] - top);
    }
  }
  const double z = std::accumulate(marginal.begin(), marginal.end(), 0.0);
  // Wasserstein-1 distance between the draw CDF and the grid CDF.
  const double dm = (m_hi - m_lo) / nm;
  double w1 = 0.0;
  double cdf = 0.0;
  for (int j = 0; j < nm; ++j) {
    const double edge = m_lo + dm * (j + 1);
    cdf += marginal[static_cast<std::size_t>(j)] / z;
    const double emp = static_cast<double>(std::upper_bound(mu.begin(), mu.end(), edge) - mu.begin()) /
                       static_cast<double>(mu.size());
    w1 += std::abs(emp - cdf) * dm;
  }
  CHECK(marginal.front() / z < 1e-6);
  CHECK(marginal.back() / z < 1e-6);
  CHECK(w1 < 0.1);
  MESSAGE("W1 = " << w1);
}
