#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "manyhyp/error.hpp"
#include "manyhyp/inference.hpp"
#include "manyhyp/rng.hpp"

using namespace manyhyp;

namespace {

PosteriorSummary from_rows(const std::vector<std::vector<double>>& rows) {
  PosteriorSummary s;
  s.num_genes = rows.size();
  s.num_hypotheses = rows.at(0).size();
  for (const auto& r : rows) s.probs.insert(s.probs.end(), r.begin(), r.end());
  return s;
}

PosteriorSummary random_summary(RngStream& rng, std::size_t genes, std::size_t h) {
  std::vector<std::vector<double>> rows;
  for (std::size_t g = 0; g < genes; ++g) {
    std::vector<double> r(h);
    double total = 0.0;
    const double conc = 0.2 + 3.0 * uniform01(rng);
    for (double& v : r) total += (v = gamma_variate(conc, rng));
    for (double& v : r) v /= total;
    rows.push_back(r);
  }
  return from_rows(rows);
}

TraceSet trace_with_visits(std::size_t genes, std::size_t h, std::vector<std::uint64_t> visits,
                           std::size_t draws) {
  TraceSet t;
  t.num_states = 2;
  t.num_genes = genes;
  t.num_hypotheses = h;
  t.visits = std::move(visits);
  for (std::size_t d = 0; d < draws; ++d) {
    t.iterations.push_back(static_cast<std::int64_t>(d));
    for (std::size_t p = 0; p < 4; ++p) t.globals.push_back(static_cast<double>(d + p));
    for (std::size_t k = 0; k < h; ++k) t.weights.push_back(1.0 / static_cast<double>(h));
  }
  return t;
}

}  // namespace

TEST_CASE("modal hypothesis breaks ties to the smaller index") {
  const std::vector<double> row{0.2, 0.4, 0.4};
  CHECK(modal_hypothesis(row) == std::pair<std::size_t, double>{1, 0.4});
  auto rng = make_stream(51, {1});
  const auto s = random_summary(rng, 500, 7);
  for (std::size_t g = 0; g < s.num_genes; ++g) {
    const auto r = s.row(g);
    std::size_t best = 0;
    for (std::size_t h = 0; h < r.size(); ++h) {
      if (r[h] > r[best]) best = h;
    }
    CHECK(modal_hypothesis(r).first == best);
  }
  CHECK_THROWS_AS(modal_hypothesis(std::span<const double>{}), ValidationError);
}

TEST_CASE("many-hypotheses estimate on the three-gene example") {
  const auto s = from_rows({{0.1, 0.9, 0.0}, {0.3, 0.0, 0.7}, {0.5, 0.5, 0.0}});
  const FdrResult r = fdr_many_hypotheses(s, 0.645);
  CHECK(r.selected == std::vector<std::size_t>{0, 1});
  CHECK(r.fdr == 0.2);
  CHECK(fdr_many_hypotheses(s, 0.95).selected.empty());
  CHECK(fdr_many_hypotheses(s, 0.95).fdr == 0.0);
  CHECK_THROWS_AS(fdr_many_hypotheses(s, 1.0), ValidationError);
  CHECK_THROWS_AS(fdr_many_hypotheses(s, 0.0), ValidationError);
}

TEST_CASE("null-versus-nonnull estimate") {
  const auto s = from_rows({{0.3, 0.4, 0.3}});
  const FdrResult r = fdr_null_vs_nonnull(s, 0.6);
  CHECK(r.selected == std::vector<std::size_t>{0});
  CHECK(r.fdr == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(fdr_null_vs_nonnull(s, 0.75).selected.empty());
}

TEST_CASE("estimates and selections are monotone in k") {
  auto rng = make_stream(52, {1});
  for (int rep = 0; rep < 100; ++rep) {
    const auto s = random_summary(rng, 60, 5);
    FdrResult prev = fdr_many_hypotheses(s, 0.01);
    FdrResult prev_nn = fdr_null_vs_nonnull(s, 0.01);
    for (int i = 2; i < 100; ++i) {
      const double k = i * 0.01;
      const FdrResult cur = fdr_many_hypotheses(s, k);
      const FdrResult cur_nn = fdr_null_vs_nonnull(s, k);
      CHECK(cur.fdr <= prev.fdr);
      CHECK(std::includes(prev.selected.begin(), prev.selected.end(), cur.selected.begin(),
                          cur.selected.end()));
      CHECK(std::includes(prev_nn.selected.begin(), prev_nn.selected.end(),
                          cur_nn.selected.begin(), cur_nn.selected.end()));
      prev = cur;
      prev_nn = cur_nn;
    }
  }
}

TEST_CASE("modal error dominates the null probability") {
  auto rng = make_stream(53, {1});
  const auto s = random_summary(rng, 1000, 6);
  for (std::size_t g = 0; g < s.num_genes; ++g) {
    const auto [h, p] = modal_hypothesis(s.row(g));
    if (h != 0) CHECK(1.0 - p >= s.prob(g, 0));
  }
}

TEST_CASE("calibration picks the smallest admissible threshold") {
  auto rng = make_stream(54, {1});
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = random_summary(rng, 200, 4);
    const InferenceResult r = calibrate_threshold(s, 0.1, 0.01);
    REQUIRE(r.curve.size() == 99);
    for (std::size_t i = 1; i < r.curve.size(); ++i) CHECK(r.curve[i].fdr <= r.curve[i - 1].fdr);
    if (!r.warning) {
      std::size_t chosen = 0;
      while (r.curve[chosen].k != r.threshold) ++chosen;
      CHECK(r.curve[chosen].fdr <= 0.1);
      CHECK(r.curve[chosen].num_selected > 0);
      for (std::size_t i = 0; i < chosen; ++i) {
        CHECK((r.curve[i].fdr > 0.1 || r.curve[i].num_selected == 0));
      }
      CHECK(r.num_selected() == r.curve[chosen].num_selected);
    }
    for (std::size_t g = 0; g < r.genes.size(); ++g) {
      if (!r.genes[g].selected) continue;
      CHECK(r.genes[g].modal_index != 0);
      CHECK(r.genes[g].modal_probability >= r.threshold);
    }
  }
}

TEST_CASE("unreachable target sets the warning and selects nothing") {
  const auto s = from_rows({{0.1, 0.9, 0.0}, {0.3, 0.0, 0.7}, {0.5, 0.5, 0.0}});
  const InferenceResult r = calibrate_threshold(s, 0.05);
  CHECK(r.warning);
  CHECK(r.num_selected() == 0);
  CHECK(r.curve.size() == 999);
  CHECK(r.threshold == doctest::Approx(0.901));
  const InferenceResult ok = calibrate_threshold(s, 0.2);
  CHECK_FALSE(ok.warning);
  CHECK(ok.threshold == doctest::Approx(0.001));
  CHECK(ok.num_selected() == 2);
  CHECK_THROWS_AS(calibrate_threshold(s, 0.05, 0.02), ValidationError);
  CHECK_THROWS_AS(calibrate_threshold(s, 1.5), ValidationError);
}

TEST_CASE("collapsing sums member probabilities") {
  // Columns: null, pattern A, pattern B, other.
  auto s = from_rows({{0.35, 0.30, 0.35, 0.0}, {0.2, 0.1, 0.1, 0.6}});
  s.phi_means = {0.7, 0.1, 0.1, 0.1};
  const std::vector<HypothesisGroupLabel> groups{
      {"C0", "", {0}}, {"C1", "", {1, 2}}, {"rest", "", {3}}};
  const PosteriorSummary c = collapse_summary(s, groups);
  CHECK(c.num_hypotheses == 3);
  CHECK(c.prob(0, 1) == doctest::Approx(0.65));
  CHECK(modal_hypothesis(c.row(0)).first == 1);
  CHECK(c.phi_means[1] == doctest::Approx(0.2));
  CHECK(c.column_labels == std::vector<std::string>{"C0", "C1", "rest"});
  CHECK_NOTHROW(c.validate());

  const std::vector<HypothesisGroupLabel> overlap{{"a", "", {0, 1}}, {"b", "", {1, 2, 3}}};
  CHECK_THROWS_WITH_AS(collapse_summary(s, overlap), doctest::Contains("overlapping groups"),
                       ValidationError);
  const std::vector<HypothesisGroupLabel> partial{{"a", "", {0, 1}}, {"b", "", {2}}};
  CHECK_THROWS_AS(collapse_summary(s, partial), ValidationError);
}

TEST_CASE("collapsing never lowers the best nonnull probability") {
  auto rng = make_stream(55, {1});
  const auto s = random_summary(rng, 300, 6);
  const std::vector<HypothesisGroupLabel> groups{
      {"null", "", {0}}, {"x", "", {1, 4}}, {"y", "", {2, 3, 5}}};
  const auto c = collapse_summary(s, groups);
  for (std::size_t g = 0; g < s.num_genes; ++g) {
    const auto [h, p] = modal_hypothesis(s.row(g));
    if (h == 0) continue;
    double best = 0.0;
    for (std::size_t k = 1; k < c.num_hypotheses; ++k) best = std::max(best, c.prob(g, k));
    CHECK(best >= p);
  }
}

TEST_CASE("pooling half-length traces equals pooling the whole") {
  const std::vector<std::uint64_t> v1{3, 1, 0, 2, 2, 0};
  const std::vector<std::uint64_t> v2{1, 1, 2, 0, 4, 0};
  const auto a = trace_with_visits(2, 3, v1, 4);
  const auto b = trace_with_visits(2, 3, v2, 4);
  std::vector<std::uint64_t> sum(6);
  for (std::size_t i = 0; i < 6; ++i) sum[i] = v1[i] + v2[i];
  const auto whole = trace_with_visits(2, 3, sum, 8);
  const std::vector<TraceSet> halves{a, b};
  const std::vector<TraceSet> one{whole};
  const auto ps = summarize(halves);
  const auto pw = summarize(one);
  CHECK(ps.probs == pw.probs);
  CHECK(ps.num_draws == 8);
  CHECK(ps.prob(0, 0) == 0.5);
  CHECK(ps.phi_means == pw.phi_means);
  CHECK(ps.param_names.size() == 4);
  CHECK(ps.param_quantiles[0][1] == doctest::Approx(1.5));
  CHECK_THROWS_AS(summarize(std::span<const TraceSet>{}), ValidationError);
}

TEST_CASE("quantiles interpolate between order statistics") {
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == 2.5);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.025) == doctest::Approx(1.1));
  CHECK(quantile({7.0}, 0.975) == 7.0);
  CHECK_THROWS_AS(quantile({}, 0.5), ValidationError);
}
