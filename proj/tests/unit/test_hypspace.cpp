#include <doctest.h>

#include <algorithm>
#include <set>

#include "manyhyp/error.hpp"
#include "manyhyp/hypspace.hpp"

using namespace manyhyp;

namespace {

// Ordered Bell numbers from a(n) = sum_k C(n,k) a(n-k).
std::uint64_t fubini(int n) {
  std::vector<std::uint64_t> a(static_cast<std::size_t>(n) + 1, 0);
  a[0] = 1;
  for (int m = 1; m <= n; ++m) {
    std::uint64_t binom = 1;
    for (int k = 1; k <= m; ++k) {
      binom = binom * static_cast<std::uint64_t>(m - k + 1) / static_cast<std::uint64_t>(k);
      a[static_cast<std::size_t>(m)] += binom * a[static_cast<std::size_t>(m - k)];
    }
  }
  return a[static_cast<std::size_t>(n)];
}

Hypothesis from(std::initializer_list<double> means) {
  std::vector<double> m(means);
  return hypothesis_from_means(m);
}

}  // namespace

TEST_CASE("enumeration sizes follow the ordered Bell numbers") {
  CHECK(enumerate_hypotheses(1).size() == 1);
  CHECK(enumerate_hypotheses(2).size() == 3);
  CHECK(enumerate_hypotheses(3).size() == 13);
  CHECK(enumerate_hypotheses(4).size() == 75);
  CHECK(enumerate_hypotheses(5).size() == 541);
  for (int s = 1; s <= 6; ++s) {
    CHECK(enumerate_hypotheses(s).size() == fubini(s));
    CHECK(hypothesis_count(s) == fubini(s));
  }
  CHECK(hypothesis_count(8) == fubini(8));
}

TEST_CASE("state counts outside 1..8 are rejected") {
  CHECK_THROWS_AS(enumerate_hypotheses(0), ValidationError);
  CHECK_THROWS_AS(enumerate_hypotheses(9), ValidationError);
  CHECK_THROWS_WITH_AS(enumerate_hypotheses(0), doctest::Contains("unsupported state count"),
                       ValidationError);
}

TEST_CASE("enumeration order is canonical and indices are dense") {
  for (int s = 1; s <= 5; ++s) {
    const auto hyps = enumerate_hypotheses(s);
    CHECK(hyps[0].is_null());
    CHECK(hyps == enumerate_hypotheses(s));
    std::set<std::vector<int>> seen;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      CHECK(hyps[i].index == i);
      const auto r = hyps[i].group_ranks();
      CHECK(seen.insert(r).second);
      CHECK(hypothesis_index(r) == i);
      if (i > 0) {
        const auto prev = hyps[i - 1].group_ranks();
        const bool ordered = hyps[i - 1].num_groups() < hyps[i].num_groups() ||
                             (hyps[i - 1].num_groups() == hyps[i].num_groups() && prev < r);
        CHECK(ordered);
      }
    }
  }
}

TEST_CASE("two-state space is null, increasing, decreasing") {
  const auto h = enumerate_hypotheses(2);
  CHECK(h[0].pattern() == "mu1=mu2");
  CHECK(h[1].pattern() == "mu1<mu2");
  CHECK(h[2].pattern() == "mu2<mu1");
}

TEST_CASE("hypothesis_from_means recovers tie and order structure") {
  const auto all_equal = from({5, 5, 5, 5});
  CHECK(all_equal.index == 0);
  CHECK(all_equal.groups == std::vector<std::vector<int>>{{1, 2, 3, 4}});

  const auto circ = from({1, 2, 1, 2});
  CHECK(circ.groups == std::vector<std::vector<int>>{{1, 3}, {2, 4}});
  CHECK(circ.pattern() == "mu1=mu3<mu2=mu4");

  const auto other = from({3, 2, 3, 1});
  CHECK(other.groups == std::vector<std::vector<int>>{{4}, {2}, {1, 3}});
  CHECK(other.pattern() == "mu4<mu2<mu1=mu3");
}

TEST_CASE("tolerance ties and ambiguous chains") {
  std::vector<double> close{1.0, 1.0005, 2.0};
  CHECK(hypothesis_from_means(close, 1e-3).groups ==
        std::vector<std::vector<int>>{{1, 2}, {3}});
  CHECK(hypothesis_from_means(close, 0.0).num_groups() == 3);
  std::vector<double> chain{1.0, 1.009, 1.018};
  CHECK_THROWS_WITH_AS(hypothesis_from_means(chain, 0.01),
                       doctest::Contains("ambiguous tie structure"), ValidationError);
  std::vector<double> bad{1.0, -1.0};
  CHECK_THROWS_AS(hypothesis_from_means(bad), ValidationError);
}

TEST_CASE("every hypothesis round-trips through a group-respecting mean vector") {
  for (int s = 1; s <= 5; ++s) {
    for (const auto& h : enumerate_hypotheses(s)) {
      std::vector<double> means(static_cast<std::size_t>(s));
      const auto r = h.group_ranks();
      for (int i = 0; i < s; ++i) means[static_cast<std::size_t>(i)] = 3.0 * r[static_cast<std::size_t>(i)] + 0.5;
      CHECK(hypothesis_from_means(means) == h);
      CHECK(hypothesis_from_ranks(r) == h);
    }
  }
}

TEST_CASE("partition view covers every hypothesis exactly once") {
  for (int s = 1; s <= 5; ++s) {
    const HypothesisSpace space(s);
    std::vector<int> hits(space.size(), 0);
    for (const auto& p : space.partitions()) {
      std::size_t fact = 1;
      for (std::size_t k = 2; k <= p.blocks.size(); ++k) fact *= k;
      CHECK(p.hypothesis_for_order.size() == fact);
      for (std::size_t h : p.hypothesis_for_order) ++hits[h];
    }
    CHECK(std::all_of(hits.begin(), hits.end(), [](int c) { return c == 1; }));
    for (std::size_t h = 0; h < space.size(); ++h) {
      const auto& part = space.partitions()[space.partition_of(h)];
      const auto order = space.block_order(h);
      std::vector<int> perm(order.begin(), order.end());
      CHECK(part.hypothesis_for_order[permutation_rank(perm)] == h);
      for (std::size_t m = 0; m < order.size(); ++m) {
        CHECK(part.blocks[static_cast<std::size_t>(order[m])] == space[h].groups[m]);
      }
    }
  }
}

TEST_CASE("paired grouping of four states") {
  const auto hyps = enumerate_hypotheses(4);
  const auto preds = table2_predicates();
  const auto groups = collapse_by_predicate(hyps, preds);
  REQUIRE(groups.size() == 5);
  CHECK(groups[0].label == "C0");
  CHECK(groups[0].members == std::vector<std::size_t>{0});
  CHECK(groups[1].members.size() == 2);
  CHECK(groups[2].members.size() == 10);
  CHECK(groups[3].members.size() == 10);
  CHECK(groups[4].label == kResidualLabel);
  std::vector<int> owner(hyps.size(), 0);
  for (const auto& g : groups) {
    for (std::size_t m : g.members) ++owner[m];
  }
  CHECK(std::all_of(owner.begin(), owner.end(), [](int c) { return c == 1; }));
  for (std::size_t m : groups[1].members) {
    const auto& h = hyps[m];
    CHECK(h.num_groups() == 2);
    CHECK(h.same_group(1, 3));
    CHECK(h.same_group(2, 4));
  }
  for (std::size_t m : groups[2].members) {
    CHECK_FALSE(hyps[m].same_group(1, 2));
    CHECK(hyps[m].same_group(3, 4));
  }
}

TEST_CASE("collapse edge cases") {
  const auto hyps = enumerate_hypotheses(4);
  const auto all = collapse_by_predicate(hyps, {});
  REQUIRE(all.size() == 1);
  CHECK(all[0].members.size() == 75);
  std::vector<HypothesisPredicate> overlap{
      {"a", "", [](const Hypothesis& h) { return h.num_groups() <= 2; }},
      {"b", "", [](const Hypothesis& h) { return h.num_groups() >= 2; }}};
  CHECK_THROWS_WITH_AS(collapse_by_predicate(hyps, overlap), doctest::Contains("overlapping groups"),
                       ValidationError);
}
