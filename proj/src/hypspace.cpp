#include "manyhyp/hypspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "manyhyp/error.hpp"

namespace manyhyp {

namespace {

void check_state_count(int num_states) {
  if (num_states < 1 || num_states > kMaxStates) {
    throw ValidationError(fmt::format("unsupported state count: {} (expected 1..{})", num_states,
                                      kMaxStates));
  }
}

std::int64_t int_pow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Functions from `free_positions` slots onto {1..num_values} that hit every
// one of `missing` designated values.
std::int64_t covering_count(int free_positions, int num_values, int missing) {
  std::int64_t total = 0;
  for (int i = 0; i <= missing; ++i) {
    const std::int64_t term = binomial(missing, i) * int_pow(num_values - i, free_positions);
    total += (i % 2 == 0) ? term : -term;
  }
  return total;
}

std::int64_t surjection_count(int n, int m) { return covering_count(n, m, m); }

Hypothesis from_ranks_unchecked(std::span<const int> ranks, std::size_t index) {
  const int m = *std::max_element(ranks.begin(), ranks.end());
  Hypothesis h;
  h.index = index;
  h.groups.resize(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    h.groups[static_cast<std::size_t>(ranks[i] - 1)].push_back(static_cast<int>(i) + 1);
  }
  return h;
}

void validate_ranks(std::span<const int> ranks) {
  check_state_count(static_cast<int>(ranks.size()));
  const int m = *std::max_element(ranks.begin(), ranks.end());
  std::vector<bool> seen(static_cast<std::size_t>(m) + 1, false);
  for (int r : ranks) {
    if (r < 1) throw ValidationError("group ranks must be positive");
    seen[static_cast<std::size_t>(r)] = true;
  }
  for (int v = 1; v <= m; ++v) {
    if (!seen[static_cast<std::size_t>(v)]) {
      throw ValidationError("group ranks must cover 1..M without gaps");
    }
  }
}

// Depth-first generation of surjective rank vectors onto {1..m} in
// lexicographic order.
void generate_surjections(int m, std::vector<int>& ranks, std::size_t pos,
                          std::vector<int>& uses, std::vector<Hypothesis>& out) {
  const int n = static_cast<int>(ranks.size());
  int missing = 0;
  for (int v = 1; v <= m; ++v) missing += uses[static_cast<std::size_t>(v)] == 0 ? 1 : 0;
  if (missing > n - static_cast<int>(pos)) return;
  if (pos == ranks.size()) {
    out.push_back(from_ranks_unchecked(ranks, out.size()));
    return;
  }
  for (int v = 1; v <= m; ++v) {
    ranks[pos] = v;
    ++uses[static_cast<std::size_t>(v)];
    generate_surjections(m, ranks, pos + 1, uses, out);
    --uses[static_cast<std::size_t>(v)];
  }
}

}  // namespace

int Hypothesis::num_states() const {
  int n = 0;
  for (const auto& g : groups) n += static_cast<int>(g.size());
  return n;
}

std::vector<int> Hypothesis::group_ranks() const {
  std::vector<int> ranks(static_cast<std::size_t>(num_states()), 0);
  for (std::size_t m = 0; m < groups.size(); ++m) {
    for (int s : groups[m]) ranks[static_cast<std::size_t>(s - 1)] = static_cast<int>(m) + 1;
  }
  return ranks;
}

bool Hypothesis::same_group(int state_a, int state_b) const {
  for (const auto& g : groups) {
    const bool has_a = std::find(g.begin(), g.end(), state_a) != g.end();
    const bool has_b = std::find(g.begin(), g.end(), state_b) != g.end();
    if (has_a || has_b) return has_a && has_b;
  }
  return false;
}

std::string Hypothesis::pattern() const {
  std::string out;
  for (std::size_t m = 0; m < groups.size(); ++m) {
    if (m > 0) out += '<';
    for (std::size_t k = 0; k < groups[m].size(); ++k) {
      if (k > 0) out += '=';
      out += fmt::format("mu{}", groups[m][k]);
    }
  }
  return out;
}

std::string Hypothesis::group_string() const {
  std::string out;
  for (const auto& g : groups) {
    out += '(';
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (k > 0) out += ',';
      out += std::to_string(g[k]);
    }
    out += ')';
  }
  return out;
}

std::uint64_t hypothesis_count(int num_states) {
  check_state_count(num_states);
  std::int64_t total = 0;
  for (int m = 1; m <= num_states; ++m) total += surjection_count(num_states, m);
  return static_cast<std::uint64_t>(total);
}

std::vector<Hypothesis> enumerate_hypotheses(int num_states) {
  check_state_count(num_states);
  std::vector<Hypothesis> out;
  out.reserve(hypothesis_count(num_states));
  std::vector<int> ranks(static_cast<std::size_t>(num_states), 0);
  for (int m = 1; m <= num_states; ++m) {
    std::vector<int> uses(static_cast<std::size_t>(m) + 1, 0);
    generate_surjections(m, ranks, 0, uses, out);
  }
  return out;
}

std::size_t hypothesis_index(std::span<const int> group_ranks) {
  validate_ranks(group_ranks);
  const int n = static_cast<int>(group_ranks.size());
  const int m = *std::max_element(group_ranks.begin(), group_ranks.end());

  std::int64_t index = 0;
  for (int k = 1; k < m; ++k) index += surjection_count(n, k);

  std::vector<int> uses(static_cast<std::size_t>(m) + 1, 0);
  for (int pos = 0; pos < n; ++pos) {
    const int actual = group_ranks[static_cast<std::size_t>(pos)];
    for (int v = 1; v < actual; ++v) {
      ++uses[static_cast<std::size_t>(v)];
      int missing = 0;
      for (int w = 1; w <= m; ++w) missing += uses[static_cast<std::size_t>(w)] == 0 ? 1 : 0;
      index += covering_count(n - pos - 1, m, missing);
      --uses[static_cast<std::size_t>(v)];
    }
    ++uses[static_cast<std::size_t>(actual)];
  }
  return static_cast<std::size_t>(index);
}

Hypothesis hypothesis_from_ranks(std::span<const int> group_ranks) {
  const std::size_t index = hypothesis_index(group_ranks);
  return from_ranks_unchecked(group_ranks, index);
}

Hypothesis hypothesis_from_means(std::span<const double> means, double rel_tolerance) {
  if (means.empty()) throw ValidationError("hypothesis_from_means: empty mean vector");
  if (!(rel_tolerance >= 0.0)) throw ValidationError("hypothesis_from_means: negative tolerance");
  for (double m : means) {
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw ValidationError("hypothesis_from_means: means must be positive and finite");
    }
  }
  check_state_count(static_cast<int>(means.size()));

  auto ties = [&](double a, double b) {
    return std::abs(a - b) <= rel_tolerance * std::max(a, b);
  };

  std::vector<int> order(means.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return means[static_cast<std::size_t>(a)] <
                                              means[static_cast<std::size_t>(b)]; });

  // Chain neighbours in sorted order; every pair inside a chain must tie.
  std::vector<int> ranks(means.size(), 0);
  int rank = 0;
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    while (end < order.size() && ties(means[static_cast<std::size_t>(order[end - 1])],
                                      means[static_cast<std::size_t>(order[end])])) {
      ++end;
    }
    ++rank;
    for (std::size_t a = start; a < end; ++a) {
      for (std::size_t b = a + 1; b < end; ++b) {
        if (!ties(means[static_cast<std::size_t>(order[a])],
                  means[static_cast<std::size_t>(order[b])])) {
          throw ValidationError("ambiguous tie structure");
        }
      }
      ranks[static_cast<std::size_t>(order[a])] = rank;
    }
    start = end;
  }
  return hypothesis_from_ranks(ranks);
}

std::size_t permutation_rank(std::span<const int> permutation) {
  const std::size_t n = permutation.size();
  std::size_t rank = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t smaller = 0;
    for (std::size_t j = i + 1; j < n; ++j) smaller += permutation[j] < permutation[i] ? 1 : 0;
    std::size_t fact = 1;
    for (std::size_t k = 2; k < n - i; ++k) fact *= k;
    rank += smaller * fact;
  }
  return rank;
}

HypothesisSpace::HypothesisSpace(int num_states)
    : num_states_(num_states), hypotheses_(enumerate_hypotheses(num_states)) {
  std::map<std::vector<std::vector<int>>, std::size_t> lookup;
  partition_of_.resize(hypotheses_.size());
  block_order_.resize(hypotheses_.size());

  for (const auto& h : hypotheses_) {
    auto blocks = h.groups;
    std::sort(blocks.begin(), blocks.end());  // groups are sorted, so this orders by min state
    auto [it, inserted] = lookup.try_emplace(blocks, partitions_.size());
    if (inserted) {
      Partition p;
      p.blocks = blocks;
      std::size_t fact = 1;
      for (std::size_t k = 2; k <= blocks.size(); ++k) fact *= k;
      p.hypothesis_for_order.assign(fact, 0);
      partitions_.push_back(std::move(p));
    }
    Partition& part = partitions_[it->second];
    std::vector<int> order;
    for (const auto& g : h.groups) {
      const auto pos = std::find(part.blocks.begin(), part.blocks.end(), g) - part.blocks.begin();
      order.push_back(static_cast<int>(pos));
    }
    part.hypothesis_for_order[permutation_rank(order)] = h.index;
    partition_of_[h.index] = it->second;
    block_order_[h.index] = std::move(order);
  }
}

std::vector<HypothesisGroupLabel> collapse_by_predicate(
    std::span<const Hypothesis> hypotheses, std::span<const HypothesisPredicate> predicates) {
  std::vector<HypothesisGroupLabel> out;
  for (const auto& p : predicates) out.push_back({p.label, p.description, {}});
  HypothesisGroupLabel residual{std::string(kResidualLabel), "hypotheses matching no predicate",
                                {}};

  for (const auto& h : hypotheses) {
    std::ptrdiff_t hit = -1;
    for (std::size_t k = 0; k < predicates.size(); ++k) {
      if (!predicates[k].matches(h)) continue;
      if (hit >= 0) {
        throw ValidationError(fmt::format("overlapping groups: hypothesis {} matches both {} and {}",
                                          h.index, predicates[static_cast<std::size_t>(hit)].label,
                                          predicates[k].label));
      }
      hit = static_cast<std::ptrdiff_t>(k);
    }
    if (hit >= 0) {
      out[static_cast<std::size_t>(hit)].members.push_back(h.index);
    } else {
      residual.members.push_back(h.index);
    }
  }
  if (!residual.members.empty()) out.push_back(std::move(residual));
  return out;
}

std::vector<HypothesisPredicate> table2_predicates() {
  auto four_states = [](const Hypothesis& h) { return h.num_states() == 4; };
  return {
      {"C0", "Null: mu1 = mu2 = mu3 = mu4",
       [=](const Hypothesis& h) { return four_states(h) && h.is_null(); }},
      {"C1", "Circadian: mu1 = mu3 != mu2 = mu4",
       [=](const Hypothesis& h) {
         return four_states(h) && h.num_groups() == 2 && h.same_group(1, 3) && h.same_group(2, 4);
       }},
      {"C2", "Treatment-affected A: mu1 != mu2 but mu3 = mu4",
       [=](const Hypothesis& h) {
         return four_states(h) && !h.same_group(1, 2) && h.same_group(3, 4);
       }},
      {"C3", "Treatment-affected B: mu1 = mu2 but mu3 != mu4",
       [=](const Hypothesis& h) {
         return four_states(h) && h.same_group(1, 2) && !h.same_group(3, 4);
       }},
  };
}

}  // namespace manyhyp
