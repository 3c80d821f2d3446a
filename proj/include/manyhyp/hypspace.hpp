#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace manyhyp {

inline constexpr int kMaxStates = 8;

// One ordered-equality hypothesis over the state means: an ordered set
// partition of {1..S}. groups[m] holds the (1-based) states sharing the
// (m+1)-th smallest mean; states inside a group are sorted ascending.
struct Hypothesis {
  std::size_t index = 0;
  std::vector<std::vector<int>> groups;

  std::size_t num_groups() const { return groups.size(); }
  int num_states() const;
  bool is_null() const { return groups.size() == 1; }

  // ranks[i] = 1-based position of the group that contains state i+1.
  std::vector<int> group_ranks() const;
  bool same_group(int state_a, int state_b) const;

  // "mu1=mu3<mu2=mu4"
  std::string pattern() const;
  // "(1,3)(2,4)"
  std::string group_string() const;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

// Number of ordered set partitions of an S-element set.
std::uint64_t hypothesis_count(int num_states);

// All ordered set partitions of {1..S}: ascending number of groups, then
// lexicographic on the group-rank vector. Index 0 is the single-group null.
std::vector<Hypothesis> enumerate_hypotheses(int num_states);

// Canonical index of the hypothesis with the given group-rank vector,
// computed without enumerating the space.
std::size_t hypothesis_index(std::span<const int> group_ranks);
Hypothesis hypothesis_from_ranks(std::span<const int> group_ranks);

// Two means tie iff |a-b| <= rel_tolerance * max(a, b). Throws
// ValidationError("ambiguous tie structure") when ties are not transitive.
Hypothesis hypothesis_from_means(std::span<const double> means, double rel_tolerance = 0.0);

// Hypotheses grouped by their unordered partition. Every hypothesis is one
// ordering of the blocks of exactly one partition.
class HypothesisSpace {
 public:
  struct Partition {
    // Blocks sorted by their smallest state.
    std::vector<std::vector<int>> blocks;
    // hypothesis_for_order[p] is the hypothesis whose lowest-to-highest block
    // sequence is the p-th permutation of block ids in lexicographic order.
    std::vector<std::size_t> hypothesis_for_order;
  };

  explicit HypothesisSpace(int num_states);

  int num_states() const { return num_states_; }
  std::size_t size() const { return hypotheses_.size(); }
  const Hypothesis& operator[](std::size_t h) const { return hypotheses_[h]; }
  std::span<const Hypothesis> hypotheses() const { return hypotheses_; }

  std::span<const Partition> partitions() const { return partitions_; }
  std::size_t partition_of(std::size_t h) const { return partition_of_[h]; }
  // Block ids of partition_of(h), lowest mean first.
  std::span<const int> block_order(std::size_t h) const { return block_order_[h]; }

 private:
  int num_states_;
  std::vector<Hypothesis> hypotheses_;
  std::vector<Partition> partitions_;
  std::vector<std::size_t> partition_of_;
  std::vector<std::vector<int>> block_order_;
};

// Lexicographic rank of a permutation of 0..n-1.
std::size_t permutation_rank(std::span<const int> permutation);

struct HypothesisPredicate {
  std::string label;
  std::string description;
  std::function<bool(const Hypothesis&)> matches;
};

struct HypothesisGroupLabel {
  std::string label;
  std::string description;
  std::vector<std::size_t> members;
};

inline constexpr std::string_view kResidualLabel = "residual";

// One group per predicate, in predicate order, followed by a residual group
// holding unmatched hypotheses (omitted when empty). Throws
// ValidationError("overlapping groups") if two predicates match one hypothesis.
std::vector<HypothesisGroupLabel> collapse_by_predicate(
    std::span<const Hypothesis> hypotheses, std::span<const HypothesisPredicate> predicates);

// Null, circadian and the two treatment-affected groupings for four states:
//   C0  all means equal
//   C1  {1,3} and {2,4} form the only two groups
//   C2  mu1 != mu2 and mu3 == mu4
//   C3  mu1 == mu2 and mu3 != mu4
std::vector<HypothesisPredicate> table2_predicates();

}  // namespace manyhyp
