#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "manyhyp/hypspace.hpp"
#include "manyhyp/sampler.hpp"

namespace manyhyp {

// Per-gene posterior probabilities over a set of columns (hypotheses, or
// hypothesis groups after collapsing) plus global-parameter summaries.
struct PosteriorSummary {
  std::size_t num_genes = 0;
  std::size_t num_hypotheses = 0;
  // Column that plays the role of the null hypothesis.
  std::size_t null_index = 0;
  std::vector<double> probs;
  std::vector<std::string> column_labels;
  std::vector<double> phi_means;
  std::vector<std::string> param_names;
  std::vector<double> param_means;
  // (2.5%, 50%, 97.5%) per global parameter.
  std::vector<std::array<double, 3>> param_quantiles;
  std::size_t num_draws = 0;

  std::span<const double> row(std::size_t g) const {
    return {probs.data() + g * num_hypotheses, num_hypotheses};
  }
  double prob(std::size_t g, std::size_t h) const { return probs[g * num_hypotheses + h]; }
  // Rows on the simplex within 1e-9, entries in [0, 1], null column in range.
  void validate() const;
};

// Pools retained draws of all traces (the traces hold post-burn-in draws only).
PosteriorSummary summarize(std::span<const TraceSet> traces);

// Sample quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

// Arg-max of a probability row; ties go to the smallest index.
std::pair<std::size_t, double> modal_hypothesis(std::span<const double> row);

struct FdrResult {
  double fdr = 0.0;
  std::vector<std::size_t> selected;
};

// Genes whose modal column is non-null with probability >= k; the estimate
// is the mean of (1 - modal probability) over them, 0 when none qualify.
FdrResult fdr_many_hypotheses(const PosteriorSummary& summary, double k);

// Genes with P(non-null) = 1 - P(null) >= k; the estimate is the mean null
// probability over them, 0 when none qualify.
FdrResult fdr_null_vs_nonnull(const PosteriorSummary& summary, double k);

struct GeneCall {
  std::size_t modal_index = 0;
  double modal_probability = 0.0;
  bool selected = false;
};

struct FdrCurvePoint {
  double k = 0.0;
  double fdr = 0.0;
  std::size_t num_selected = 0;
};

struct InferenceResult {
  std::vector<GeneCall> genes;
  std::size_t null_index = 0;
  std::vector<std::string> column_labels;
  double threshold = 0.0;
  double target_fdr = 0.05;
  double grid_step = 0.001;
  // Set when no threshold selects a non-empty set at the target.
  bool warning = false;
  std::vector<FdrCurvePoint> curve;

  std::size_t num_selected() const;
  // Selected column, or the null column for unselected genes.
  std::size_t called(std::size_t g) const {
    return genes[g].selected ? genes[g].modal_index : null_index;
  }
};

// Evaluates the many-hypotheses estimate at k = step, 2 step, ... below 1
// and picks the smallest k whose selection is non-empty with estimate at or
// below the target. Without such a k the threshold is the smallest k with an
// empty selection (or the largest grid point) and `warning` is set.
InferenceResult calibrate_threshold(const PosteriorSummary& summary, double target_fdr,
                                    double grid_step = 0.001);

// Sums each gene's probabilities within groups. The groups must be disjoint
// and cover every column; the group holding column 0 becomes the null.
PosteriorSummary collapse_summary(const PosteriorSummary& summary,
                                  std::span<const HypothesisGroupLabel> groups);

InferenceResult collapsed_inference(const PosteriorSummary& summary,
                                    std::span<const HypothesisGroupLabel> groups,
                                    double target_fdr, double grid_step = 0.001);

}  // namespace manyhyp
