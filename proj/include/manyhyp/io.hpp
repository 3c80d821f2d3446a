#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "manyhyp/dataset.hpp"
#include "manyhyp/diagnostics.hpp"
#include "manyhyp/hypspace.hpp"
#include "manyhyp/inference.hpp"
#include "manyhyp/sampler.hpp"
#include "manyhyp/simulate.hpp"

namespace manyhyp {

struct ReadOptions {
  // When positive, values in [0, epsilon_floor) are raised to epsilon_floor
  // instead of being rejected. Negative values are always rejected.
  double epsilon_floor = 0.0;
};

// Tab-separated, header `gene_id` then `s{i}_n{j}` columns in any order.
// Errors name the source and line.
ExpressionDataset read_expression_tsv(std::istream& in, const std::string& source,
                                      const ReadOptions& options = {});
ExpressionDataset read_expression_tsv(const std::filesystem::path& path,
                                      const ReadOptions& options = {});
// State-major column order, values at 17 significant digits.
void write_expression_tsv(std::ostream& out, const ExpressionDataset& data);
void write_expression_tsv(const std::filesystem::path& path, const ExpressionDataset& data);

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

// `key = value` lines; blank lines and lines starting with '#' are skipped.
std::vector<KeyValue> parse_key_values(std::istream& in, const std::string& source);
std::vector<KeyValue> read_key_values(const std::filesystem::path& path);

std::string format_double(double v);

// Opens for writing or throws IoError.
std::ofstream open_output(const std::filesystem::path& path);
// Creates the directory (and parents) or throws IoError.
void ensure_directory(const std::filesystem::path& dir);

// Hypotheses with the largest pooled mean weight, ties to the smaller index.
std::vector<std::size_t> top_weight_columns(std::span<const double> phi_means, std::size_t count);

void write_trace_tsv(const std::filesystem::path& path, const TraceSet& trace,
                     std::span<const std::size_t> phi_columns);
// Visit counts pooled over chains.
void write_visits_tsv(const std::filesystem::path& path, std::span<const std::string> gene_ids,
                      std::span<const TraceSet> traces);
void write_convergence(const std::filesystem::path& path, const ConvergenceReport& report,
                       std::span<const TraceSet> traces);
void write_posterior_tsv(const std::filesystem::path& path, std::span<const std::string> gene_ids,
                         const PosteriorSummary& summary);
// group_labels[c] is printed for a gene whose modal column is c.
void write_inference_tsv(const std::filesystem::path& path, std::span<const std::string> gene_ids,
                         const InferenceResult& result,
                         std::span<const std::string> group_labels);
void write_fdr_curve_tsv(const std::filesystem::path& path, const InferenceResult& result);

struct SummaryColumn {
  std::string label;
  std::string description;
};

void write_summary_txt(const std::filesystem::path& path, const PosteriorSummary& summary,
                       const InferenceResult& result, std::span<const SummaryColumn> columns,
                       const ConvergenceReport& convergence);

struct LoadedInference {
  std::vector<std::string> gene_ids;
  std::vector<std::string> group_labels;
  InferenceResult result;
};

// Reads an inference.tsv. Unselected genes are called to a null column that
// differs from every modal index.
LoadedInference read_inference_tsv(const std::filesystem::path& path);

void write_truth_tsv(const std::filesystem::path& path, std::span<const std::string> gene_ids,
                     const SimulationTruth& truth);
void write_coverage_tsv(const std::filesystem::path& path, const CoverageReport& report,
                        const GlobalParams& truth);
void write_replicates_tsv(const std::filesystem::path& path, const CoverageReport& report,
                          std::span<const std::string> param_names);

void write_cv_ranks_tsv(const std::filesystem::path& path, std::span<const CvRankRow> rows);
// called may be empty; otherwise one label per report.
void write_effect_sizes_tsv(const std::filesystem::path& path,
                            std::span<const EffectSizeReport> reports,
                            std::span<const std::string> called);
void write_distances_tsv(const std::filesystem::path& path, std::span<const std::string> ids,
                         std::span<const double> distances);
void write_clusters_tsv(const std::filesystem::path& path, std::span<const std::string> ids,
                        std::span<const int> labels);
void write_merges_tsv(const std::filesystem::path& path, std::span<const Merge> merges);
void write_discrepancies_tsv(const std::filesystem::path& path, const DiscrepancyReport& report,
                             std::size_t null_a, std::size_t null_b);

// index, num_groups, groups, pattern, and the group label when given.
void write_hypothesis_table(std::ostream& out, std::span<const Hypothesis> hypotheses,
                            std::span<const HypothesisGroupLabel> groups = {});

}  // namespace manyhyp
