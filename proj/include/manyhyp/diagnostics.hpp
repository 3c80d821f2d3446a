#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "manyhyp/dataset.hpp"
#include "manyhyp/inference.hpp"

namespace manyhyp {

struct CvRankRow {
  std::size_t gene = 0;
  std::string gene_id;
  double mean = 0.0;
  double sd = 0.0;
  double cv = 0.0;
  // Average ranks (1-based) among the retained genes.
  double cv_rank = 0.0;
  double mean_rank = 0.0;
  double sd_rank = 0.0;
};

// Per-gene mean, sample sd and CV over individuals of one state (0-based), or
// over all states and individuals when state < 0. Genes whose grand mean
// falls below the given quantile of all grand means are dropped; 0 keeps
// every gene.
std::vector<CvRankRow> cv_rank_table(const ExpressionDataset& data, int state = -1,
                                     double min_mean_quantile = 0.25);

// 1-based ranks, ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);
double pearson_correlation(std::span<const double> a, std::span<const double> b);
double spearman_correlation(std::span<const double> a, std::span<const double> b);

struct EffectSizeReport {
  std::string gene_id;
  std::vector<int> states_a;  // 1-based
  std::vector<int> states_b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double pooled_sd = 0.0;
  double effect = 0.0;
};

// Throws ValidationError unless both sets are non-empty, in range, disjoint
// and hold at least three values together.
void validate_state_sets(const ExpressionDataset& data, std::span<const int> states_a,
                         std::span<const int> states_b);

// (mean over B - mean over A) / pooled sd, with the pooled variance summing
// squared deviations about each side's own mean over n_A + n_B - 2.
// States are 1-based.
EffectSizeReport effect_size(const ExpressionDataset& data, int gene, std::span<const int> states_a,
                             std::span<const int> states_b);

// N x N matrix of 1 - Pearson correlation between individuals, each
// represented by its values over genes then states (gene-major).
std::vector<double> correlation_distance_matrix(const ExpressionDataset& data,
                                                bool log_scale = false);

enum class Linkage { kAverage, kSingle, kComplete };

Linkage parse_linkage(const std::string& name);

struct Merge {
  // Leaves are 0..n-1; the k-th merge creates cluster n + k.
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

// Agglomerative clustering of a symmetric n x n distance matrix. Among pairs
// at the same distance the one whose smallest members come first
// lexicographically is merged.
std::vector<Merge> hierarchical_clustering(std::span<const double> distances, std::size_t n,
                                           Linkage linkage = Linkage::kAverage);

// Labels 0..k-1 after undoing the last k - 1 merges, numbered in order of
// each cluster's smallest member.
std::vector<int> cut_tree(std::span<const Merge> merges, std::size_t n, std::size_t num_clusters);

std::vector<int> average_linkage_clusters(std::span<const double> distances, std::size_t n,
                                          std::size_t num_clusters);

struct Discrepancy {
  std::string gene_id;
  std::size_t called_a = 0;
  std::size_t called_b = 0;
};

struct DiscrepancyReport {
  std::size_t num_genes_compared = 0;
  std::size_t num_discrepancies = 0;
  std::vector<Discrepancy> discrepancies;
  std::size_t nonnull_a = 0;
  std::size_t nonnull_b = 0;
  std::vector<std::string> only_in_a;
  std::vector<std::string> only_in_b;
};

// Compares called hypotheses (selected hypothesis, or the null) over the
// genes present in both results.
DiscrepancyReport discrepancy_report(std::span<const std::string> ids_a, const InferenceResult& a,
                                     std::span<const std::string> ids_b, const InferenceResult& b);

}  // namespace manyhyp
