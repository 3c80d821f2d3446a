#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace manyhyp {

// Values below this are outside the Gamma support for ingestion purposes.
inline constexpr double kMinExpression = 1e-12;

// Expression levels X[g][i][j] for G genes, S states and N individuals in a
// full factorial layout. All indices are 0-based in the API; file formats and
// hypothesis groups use 1-based state numbers.
class ExpressionDataset {
 public:
  ExpressionDataset() = default;
  // `values` is gene-major, then state, then individual. Empty label vectors
  // get the defaults s1..sS and n1..nN. Throws ValidationError on any
  // non-positive or non-finite value, duplicate gene id, or size mismatch.
  ExpressionDataset(std::vector<std::string> gene_ids, int num_states, int num_individuals,
                    std::vector<double> values, std::vector<std::string> state_labels = {},
                    std::vector<std::string> individual_ids = {});

  int num_genes() const { return static_cast<int>(gene_ids_.size()); }
  int num_states() const { return num_states_; }
  int num_individuals() const { return num_individuals_; }

  double value(int gene, int state, int individual) const {
    return values_[offset(gene) + static_cast<std::size_t>(state * num_individuals_ + individual)];
  }
  // S*N values of one gene, state-major.
  std::span<const double> gene(int g) const {
    return {values_.data() + offset(g), static_cast<std::size_t>(num_states_ * num_individuals_)};
  }
  std::span<const double> values() const { return values_; }

  const std::vector<std::string>& gene_ids() const { return gene_ids_; }
  const std::vector<std::string>& state_labels() const { return state_labels_; }
  const std::vector<std::string>& individual_ids() const { return individual_ids_; }

  // Dataset restricted to the given individuals (0-based, kept in the given order).
  ExpressionDataset with_individuals(std::span<const int> keep) const;
  ExpressionDataset without_individuals(std::span<const int> drop) const;

 private:
  std::size_t offset(int g) const {
    return static_cast<std::size_t>(g) * static_cast<std::size_t>(num_states_ * num_individuals_);
  }

  int num_states_ = 0;
  int num_individuals_ = 0;
  std::vector<std::string> gene_ids_;
  std::vector<std::string> state_labels_;
  std::vector<std::string> individual_ids_;
  std::vector<double> values_;
};

// Per-gene sufficient statistics for the collapsed likelihood: for each
// state, the sum of values and the sum of log values over individuals.
class GeneStatsTable {
 public:
  GeneStatsTable() = default;
  explicit GeneStatsTable(const ExpressionDataset& data);
  GeneStatsTable(std::span<const double> gene_values, int num_states, int num_individuals);

  int num_genes() const { return num_genes_; }
  int num_states() const { return num_states_; }
  int num_individuals() const { return num_individuals_; }
  std::span<const double> sums(int g) const {
    return {sums_.data() + static_cast<std::size_t>(g * num_states_),
            static_cast<std::size_t>(num_states_)};
  }
  std::span<const double> log_sums(int g) const {
    return {log_sums_.data() + static_cast<std::size_t>(g * num_states_),
            static_cast<std::size_t>(num_states_)};
  }

 private:
  void append(std::span<const double> gene_values);

  int num_genes_ = 0;
  int num_states_ = 0;
  int num_individuals_ = 0;
  std::vector<double> sums_;
  std::vector<double> log_sums_;
};

}  // namespace manyhyp
