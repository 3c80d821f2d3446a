#include "manyhyp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "manyhyp/error.hpp"

namespace manyhyp {

ExpressionDataset::ExpressionDataset(std::vector<std::string> gene_ids, int num_states,
                                     int num_individuals, std::vector<double> values,
                                     std::vector<std::string> state_labels,
                                     std::vector<std::string> individual_ids)
    : num_states_(num_states),
      num_individuals_(num_individuals),
      gene_ids_(std::move(gene_ids)),
      state_labels_(std::move(state_labels)),
      individual_ids_(std::move(individual_ids)),
      values_(std::move(values)) {
  if (num_states_ < 1 || num_individuals_ < 1 || gene_ids_.empty()) {
    throw ValidationError("dataset needs at least one gene, state and individual");
  }
  const std::size_t per_gene = static_cast<std::size_t>(num_states_ * num_individuals_);
  if (values_.size() != gene_ids_.size() * per_gene) {
    throw ValidationError(fmt::format("dataset has {} values, expected {} x {} x {}",
                                      values_.size(), gene_ids_.size(), num_states_,
                                      num_individuals_));
  }
  if (state_labels_.empty()) {
    for (int i = 1; i <= num_states_; ++i) state_labels_.push_back(fmt::format("s{}", i));
  }
  if (individual_ids_.empty()) {
    for (int j = 1; j <= num_individuals_; ++j) individual_ids_.push_back(fmt::format("n{}", j));
  }
  if (state_labels_.size() != static_cast<std::size_t>(num_states_) ||
      individual_ids_.size() != static_cast<std::size_t>(num_individuals_)) {
    throw ValidationError("label count does not match dataset dimensions");
  }

  std::unordered_set<std::string> seen;
  for (const auto& id : gene_ids_) {
    if (!seen.insert(id).second) throw ValidationError(fmt::format("duplicate gene id '{}'", id));
  }
  for (int g = 0; g < num_genes(); ++g) {
    for (int i = 0; i < num_states_; ++i) {
      for (int j = 0; j < num_individuals_; ++j) {
        const double x = value(g, i, j);
        if (!std::isfinite(x) || x < kMinExpression) {
          throw ValidationError(fmt::format(
              "gene '{}' state {} individual {}: value {} is outside the Gamma support",
              gene_ids_[static_cast<std::size_t>(g)], i + 1, j + 1, x));
        }
      }
    }
  }
}

ExpressionDataset ExpressionDataset::with_individuals(std::span<const int> keep) const {
  if (keep.empty()) throw ValidationError("cannot keep zero individuals");
  std::vector<std::string> ids;
  for (int j : keep) {
    if (j < 0 || j >= num_individuals_) {
      throw ValidationError(fmt::format("individual index {} out of range", j));
    }
    ids.push_back(individual_ids_[static_cast<std::size_t>(j)]);
  }
  const int n = static_cast<int>(keep.size());
  std::vector<double> out;
  out.reserve(gene_ids_.size() * static_cast<std::size_t>(num_states_ * n));
  for (int g = 0; g < num_genes(); ++g) {
    for (int i = 0; i < num_states_; ++i) {
      for (int j : keep) out.push_back(value(g, i, j));
    }
  }
  return ExpressionDataset(gene_ids_, num_states_, n, std::move(out), state_labels_,
                           std::move(ids));
}

ExpressionDataset ExpressionDataset::without_individuals(std::span<const int> drop) const {
  std::vector<int> keep;
  for (int j = 0; j < num_individuals_; ++j) {
    if (std::find(drop.begin(), drop.end(), j) == drop.end()) keep.push_back(j);
  }
  return with_individuals(keep);
}

GeneStatsTable::GeneStatsTable(const ExpressionDataset& data)
    : num_states_(data.num_states()), num_individuals_(data.num_individuals()) {
  for (int g = 0; g < data.num_genes(); ++g) append(data.gene(g));
}

GeneStatsTable::GeneStatsTable(std::span<const double> gene_values, int num_states,
                               int num_individuals)
    : num_states_(num_states), num_individuals_(num_individuals) {
  if (gene_values.size() != static_cast<std::size_t>(num_states * num_individuals)) {
    throw ValidationError("gene slice size does not match S x N");
  }
  for (double x : gene_values) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw ValidationError(fmt::format("value {} is outside the Gamma support", x));
    }
  }
  append(gene_values);
}

void GeneStatsTable::append(std::span<const double> gene_values) {
  // Sums run over sorted values so that the result does not depend on the
  // order of individuals.
  std::vector<double> sorted(static_cast<std::size_t>(num_individuals_));
  for (int i = 0; i < num_states_; ++i) {
    auto row = gene_values.subspan(static_cast<std::size_t>(i * num_individuals_),
                                   static_cast<std::size_t>(num_individuals_));
    std::copy(row.begin(), row.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    double s = 0.0;
    double ls = 0.0;
    for (double x : sorted) {
      s += x;
      ls += std::log(x);
    }
    sums_.push_back(s);
    log_sums_.push_back(ls);
  }
  ++num_genes_;
}

}  // namespace manyhyp
