#include "manyhyp/inference.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "manyhyp/error.hpp"

namespace manyhyp {

namespace {

constexpr int kFixedBits = 100;

// Mean of values in [0, 1], computed exactly in fixed point and rounded
// once, so that the mean of a list never drops when a value at least as
// large as every member is appended.
double exact_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  unsigned __int128 sum = 0;
  for (double v : values) {
    sum += static_cast<unsigned __int128>(std::ldexp(std::clamp(v, 0.0, 1.0), kFixedBits));
  }
  const unsigned __int128 q = sum / values.size();
  return std::ldexp(static_cast<double>(q), -kFixedBits);
}

void check_k(double k) {
  if (!(k > 0.0 && k < 1.0)) {
    throw ValidationError(fmt::format("threshold k = {} must lie in (0, 1)", k));
  }
}

std::vector<double> grid_points(double step) {
  std::vector<double> ks;
  for (std::size_t i = 1;; ++i) {
    const double k = static_cast<double>(i) * step;
    if (!(k < 1.0)) break;
    ks.push_back(k);
  }
  return ks;
}

}  // namespace

void PosteriorSummary::validate() const {
  if (probs.size() != num_genes * num_hypotheses || num_hypotheses == 0) {
    throw ValidationError("posterior summary has inconsistent dimensions");
  }
  if (null_index >= num_hypotheses) throw ValidationError("null column out of range");
  for (std::size_t g = 0; g < num_genes; ++g) {
    double s = 0.0;
    for (double p : row(g)) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0, 1]");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ValidationError(fmt::format("probabilities of gene {} sum to {}", g, s));
    }
  }
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

PosteriorSummary summarize(std::span<const TraceSet> traces) {
  if (traces.empty()) throw ValidationError("no traces to summarize");
  const auto& first = traces[0];
  PosteriorSummary s;
  s.num_genes = first.num_genes;
  s.num_hypotheses = first.num_hypotheses;
  s.param_names = global_parameter_names(first.num_states);
  std::size_t total = 0;
  for (const auto& t : traces) {
    if (t.num_genes != s.num_genes || t.num_hypotheses != s.num_hypotheses ||
        t.num_states != first.num_states) {
      throw ValidationError("traces disagree on genes, states or hypotheses");
    }
    total += t.num_retained();
  }
  if (total == 0) throw ValidationError("zero retained iterations");
  s.num_draws = total;

  std::vector<std::uint64_t> visits(s.num_genes * s.num_hypotheses, 0);
  s.phi_means.assign(s.num_hypotheses, 0.0);
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < visits.size(); ++i) visits[i] += t.visits[i];
    for (std::size_t d = 0; d < t.num_retained(); ++d) {
      for (std::size_t h = 0; h < s.num_hypotheses; ++h) s.phi_means[h] += t.weight(d, h);
    }
  }
  s.probs.resize(visits.size());
  for (std::size_t i = 0; i < visits.size(); ++i) {
    s.probs[i] = static_cast<double>(visits[i]) / static_cast<double>(total);
  }
  for (double& v : s.phi_means) v /= static_cast<double>(total);

  const std::size_t p_count = first.num_globals();
  for (std::size_t p = 0; p < p_count; ++p) {
    std::vector<double> draws;
    draws.reserve(total);
    for (const auto& t : traces) {
      for (std::size_t d = 0; d < t.num_retained(); ++d) draws.push_back(t.global(d, p));
    }
    double m = 0.0;
    for (double v : draws) m += v;
    s.param_means.push_back(m / static_cast<double>(total));
    s.param_quantiles.push_back(
        {quantile(draws, 0.025), quantile(draws, 0.5), quantile(draws, 0.975)});
  }
  return s;
}

std::pair<std::size_t, double> modal_hypothesis(std::span<const double> row) {
  if (row.empty()) throw ValidationError("empty probability row");
  std::size_t best = 0;
  for (std::size_t h = 1; h < row.size(); ++h) {
    if (row[h] > row[best]) best = h;
  }
  return {best, row[best]};
}

FdrResult fdr_many_hypotheses(const PosteriorSummary& summary, double k) {
  check_k(k);
  FdrResult r;
  std::vector<double> errors;
  for (std::size_t g = 0; g < summary.num_genes; ++g) {
    const auto [h, p] = modal_hypothesis(summary.row(g));
    if (h != summary.null_index && p >= k) {
      r.selected.push_back(g);
      errors.push_back(1.0 - p);
    }
  }
  r.fdr = exact_mean(errors);
  return r;
}

FdrResult fdr_null_vs_nonnull(const PosteriorSummary& summary, double k) {
  check_k(k);
  FdrResult r;
  std::vector<double> errors;
  for (std::size_t g = 0; g < summary.num_genes; ++g) {
    const double p_null = summary.prob(g, summary.null_index);
    if (1.0 - p_null >= k) {
      r.selected.push_back(g);
      errors.push_back(p_null);
    }
  }
  r.fdr = exact_mean(errors);
  return r;
}

std::size_t InferenceResult::num_selected() const {
  return static_cast<std::size_t>(
      std::count_if(genes.begin(), genes.end(), [](const GeneCall& c) { return c.selected; }));
}

InferenceResult calibrate_threshold(const PosteriorSummary& summary, double target_fdr,
                                    double grid_step) {
  if (!(target_fdr > 0.0 && target_fdr < 1.0)) {
    throw ValidationError("target FDR must lie in (0, 1)");
  }
  if (!(grid_step > 0.0 && grid_step <= 0.01)) {
    throw ValidationError("grid step must lie in (0, 0.01]");
  }
  InferenceResult res;
  res.null_index = summary.null_index;
  res.column_labels = summary.column_labels;
  res.target_fdr = target_fdr;
  res.grid_step = grid_step;

  const auto ks = grid_points(grid_step);
  std::size_t chosen = ks.size();
  std::size_t first_empty = ks.size();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const FdrResult f = fdr_many_hypotheses(summary, ks[i]);
    res.curve.push_back({ks[i], f.fdr, f.selected.size()});
    if (chosen == ks.size() && !f.selected.empty() && f.fdr <= target_fdr) chosen = i;
    if (first_empty == ks.size() && f.selected.empty()) first_empty = i;
  }
  if (chosen == ks.size()) {
    res.warning = true;
    chosen = first_empty < ks.size() ? first_empty : ks.size() - 1;
  }
  res.threshold = ks[chosen];
  for (std::size_t g = 0; g < summary.num_genes; ++g) {
    const auto [h, p] = modal_hypothesis(summary.row(g));
    GeneCall c{h, p, false};
    c.selected = h != summary.null_index && p >= res.threshold;
    if (res.warning && res.curve[chosen].fdr > target_fdr) c.selected = false;
    res.genes.push_back(c);
  }
  return res;
}

PosteriorSummary collapse_summary(const PosteriorSummary& summary,
                                  std::span<const HypothesisGroupLabel> groups) {
  std::vector<int> owner(summary.num_hypotheses, -1);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (std::size_t h : groups[gi].members) {
      if (h >= summary.num_hypotheses) throw ValidationError("group member out of range");
      if (owner[h] >= 0) throw ValidationError("overlapping groups");
      owner[h] = static_cast<int>(gi);
    }
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) {
    throw ValidationError("groups do not cover every hypothesis");
  }
  PosteriorSummary c = summary;
  c.num_hypotheses = groups.size();
  c.null_index = static_cast<std::size_t>(owner[summary.null_index]);
  c.column_labels.clear();
  for (const auto& g : groups) c.column_labels.push_back(g.label);
  c.probs.assign(summary.num_genes * groups.size(), 0.0);
  c.phi_means.assign(groups.size(), 0.0);
  for (std::size_t h = 0; h < summary.num_hypotheses; ++h) {
    const auto o = static_cast<std::size_t>(owner[h]);
    if (h < summary.phi_means.size()) c.phi_means[o] += summary.phi_means[h];
    for (std::size_t g = 0; g < summary.num_genes; ++g) {
      c.probs[g * groups.size() + o] += summary.prob(g, h);
    }
  }
  return c;
}

InferenceResult collapsed_inference(const PosteriorSummary& summary,
                                    std::span<const HypothesisGroupLabel> groups,
                                    double target_fdr, double grid_step) {
  return calibrate_threshold(collapse_summary(summary, groups), target_fdr, grid_step);
}

}  // namespace manyhyp
