#include "manyhyp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "manyhyp/error.hpp"

namespace manyhyp {

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return m;
}

void check_states(const ExpressionDataset& data, std::span<const int> states) {
  if (states.empty()) throw ValidationError("state set must be non-empty");
  for (int s : states) {
    if (s < 1 || s > data.num_states()) {
      throw ValidationError(fmt::format("state {} out of range", s));
    }
  }
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ValidationError("correlation needs two equal-length samples of size >= 2");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw ValidationError("zero-variance sample in correlation");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman_correlation(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson_correlation(ra, rb);
}

std::vector<CvRankRow> cv_rank_table(const ExpressionDataset& data, int state,
                                     double min_mean_quantile) {
  if (state >= data.num_states()) throw ValidationError("state out of range");
  if (!(min_mean_quantile >= 0.0 && min_mean_quantile < 1.0)) {
    throw ValidationError("expression filter quantile must lie in [0, 1)");
  }
  const int n = data.num_individuals();
  const std::size_t scope = state < 0 ? static_cast<std::size_t>(data.num_states() * n)
                                      : static_cast<std::size_t>(n);
  if (scope < 2) throw ValidationError("need at least 2 values per gene");

  std::vector<double> grand;
  for (int g = 0; g < data.num_genes(); ++g) {
    const auto v = data.gene(g);
    grand.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
  }
  const double cutoff = min_mean_quantile > 0.0 ? quantile(grand, min_mean_quantile)
                                                : -std::numeric_limits<double>::infinity();
  std::vector<CvRankRow> rows;
  for (int g = 0; g < data.num_genes(); ++g) {
    if (grand[static_cast<std::size_t>(g)] < cutoff) continue;
    auto v = data.gene(g);
    if (state >= 0) v = v.subspan(static_cast<std::size_t>(state * n), static_cast<std::size_t>(n));
    const Moments m = moments(v);
    CvRankRow r;
    r.gene = static_cast<std::size_t>(g);
    r.gene_id = data.gene_ids()[static_cast<std::size_t>(g)];
    r.mean = m.mean;
    r.sd = m.sd;
    r.cv = m.sd / m.mean;
    rows.push_back(std::move(r));
  }
  std::vector<double> cv;
  std::vector<double> mean;
  std::vector<double> sd;
  for (const auto& r : rows) {
    cv.push_back(r.cv);
    mean.push_back(r.mean);
    sd.push_back(r.sd);
  }
  const auto rc = average_ranks(cv);
  const auto rm = average_ranks(mean);
  const auto rs = average_ranks(sd);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].cv_rank = rc[i];
    rows[i].mean_rank = rm[i];
    rows[i].sd_rank = rs[i];
  }
  return rows;
}

void validate_state_sets(const ExpressionDataset& data, std::span<const int> states_a,
                         std::span<const int> states_b) {
  check_states(data, states_a);
  check_states(data, states_b);
  for (int s : states_a) {
    if (std::find(states_b.begin(), states_b.end(), s) != states_b.end()) {
      throw ValidationError("state sets must be disjoint");
    }
  }
  const auto n = static_cast<std::size_t>(data.num_individuals());
  if ((states_a.size() + states_b.size()) * n < 3) {
    throw ValidationError("too few values for a pooled sd");
  }
}

EffectSizeReport effect_size(const ExpressionDataset& data, int gene, std::span<const int> states_a,
                             std::span<const int> states_b) {
  if (gene < 0 || gene >= data.num_genes()) throw ValidationError("gene index out of range");
  validate_state_sets(data, states_a, states_b);
  auto collect = [&](std::span<const int> states) {
    std::vector<double> v;
    for (int s : states) {
      for (int j = 0; j < data.num_individuals(); ++j) v.push_back(data.value(gene, s - 1, j));
    }
    return v;
  };
  const auto va = collect(states_a);
  const auto vb = collect(states_b);
  EffectSizeReport r;
  r.gene_id = data.gene_ids()[static_cast<std::size_t>(gene)];
  r.states_a.assign(states_a.begin(), states_a.end());
  r.states_b.assign(states_b.begin(), states_b.end());
  r.mean_a = std::accumulate(va.begin(), va.end(), 0.0) / static_cast<double>(va.size());
  r.mean_b = std::accumulate(vb.begin(), vb.end(), 0.0) / static_cast<double>(vb.size());
  double ssa = 0.0;
  for (double x : va) ssa += (x - r.mean_a) * (x - r.mean_a);
  double ssb = 0.0;
  for (double x : vb) ssb += (x - r.mean_b) * (x - r.mean_b);
  r.pooled_sd = std::sqrt((ssa + ssb) / static_cast<double>(va.size() + vb.size() - 2));
  if (!(r.pooled_sd > 0.0)) {
    throw ValidationError(fmt::format("degenerate gene '{}': zero pooled sd", r.gene_id));
  }
  r.effect = (r.mean_b - r.mean_a) / r.pooled_sd;
  return r;
}

std::vector<double> correlation_distance_matrix(const ExpressionDataset& data, bool log_scale) {
  const auto n = static_cast<std::size_t>(data.num_individuals());
  if (n < 2) throw ValidationError("need at least 2 individuals");
  std::vector<std::vector<double>> vec(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (int g = 0; g < data.num_genes(); ++g) {
      for (int i = 0; i < data.num_states(); ++i) {
        const double x = data.value(g, i, static_cast<int>(j));
        vec[j].push_back(log_scale ? std::log(x) : x);
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    const auto [lo, hi] = std::minmax_element(vec[j].begin(), vec[j].end());
    if (vec[j].size() < 2 || *lo == *hi) {
      throw ValidationError(fmt::format("individual '{}' has zero variance",
                                        data.individual_ids()[j]));
    }
  }
  std::vector<double> d(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = std::clamp(1.0 - pearson_correlation(vec[a], vec[b]), 0.0, 2.0);
      d[a * n + b] = v;
      d[b * n + a] = v;
    }
  }
  return d;
}

Linkage parse_linkage(const std::string& name) {
  if (name == "average") return Linkage::kAverage;
  if (name == "single") return Linkage::kSingle;
  if (name == "complete") return Linkage::kComplete;
  throw ValidationError(fmt::format("unknown linkage '{}'", name));
}

std::vector<Merge> hierarchical_clustering(std::span<const double> distances, std::size_t n,
                                           Linkage linkage) {
  if (n == 0 || distances.size() != n * n) throw ValidationError("distance matrix must be n x n");
  std::vector<double> d(distances.begin(), distances.end());
  std::vector<bool> active(n, true);
  std::vector<std::size_t> id(n);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> key(n);  // smallest member
  std::iota(id.begin(), id.end(), 0);
  std::iota(key.begin(), key.end(), 0);
  std::vector<Merge> merges;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = n;
    std::size_t bj = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const double v = d[i * n + j];
        bool take = v < best;
        if (!take && v == best && bi < n) {
          const auto cand = std::minmax(key[i], key[j]);
          const auto cur = std::minmax(key[bi], key[bj]);
          take = cand < cur;
        }
        if (take) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    // Slot bi keeps the merged cluster.
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double di = d[k * n + bi];
      const double dj = d[k * n + bj];
      double nv = 0.0;
      switch (linkage) {
        case Linkage::kAverage:
          nv = (static_cast<double>(size[bi]) * di + static_cast<double>(size[bj]) * dj) /
               static_cast<double>(size[bi] + size[bj]);
          break;
        case Linkage::kSingle:
          nv = std::min(di, dj);
          break;
        case Linkage::kComplete:
          nv = std::max(di, dj);
          break;
      }
      d[k * n + bi] = nv;
      d[bi * n + k] = nv;
    }
    Merge m;
    m.left = std::min(id[bi], id[bj]);
    m.right = std::max(id[bi], id[bj]);
    m.height = best;
    m.size = size[bi] + size[bj];
    merges.push_back(m);
    size[bi] = m.size;
    key[bi] = std::min(key[bi], key[bj]);
    id[bi] = n + step;
    active[bj] = false;
  }
  return merges;
}

std::vector<int> cut_tree(std::span<const Merge> merges, std::size_t n, std::size_t num_clusters) {
  if (num_clusters < 1 || num_clusters > n) {
    throw ValidationError(fmt::format("cluster count {} outside 1..{}", num_clusters, n));
  }
  if (merges.size() + 1 != n) throw ValidationError("merge list does not match n");
  // Union-find over the first n - k merges.
  std::vector<std::size_t> parent(2 * n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < n - num_clusters; ++k) {
    parent[find(merges[k].left)] = n + k;
    parent[find(merges[k].right)] = n + k;
  }
  std::unordered_map<std::size_t, int> label;
  std::vector<int> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t root = find(j);
    auto it = label.find(root);
    if (it == label.end()) it = label.emplace(root, static_cast<int>(label.size())).first;
    out[j] = it->second;
  }
  return out;
}

std::vector<int> average_linkage_clusters(std::span<const double> distances, std::size_t n,
                                          std::size_t num_clusters) {
  const auto merges = hierarchical_clustering(distances, n, Linkage::kAverage);
  return cut_tree(merges, n, num_clusters);
}

DiscrepancyReport discrepancy_report(std::span<const std::string> ids_a, const InferenceResult& a,
                                     std::span<const std::string> ids_b, const InferenceResult& b) {
  if (ids_a.size() != a.genes.size() || ids_b.size() != b.genes.size()) {
    throw ValidationError("gene ids do not match the inference results");
  }
  std::unordered_map<std::string, std::size_t> index_b;
  for (std::size_t g = 0; g < ids_b.size(); ++g) index_b.emplace(ids_b[g], g);
  std::unordered_map<std::string, std::size_t> index_a;
  for (std::size_t g = 0; g < ids_a.size(); ++g) index_a.emplace(ids_a[g], g);
  DiscrepancyReport r;
  r.nonnull_a = a.num_selected();
  r.nonnull_b = b.num_selected();
  for (std::size_t g = 0; g < ids_a.size(); ++g) {
    const auto it = index_b.find(ids_a[g]);
    if (it == index_b.end()) {
      r.only_in_a.push_back(ids_a[g]);
      continue;
    }
    ++r.num_genes_compared;
    const std::size_t ca = a.called(g);
    const std::size_t cb = b.called(it->second);
    if (ca != cb) r.discrepancies.push_back({ids_a[g], ca, cb});
  }
  for (const auto& id : ids_b) {
    if (!index_a.count(id)) r.only_in_b.push_back(id);
  }
  if (r.num_genes_compared == 0) throw ValidationError("results share no genes");
  r.num_discrepancies = r.discrepancies.size();
  return r;
}

}  // namespace manyhyp
