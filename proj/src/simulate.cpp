#include "manyhyp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "manyhyp/error.hpp"
#include "manyhyp/parallel.hpp"

namespace manyhyp {

namespace {

std::size_t index_of(int num_states, std::initializer_list<int> ranks) {
  std::vector<int> r(ranks);
  if (static_cast<int>(r.size()) != num_states) throw ValidationError("rank vector size");
  return hypothesis_index(r);
}

GlobalParams four_state_preset(double alpha, double alpha0, double mu0, double null_weight,
                               double first, double second, double residue) {
  GlobalParams p;
  p.state_shapes.assign(4, alpha);
  p.prior_shape = alpha0;
  p.prior_mean_scale = mu0;
  const std::size_t h_count = hypothesis_count(4);
  const std::size_t up = index_of(4, {1, 2, 1, 2});    // mu1=mu3<mu2=mu4
  const std::size_t down = index_of(4, {2, 1, 2, 1});  // mu2=mu4<mu1=mu3
  p.mixture_weights.assign(h_count, residue / static_cast<double>(h_count - 3));
  p.mixture_weights[0] = null_weight;
  p.mixture_weights[up] = first;
  p.mixture_weights[down] = second;
  double total = 0.0;
  for (double w : p.mixture_weights) total += w;
  for (double& w : p.mixture_weights) w /= total;
  return p;
}

}  // namespace

SimulatedData generate_dataset(const GlobalParams& params, std::span<const std::size_t> assignments,
                               int num_individuals, RngStream& rng) {
  params.validate();
  const int s = params.num_states();
  const auto hyps = enumerate_hypotheses(s);
  if (assignments.empty()) throw ValidationError("no genes to simulate");
  if (num_individuals < 1) throw ValidationError("need at least one individual");
  const double scale = params.prior_shape * params.prior_mean_scale;

  SimulatedData out;
  out.truth.true_params = params;
  out.truth.assignments.assign(assignments.begin(), assignments.end());
  std::vector<std::string> ids;
  std::vector<double> values;
  values.reserve(assignments.size() * static_cast<std::size_t>(s * num_individuals));
  for (std::size_t g = 0; g < assignments.size(); ++g) {
    if (assignments[g] >= hyps.size()) throw ValidationError("assignment out of range");
    const Hypothesis& h = hyps[assignments[g]];
    std::vector<double> levels;
    for (std::size_t m = 0; m < h.num_groups(); ++m) {
      levels.push_back(inverse_gamma_variate(params.prior_shape, scale, rng));
    }
    std::sort(levels.begin(), levels.end());
    std::vector<double> mu(static_cast<std::size_t>(s));
    for (std::size_t m = 0; m < h.num_groups(); ++m) {
      for (int c : h.groups[m]) mu[static_cast<std::size_t>(c - 1)] = levels[m];
    }
    for (int i = 0; i < s; ++i) {
      const double a = params.state_shapes[static_cast<std::size_t>(i)];
      const double m = mu[static_cast<std::size_t>(i)];
      for (int j = 0; j < num_individuals; ++j) {
        values.push_back(std::max(m / a * gamma_variate(a, rng), kMinExpression));
      }
    }
    out.truth.means.insert(out.truth.means.end(), mu.begin(), mu.end());
    ids.push_back(fmt::format("g{:05d}", g + 1));
  }
  out.data = ExpressionDataset(std::move(ids), s, num_individuals, std::move(values));
  return out;
}

SimulatedData generate_dataset(const GlobalParams& params, int num_genes, int num_individuals,
                               RngStream& rng) {
  const std::size_t h_count = hypothesis_count(params.num_states());
  params.validate(h_count);
  if (num_genes < 1) throw ValidationError("need at least one gene");
  std::vector<double> log_w;
  for (double w : params.mixture_weights) log_w.push_back(std::log(w));
  std::vector<std::size_t> z;
  for (int g = 0; g < num_genes; ++g) z.push_back(sample_log_categorical(log_w, rng));
  return generate_dataset(params, z, num_individuals, rng);
}

std::vector<double> exact_posterior_small(const ExpressionDataset& data, const GlobalParams& params,
                                          const OrderFactorOptions& options) {
  const HypothesisSpace space(data.num_states());
  const std::size_t h_count = space.size();
  const auto g_count = static_cast<std::size_t>(data.num_genes());
  if (h_count * g_count > 10000) {
    throw ValidationError(fmt::format("exact posterior limited to H x G <= 10^4 (got {})",
                                      h_count * g_count));
  }
  params.validate(h_count);
  const GeneStatsTable stats(data);
  const CollapsedLikelihood lik(space, params, data.num_individuals(), options);
  std::vector<double> out(g_count * h_count);
  std::vector<double> row(h_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    const int gi = static_cast<int>(g);
    lik.evaluate_all(stats.sums(gi), stats.log_sums(gi), row);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < h_count; ++h) {
      row[h] += std::log(params.mixture_weights[h]);
      top = std::max(top, row[h]);
    }
    if (!std::isfinite(top)) {
      throw NumericalError(fmt::format("degenerate gene '{}'", data.gene_ids()[g]));
    }
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - top);
      total += v;
    }
    for (std::size_t h = 0; h < h_count; ++h) out[g * h_count + h] = row[h] / total;
  }
  return out;
}

GlobalParams table3_preset() {
  const double circ = 0.23;
  return four_state_preset(25.0, 5.0, 9.0, 0.75, circ * 0.118 / 0.196, circ * 0.078 / 0.196,
                           0.02);
}

GlobalParams strong_preset() { return four_state_preset(100.0, 3.0, 9.0, 0.70, 0.15, 0.15, 0.0); }

double realized_fdp(const InferenceResult& result, std::span<const std::size_t> truth) {
  if (truth.size() != result.genes.size()) throw ValidationError("truth length mismatch");
  std::size_t selected = 0;
  std::size_t wrong = 0;
  for (std::size_t g = 0; g < truth.size(); ++g) {
    if (!result.genes[g].selected) continue;
    ++selected;
    if (result.genes[g].modal_index != truth[g]) ++wrong;
  }
  return selected ? static_cast<double>(wrong) / static_cast<double>(selected) : 0.0;
}

CoverageReport coverage_experiment(const CoverageConfig& config, const ReplicateDoneFn& done) {
  if (config.num_datasets < 1) throw ValidationError("num_datasets must be positive");
  if (config.workers < 1) throw ValidationError("workers must be positive");
  config.sampler.validate();
  const int s = config.truth.num_states();
  config.truth.validate(hypothesis_count(s));

  CoverageReport report;
  report.num_datasets = config.num_datasets;
  report.num_genes = config.num_genes;
  report.replicates.resize(static_cast<std::size_t>(config.num_datasets));
  const int replicate_workers = std::min(config.workers, config.num_datasets);
  WorkerPool pool(replicate_workers);
  pool.run(report.replicates.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      try {
        auto rng = make_stream(config.seed, {tag(StreamPurpose::kReplicate), r});
        const SimulatedData sim =
            generate_dataset(config.truth, config.num_genes, config.num_individuals, rng);
        SamplerConfig sc = config.sampler;
        sc.master_seed = stream_id({config.seed, tag(StreamPurpose::kReplicate), r, 1});
        if (replicate_workers > 1) sc.workers = 1;
        const ChainsResult fit = run_chains(sim.data, sc);
        const PosteriorSummary summary = summarize(fit.traces);
        const InferenceResult inf =
            calibrate_threshold(summary, config.fdr_target, config.grid_step);
        ReplicateOutcome& o = report.replicates[r];
        o.posterior_means = summary.param_means;
        o.intervals = summary.param_quantiles;
        o.num_selected = inf.num_selected();
        o.nonnull_proportion =
            static_cast<double>(o.num_selected) / static_cast<double>(config.num_genes);
        o.realized_fdp = realized_fdp(inf, sim.truth.assignments);
        o.converged = fit.convergence.converged();
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("replicate {}: {}", r, e.what()));
      } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("replicate {}: {}", r, e.what()));
      }
      if (done) done(static_cast<int>(r));
    }
  });

  const auto names = global_parameter_names(s);
  const auto n = static_cast<double>(config.num_datasets);
  for (std::size_t p = 0; p < names.size(); ++p) {
    ParameterCoverage c;
    c.name = names[p];
    c.true_value = global_parameter(config.truth, static_cast<int>(p));
    double sum = 0.0;
    double hits = 0.0;
    for (const auto& o : report.replicates) {
      sum += o.posterior_means[p];
      if (o.intervals[p][0] <= c.true_value && c.true_value <= o.intervals[p][2]) hits += 1.0;
    }
    c.mean_of_means = sum / n;
    double ss = 0.0;
    for (const auto& o : report.replicates) {
      ss += (o.posterior_means[p] - c.mean_of_means) * (o.posterior_means[p] - c.mean_of_means);
    }
    c.sd_of_means = config.num_datasets > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    c.coverage = 100.0 * hits / n;
    report.params.push_back(c);
  }
  double sum = 0.0;
  double fdp = 0.0;
  for (const auto& o : report.replicates) {
    sum += o.nonnull_proportion;
    fdp += o.realized_fdp;
  }
  report.nonnull_mean = sum / n;
  report.fdp_mean = fdp / n;
  double ss = 0.0;
  for (const auto& o : report.replicates) {
    ss += (o.nonnull_proportion - report.nonnull_mean) * (o.nonnull_proportion - report.nonnull_mean);
  }
  report.nonnull_sd = config.num_datasets > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return report;
}

}  // namespace manyhyp
