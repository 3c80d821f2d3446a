#include "manyhyp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "manyhyp/error.hpp"

namespace manyhyp {

namespace {

constexpr double kTargetAcceptance = 0.44;
constexpr double kMinStep = 1e-4;
constexpr double kMaxStep = 5.0;

double log_sum_exp(std::span<const double> v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

}  // namespace

void SamplerConfig::validate() const {
  if (num_chains < 1) throw ValidationError("num_chains must be positive");
  if (num_iterations < 1) throw ValidationError("num_iterations must be positive");
  if (burn_in < 0 || burn_in >= num_iterations) {
    throw ValidationError(fmt::format("burn_in ({}) must be below num_iterations ({})", burn_in,
                                      num_iterations));
  }
  if (thinning < 1) throw ValidationError("thinning must be positive");
  if (d_factor_samples < 1) throw ValidationError("d_factor_samples must be positive");
  if (workers < 1) throw ValidationError("workers must be positive");
  if (!(initial_step > 0.0)) throw ValidationError("initial_step must be positive");
  prior.validate();
}

OrderFactorOptions SamplerConfig::order_options() const {
  OrderFactorOptions o;
  o.method = order_method;
  o.mc_samples = d_factor_samples;
  o.mc_seed = mix64(master_seed ^ tag(StreamPurpose::kOrderFactor));
  return o;
}

std::vector<std::string> global_parameter_names(int num_states) {
  std::vector<std::string> names;
  for (int i = 1; i <= num_states; ++i) names.push_back(fmt::format("alpha_{}", i));
  names.emplace_back("alpha_0");
  names.emplace_back("mu_0");
  return names;
}

double global_parameter(const GlobalParams& params, int param_id) {
  const int s = params.num_states();
  if (param_id < 0 || param_id > s + 1) throw ValidationError("parameter id out of range");
  if (param_id < s) return params.state_shapes[static_cast<std::size_t>(param_id)];
  return param_id == s ? params.prior_shape : params.prior_mean_scale;
}

void set_global_parameter(GlobalParams& params, int param_id, double value) {
  const int s = params.num_states();
  if (param_id < 0 || param_id > s + 1) throw ValidationError("parameter id out of range");
  if (param_id < s) {
    params.state_shapes[static_cast<std::size_t>(param_id)] = value;
  } else if (param_id == s) {
    params.prior_shape = value;
  } else {
    params.prior_mean_scale = value;
  }
}

bool ConvergenceReport::converged() const {
  if (!available) return false;
  return std::all_of(rhat.begin(), rhat.end(), [&](double r) { return r < threshold; });
}

std::size_t sample_assignment(const CollapsedLikelihood& likelihood, std::span<const double> sums,
                              std::span<const double> log_sums,
                              std::span<const double> log_weights, RngStream& rng,
                              std::span<double> scratch) {
  likelihood.evaluate_all(sums, log_sums, scratch);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < scratch.size(); ++h) {
    scratch[h] += log_weights[h];
    if (scratch[h] > top) top = scratch[h];
  }
  if (!std::isfinite(top)) throw NumericalError("degenerate gene");
  return sample_log_categorical(scratch, rng);
}

std::size_t sample_assignment(std::span<const double> gene_data, int num_individuals,
                              const GlobalParams& params, RngStream& rng,
                              const OrderFactorOptions& options) {
  const HypothesisSpace space(params.num_states());
  params.validate(space.size());
  const GeneStatsTable stats(gene_data, params.num_states(), num_individuals);
  const CollapsedLikelihood lik(space, params, num_individuals, options);
  std::vector<double> log_w(space.size());
  for (std::size_t h = 0; h < log_w.size(); ++h) log_w[h] = std::log(params.mixture_weights[h]);
  std::vector<double> scratch(space.size());
  return sample_assignment(lik, stats.sums(0), stats.log_sums(0), log_w, rng, scratch);
}

std::vector<double> sample_log_mixture_weights(std::span<const std::uint64_t> counts,
                                               double omega, RngStream& rng) {
  if (counts.empty()) throw ValidationError("no mixture components");
  if (!(omega > 0.0)) throw ValidationError("dirichlet weight must be positive");
  std::vector<double> lg(counts.size());
  for (std::size_t h = 0; h < counts.size(); ++h) {
    lg[h] = log_gamma_variate(omega + static_cast<double>(counts[h]), rng);
  }
  const double norm = log_sum_exp(lg);
  for (double& v : lg) v -= norm;
  return lg;
}

std::vector<double> sample_mixture_weights(std::span<const std::uint64_t> counts, double omega,
                                           RngStream& rng) {
  auto w = sample_log_mixture_weights(counts, omega, rng);
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

double assignment_log_likelihood(const GlobalParams& params, const GeneStatsTable& stats,
                                 const HypothesisSpace& space,
                                 std::span<const std::size_t> assignments,
                                 const OrderFactorOptions& options, WorkerPool* pool) {
  const CollapsedLikelihood lik(space, params, stats.num_individuals(), options);
  const auto g_count = static_cast<std::size_t>(stats.num_genes());
  std::vector<double> per_gene(g_count);
  auto body = [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      const int gi = static_cast<int>(g);
      per_gene[g] = lik.evaluate(stats.sums(gi), stats.log_sums(gi), assignments[g]);
    }
  };
  if (pool) {
    pool->run(g_count, body);
  } else {
    body(0, g_count);
  }
  double total = 0.0;
  for (double v : per_gene) total += v;
  return total;
}

MhResult mh_update_global(int param_id, ChainState& state, const GeneStatsTable& stats,
                          const HypothesisSpace& space, const SamplerConfig& config,
                          double current_log_likelihood, RngStream& rng, WorkerPool* pool) {
  const double v = global_parameter(state.params, param_id);
  const double sigma = state.mh_step_sizes[static_cast<std::size_t>(param_id)];
  const double proposed = v * std::exp(sigma * standard_normal(rng));
  const double log_u = std::log(uniform01(rng));
  MhResult r{v, false, current_log_likelihood};
  if (!(proposed > 0.0) || !(proposed < config.prior.uniform_upper)) return r;
  GlobalParams trial = state.params;
  set_global_parameter(trial, param_id, proposed);
  const double ll = assignment_log_likelihood(trial, stats, space, state.assignments,
                                              config.order_options(), pool);
  const double log_ratio = ll - current_log_likelihood + std::log(proposed) - std::log(v);
  if (log_u < log_ratio) {
    state.params = std::move(trial);
    r = {proposed, true, ll};
  }
  return r;
}

GlobalParams initial_params(const ExpressionDataset& data, std::size_t num_hypotheses,
                            const PriorConfig& prior) {
  GlobalParams p;
  const int s = data.num_states();
  const int n = data.num_individuals();
  double grand = 0.0;
  for (double x : data.values()) grand += x;
  grand /= static_cast<double>(data.values().size());
  for (int i = 0; i < s; ++i) {
    double cv2 = 0.0;
    for (int g = 0; g < data.num_genes() && n > 1; ++g) {
      double m = 0.0;
      for (int j = 0; j < n; ++j) m += data.value(g, i, j);
      m /= n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) var += (data.value(g, i, j) - m) * (data.value(g, i, j) - m);
      var /= (n - 1);
      cv2 += var / (m * m);
    }
    cv2 /= data.num_genes();
    const double a = cv2 > 0.0 ? 1.0 / cv2 : 1.0;
    p.state_shapes.push_back(std::clamp(a, 1e-3, 0.5 * prior.uniform_upper));
  }
  p.prior_shape = std::min(2.0, 0.5 * prior.uniform_upper);
  if (!(grand < prior.uniform_upper)) {
    throw ValidationError(fmt::format(
        "grand mean {} is not below the prior upper bound {}", grand, prior.uniform_upper));
  }
  p.prior_mean_scale = grand;
  if (num_hypotheses == 1) {
    p.mixture_weights = {1.0};
  } else {
    p.mixture_weights.assign(num_hypotheses, 0.25 / static_cast<double>(num_hypotheses - 1));
    p.mixture_weights[0] = 0.75;
  }
  return p;
}

TraceSet run_chain(const ExpressionDataset& data, const SamplerConfig& config, int chain_index,
                   const ProgressFn& progress) {
  config.validate();
  const int s = data.num_states();
  const HypothesisSpace space(s);
  const std::size_t h_count = space.size();
  const GeneStatsTable stats(data);
  const auto g_count = static_cast<std::size_t>(data.num_genes());
  const OrderFactorOptions options = config.order_options();
  WorkerPool pool(config.workers);

  ChainState state;
  state.chain_seed =
      stream_id({config.master_seed, tag(StreamPurpose::kChainSeed),
                 static_cast<std::uint64_t>(chain_index)});
  state.params = config.initial_params ? *config.initial_params
                                       : initial_params(data, h_count, config.prior);
  if (state.params.num_states() != s) {
    throw ValidationError("initial parameters have the wrong number of states");
  }
  state.params.validate(h_count);
  for (double w : state.params.mixture_weights) state.log_weights.push_back(std::log(w));
  state.assignments.assign(g_count, 0);
  const int n_params = s + 2;
  for (int id : config.frozen_params) {
    if (id < 0 || id >= n_params) throw ValidationError(fmt::format("frozen parameter id {}", id));
  }
  state.mh_step_sizes.assign(static_cast<std::size_t>(n_params), config.initial_step);

  TraceSet trace;
  trace.chain_index = chain_index;
  trace.num_states = s;
  trace.num_hypotheses = h_count;
  trace.num_genes = g_count;
  trace.visits.assign(g_count * h_count, 0);
  std::vector<std::uint64_t> accepted(static_cast<std::size_t>(n_params), 0);
  std::vector<std::uint64_t> proposed(static_cast<std::size_t>(n_params), 0);

  const std::int64_t adapt_end = config.adaptation_end();
  std::vector<std::uint64_t> counts(h_count);
  for (std::int64_t it = 1; it <= config.num_iterations; ++it) {
    state.iteration = it;
    const auto uit = static_cast<std::uint64_t>(it);

    const CollapsedLikelihood lik(space, state.params, data.num_individuals(), options);
    pool.run(g_count, [&](std::size_t begin, std::size_t end) {
      thread_local std::vector<double> scratch;
      scratch.resize(h_count);
      for (std::size_t g = begin; g < end; ++g) {
        auto rng = make_stream(state.chain_seed, {tag(StreamPurpose::kAssignment), uit, g});
        const int gi = static_cast<int>(g);
        try {
          state.assignments[g] = sample_assignment(lik, stats.sums(gi), stats.log_sums(gi),
                                                   state.log_weights, rng, scratch);
        } catch (const NumericalError& e) {
          throw NumericalError(fmt::format("{} at gene '{}', chain {}, iteration {}", e.what(),
                                           data.gene_ids()[g], chain_index, it));
        }
      }
    });

    if (config.update_mixture_weights) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t z : state.assignments) ++counts[z];
      auto rng = make_stream(state.chain_seed, {tag(StreamPurpose::kMixtureWeights), uit});
      state.log_weights = sample_log_mixture_weights(counts, config.prior.dirichlet_weight, rng);
      double total = 0.0;
      for (std::size_t h = 0; h < h_count; ++h) {
        state.params.mixture_weights[h] = std::exp(state.log_weights[h]);
        total += state.params.mixture_weights[h];
      }
      for (double& w : state.params.mixture_weights) w /= total;
    }

    if (config.update_global_params) {
      double ll = 0.0;
      try {
        ll = assignment_log_likelihood(state.params, stats, space, state.assignments, options,
                                       &pool);
        for (int id = 0; id < n_params; ++id) {
          if (std::find(config.frozen_params.begin(), config.frozen_params.end(), id) !=
              config.frozen_params.end()) {
            continue;
          }
          auto rng = make_stream(state.chain_seed,
                                 {tag(StreamPurpose::kMetropolis), uit,
                                  static_cast<std::uint64_t>(id)});
          const MhResult r = mh_update_global(id, state, stats, space, config, ll, rng, &pool);
          ll = r.log_likelihood;
          const auto uid = static_cast<std::size_t>(id);
          if (it > config.burn_in) {
            ++proposed[uid];
            accepted[uid] += r.accepted ? 1 : 0;
          }
          if (it <= adapt_end) {
            const double gain = std::pow(static_cast<double>(it), -0.6);
            const double target = (r.accepted ? 1.0 : 0.0) - kTargetAcceptance;
            state.mh_step_sizes[uid] =
                std::clamp(state.mh_step_sizes[uid] * std::exp(gain * target), kMinStep, kMaxStep);
          }
        }
      } catch (const NumericalError& e) {
        throw NumericalError(
            fmt::format("{} (chain {}, iteration {})", e.what(), chain_index, it));
      }
    }

    if (it > config.burn_in && (it - config.burn_in) % config.thinning == 0) {
      trace.iterations.push_back(it);
      for (int id = 0; id < n_params; ++id) {
        trace.globals.push_back(global_parameter(state.params, id));
      }
      trace.weights.insert(trace.weights.end(), state.params.mixture_weights.begin(),
                           state.params.mixture_weights.end());
      for (std::size_t g = 0; g < g_count; ++g) ++trace.visits[g * h_count + state.assignments[g]];
    }
    if (progress) progress(chain_index, it);
  }

  for (int id = 0; id < n_params; ++id) {
    const auto uid = static_cast<std::size_t>(id);
    trace.acceptance_rates.push_back(
        proposed[uid] ? static_cast<double>(accepted[uid]) / static_cast<double>(proposed[uid])
                      : 0.0);
  }
  trace.final_step_sizes = state.mh_step_sizes;
  return trace;
}

ChainsResult run_chains(const ExpressionDataset& data, const SamplerConfig& config,
                        const ProgressFn& progress) {
  ChainsResult result;
  for (int c = 0; c < config.num_chains; ++c) {
    result.traces.push_back(run_chain(data, config, c, progress));
  }
  result.convergence = convergence_report(result.traces);
  return result;
}

ConvergenceReport convergence_report(std::span<const TraceSet> traces) {
  ConvergenceReport report;
  if (traces.empty()) return report;
  report.names = global_parameter_names(traces[0].num_states);
  std::size_t n = traces[0].num_retained();
  for (const auto& t : traces) n = std::min(n, t.num_retained());
  if (traces.size() < 2 || n < 4) return report;
  report.available = true;
  const std::size_t half = n / 2;
  const std::size_t p_count = traces[0].num_globals();
  for (std::size_t p = 0; p < p_count; ++p) {
    std::vector<double> means;
    std::vector<double> vars;
    for (const auto& t : traces) {
      for (std::size_t part = 0; part < 2; ++part) {
        const std::size_t start = part == 0 ? 0 : n - half;
        double m = 0.0;
        for (std::size_t k = 0; k < half; ++k) m += t.global(start + k, p);
        m /= static_cast<double>(half);
        double v = 0.0;
        for (std::size_t k = 0; k < half; ++k) {
          const double d = t.global(start + k, p) - m;
          v += d * d;
        }
        means.push_back(m);
        vars.push_back(v / static_cast<double>(half - 1));
      }
    }
    const auto l = static_cast<double>(half);
    const auto m_count = static_cast<double>(means.size());
    const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m_count;
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m_count;
    double b = 0.0;
    for (double m : means) b += (m - grand) * (m - grand);
    b *= l / (m_count - 1.0);
    double rhat;
    if (w > 0.0) {
      rhat = std::sqrt(((l - 1.0) / l * w + b / l) / w);
    } else {
      rhat = b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    report.rhat.push_back(rhat);
  }
  return report;
}

}  // namespace manyhyp
