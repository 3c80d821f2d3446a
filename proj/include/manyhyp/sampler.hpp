#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "manyhyp/dataset.hpp"
#include "manyhyp/hypspace.hpp"
#include "manyhyp/model.hpp"
#include "manyhyp/parallel.hpp"
#include "manyhyp/rng.hpp"

namespace manyhyp {

struct SamplerConfig {
  int num_chains = 3;
  std::int64_t num_iterations = 20000;
  std::int64_t burn_in = 5000;
  std::int64_t thinning = 1;
  PriorConfig prior;
  std::size_t d_factor_samples = 512;
  OrderFactorMethod order_method = OrderFactorMethod::kQuadrature;
  // Step sizes adapt while iteration <= adapt_until; negative means burn_in.
  std::int64_t adapt_until = -1;
  std::uint64_t master_seed = 20050101;
  int workers = 1;
  double initial_step = 0.05;
  // Starting point; the data-driven initialization is used when absent.
  std::optional<GlobalParams> initial_params;
  // Holding these off gives a fixed-parameter Gibbs sampler over Z.
  bool update_mixture_weights = true;
  bool update_global_params = true;
  // Global parameter ids (global_parameter_names order) held at their
  // starting values.
  std::vector<int> frozen_params;

  void validate() const;
  std::int64_t adaptation_end() const { return adapt_until < 0 ? burn_in : adapt_until; }
  OrderFactorOptions order_options() const;
};

struct ChainState {
  GlobalParams params;
  // log of params.mixture_weights, kept separately because tiny Dirichlet
  // components underflow in the linear domain.
  std::vector<double> log_weights;
  std::vector<std::size_t> assignments;
  std::int64_t iteration = 0;
  // Log-scale random-walk sizes for alpha_1..alpha_S, alpha_0, mu_0.
  std::vector<double> mh_step_sizes;
  std::uint64_t chain_seed = 0;
};

// Names of the scalar global parameters in MH order: alpha_1..alpha_S,
// alpha_0, mu_0.
std::vector<std::string> global_parameter_names(int num_states);
double global_parameter(const GlobalParams& params, int param_id);
void set_global_parameter(GlobalParams& params, int param_id, double value);

struct TraceSet {
  int chain_index = 0;
  int num_states = 0;
  std::size_t num_hypotheses = 0;
  std::size_t num_genes = 0;
  std::vector<std::int64_t> iterations;
  // One row of S + 2 scalars per retained draw, in global_parameter_names order.
  std::vector<double> globals;
  // One row of H mixture weights per retained draw.
  std::vector<double> weights;
  // num_genes x num_hypotheses visit counts over retained draws.
  std::vector<std::uint64_t> visits;
  std::vector<double> acceptance_rates;
  std::vector<double> final_step_sizes;

  std::size_t num_retained() const { return iterations.size(); }
  std::size_t num_globals() const { return static_cast<std::size_t>(num_states) + 2; }
  double global(std::size_t draw, std::size_t param) const {
    return globals[draw * num_globals() + param];
  }
  double weight(std::size_t draw, std::size_t h) const {
    return weights[draw * num_hypotheses + h];
  }
  std::uint64_t visit(std::size_t gene, std::size_t h) const {
    return visits[gene * num_hypotheses + h];
  }
};

struct ConvergenceReport {
  bool available = false;
  double threshold = 1.1;
  std::vector<std::string> names;
  std::vector<double> rhat;
  bool converged() const;
};

struct ChainsResult {
  std::vector<TraceSet> traces;
  ConvergenceReport convergence;
};

using ProgressFn = std::function<void(int chain, std::int64_t iteration)>;

// Draws Z_g from P(Z_g = h | Theta, X) proportional to phi_h exp(l_gh).
// `scratch` needs H entries and receives the unnormalized log conditionals.
std::size_t sample_assignment(const CollapsedLikelihood& likelihood, std::span<const double> sums,
                              std::span<const double> log_sums,
                              std::span<const double> log_weights, RngStream& rng,
                              std::span<double> scratch);
std::size_t sample_assignment(std::span<const double> gene_data, int num_individuals,
                              const GlobalParams& params, RngStream& rng,
                              const OrderFactorOptions& options = {});

// Dirichlet(omega + counts) draw, returned as log weights normalized so that
// their exponentials sum to one.
std::vector<double> sample_log_mixture_weights(std::span<const std::uint64_t> counts,
                                               double omega, RngStream& rng);
std::vector<double> sample_mixture_weights(std::span<const std::uint64_t> counts, double omega,
                                           RngStream& rng);

// Sum over genes of the collapsed likelihood at the current assignments.
double assignment_log_likelihood(const GlobalParams& params, const GeneStatsTable& stats,
                                 const HypothesisSpace& space,
                                 std::span<const std::size_t> assignments,
                                 const OrderFactorOptions& options, WorkerPool* pool = nullptr);

struct MhResult {
  double value = 0.0;
  bool accepted = false;
  // Target at the retained value, for reuse by the next move.
  double log_likelihood = 0.0;
};

// One log-scale random-walk Metropolis step on parameter param_id under a
// Uniform(0, C) prior. current_log_likelihood is the assignment likelihood at
// the current state; the state's parameter is updated when accepted.
MhResult mh_update_global(int param_id, ChainState& state, const GeneStatsTable& stats,
                          const HypothesisSpace& space, const SamplerConfig& config,
                          double current_log_likelihood, RngStream& rng,
                          WorkerPool* pool = nullptr);

// Moment-based starting point: alpha_i = 1 / mean over genes of the squared
// within-state CV, alpha_0 = 2, mu_0 = grand mean, phi_0 = 0.75 and the rest
// spread evenly.
GlobalParams initial_params(const ExpressionDataset& data, std::size_t num_hypotheses,
                            const PriorConfig& prior);

TraceSet run_chain(const ExpressionDataset& data, const SamplerConfig& config, int chain_index,
                   const ProgressFn& progress = {});

ChainsResult run_chains(const ExpressionDataset& data, const SamplerConfig& config,
                        const ProgressFn& progress = {});

// Split-chain potential scale reduction over each scalar global parameter.
// Unavailable with fewer than two chains or fewer than four retained draws.
ConvergenceReport convergence_report(std::span<const TraceSet> traces);

}  // namespace manyhyp
