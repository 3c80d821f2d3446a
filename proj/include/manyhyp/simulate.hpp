#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "manyhyp/dataset.hpp"
#include "manyhyp/inference.hpp"
#include "manyhyp/model.hpp"
#include "manyhyp/rng.hpp"
#include "manyhyp/sampler.hpp"

namespace manyhyp {

struct SimulationTruth {
  GlobalParams true_params;
  std::vector<std::size_t> assignments;
  // G x S latent means, gene-major.
  std::vector<double> means;
};

struct SimulatedData {
  ExpressionDataset data;
  SimulationTruth truth;
};

// Draws Z_g from params.mixture_weights, then the ordered latent means (the
// sorted values of M independent Inverse-Gamma draws, the m-th smallest going
// to group m) and finally X_gij ~ Gamma(alpha_i, alpha_i / mu_gi).
SimulatedData generate_dataset(const GlobalParams& params, int num_genes, int num_individuals,
                               RngStream& rng);
// Same with the assignments given.
SimulatedData generate_dataset(const GlobalParams& params, std::span<const std::size_t> assignments,
                               int num_individuals, RngStream& rng);

// Exact P(Z_g = h | Theta, X) for every gene (gene-major G x H). Refuses
// instances with H * G above 10^4.
std::vector<double> exact_posterior_small(const ExpressionDataset& data, const GlobalParams& params,
                                          const OrderFactorOptions& options = {});

// Four-state simulation design: alpha_i = 25, alpha_0 = 5, mu_0 = 9; 75%
// null, 23% split 0.118 : 0.078 between mu1=mu3<mu2=mu4 and
// mu2=mu4<mu1=mu3, and 2% spread evenly over the other non-null patterns.
GlobalParams table3_preset();
// Well separated four-state design for calibration checks: alpha_i = 100,
// alpha_0 = 3, mu_0 = 9, 70% null and 15% on each circadian pattern.
GlobalParams strong_preset();

struct CoverageConfig {
  GlobalParams truth = table3_preset();
  int num_genes = 100;
  int num_individuals = 13;
  int num_datasets = 25;
  SamplerConfig sampler;
  double fdr_target = 0.05;
  double grid_step = 0.001;
  std::uint64_t seed = 1;
  // Replicates run concurrently on this many workers.
  int workers = 1;
};

struct ParameterCoverage {
  std::string name;
  double true_value = 0.0;
  double mean_of_means = 0.0;
  double sd_of_means = 0.0;
  // Percentage of replicates whose 95% interval holds the true value.
  double coverage = 0.0;
};

struct ReplicateOutcome {
  std::vector<double> posterior_means;
  std::vector<std::array<double, 3>> intervals;
  double nonnull_proportion = 0.0;
  double realized_fdp = 0.0;
  std::size_t num_selected = 0;
  bool converged = false;
};

struct CoverageReport {
  int num_datasets = 0;
  int num_genes = 0;
  std::vector<ParameterCoverage> params;
  double nonnull_mean = 0.0;
  double nonnull_sd = 0.0;
  double fdp_mean = 0.0;
  std::vector<ReplicateOutcome> replicates;
};

// Fraction of selected genes whose called hypothesis differs from the truth;
// 0 when nothing is selected.
double realized_fdp(const InferenceResult& result, std::span<const std::size_t> truth);

using ReplicateDoneFn = std::function<void(int replicate)>;

// Generate, fit, summarize and calibrate num_datasets replicates, each with
// streams derived from (seed, replicate index).
CoverageReport coverage_experiment(const CoverageConfig& config,
                                   const ReplicateDoneFn& done = {});

}  // namespace manyhyp
