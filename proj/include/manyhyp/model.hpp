#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "manyhyp/hypspace.hpp"
#include "manyhyp/rng.hpp"

namespace manyhyp {

struct PriorConfig {
  // Dirichlet concentration per hypothesis weight.
  double dirichlet_weight = 0.001;
  // Upper end of the Uniform(0, C) priors on the shapes and the prior mean.
  double uniform_upper = 10000.0;

  void validate() const;
};

// Shared parameters: Gamma shapes per state, the Inverse-Gamma prior
// (shape alpha_0, scale alpha_0 * mu_0) on latent means, and hypothesis weights.
struct GlobalParams {
  std::vector<double> state_shapes;
  double prior_shape = 1.0;
  double prior_mean_scale = 1.0;
  std::vector<double> mixture_weights;

  int num_states() const { return static_cast<int>(state_shapes.size()); }
  // Checks positivity and, when num_hypotheses > 0, that the weights have
  // that length and lie on the simplex within 1e-12.
  void validate(std::size_t num_hypotheses = 0) const;
};

// Per-group Inverse-Gamma posterior (shape A, scale B) of a gene's latent
// mean under one hypothesis, plus the log ordering factor.
struct CollapsedTerms {
  std::vector<double> shapes;
  std::vector<double> scales;
  double order_factor_log = 0.0;
};

enum class OrderFactorMethod { kQuadrature, kMonteCarlo };

struct OrderFactorOptions {
  OrderFactorMethod method = OrderFactorMethod::kQuadrature;
  std::size_t mc_samples = 512;
  // Seed of the common-random-number streams used by the Monte Carlo method.
  std::uint64_t mc_seed = 0x51ED2701A3C5B7E9ull;
};

// log Gamma(x; shape, rate = shape / mean).
double log_observation_density(double x, double shape, double mean);

// log Inverse-Gamma(mu; shape = prior_shape, scale = prior_shape * prior_mean_scale).
double log_latent_prior_density(double mu, double prior_shape, double prior_mean_scale);

// log D = log(M!) + log Pr(V_1 < ... < V_M) for independent
// V_m ~ Inverse-Gamma(shapes[m], scales[m]), by nested integration on a grid
// in log V. Deterministic; M = 1 gives exactly 0. Probabilities the grid
// cannot resolve (below 1e-10) fall back to the product of the exact
// adjacent-pair probabilities, which bounds the chain probability from above.
double log_order_factor(std::span<const double> shapes, std::span<const double> scales);

// Same quantity estimated from mc_samples draws per group. Each group draws
// from its own sub-stream keyed by one value taken from `rng`, so equal
// generator states give equal results. When no draw is ordered the estimate
// uses half a hit. Throws ValidationError when mc_samples is 0.
double order_probability_factor(std::span<const double> shapes, std::span<const double> scales,
                                std::size_t mc_samples, RngStream& rng);

// Exact log Pr(V_1 < V_2) for V_m ~ Inverse-Gamma(shape_m, scale_m) via the
// regularized incomplete beta function, with a log-domain tail expansion
// where the probability underflows.
double log_order_probability_pair(double shape1, double scale1, double shape2, double scale2);

CollapsedTerms collapsed_terms(std::span<const double> gene_data, int num_individuals,
                               const Hypothesis& hypothesis, const GlobalParams& params,
                               const OrderFactorOptions& options = {});

// Log of one gene's collapsed likelihood under a hypothesis, excluding the
// mixture weight. gene_data is S*N values, state-major.
double log_collapsed_likelihood(std::span<const double> gene_data, int num_individuals,
                                const Hypothesis& hypothesis, const GlobalParams& params,
                                const OrderFactorOptions& options = {});

// Observation densities plus the ordered prior on the M distinct latent
// means (M! times the product of Inverse-Gamma densities). latent_means has
// one entry per state and must match the hypothesis's ties and ordering.
double log_complete_data_density(std::span<const double> gene_data, int num_individuals,
                                 std::span<const double> latent_means,
                                 const Hypothesis& hypothesis, const GlobalParams& params);

// Collapsed likelihood bound to one parameter value. Shape-only quantities
// (posterior shapes, log-gamma terms, integration windows) are computed once
// at construction; per-gene calls only touch the gene's sufficient
// statistics. Orderings of the same partition share their integration
// prefixes in evaluate_all, and evaluate(h) reproduces evaluate_all's value
// for h bit for bit.
class CollapsedLikelihood {
 public:
  CollapsedLikelihood(const HypothesisSpace& space, const GlobalParams& params,
                      int num_individuals, OrderFactorOptions options = {});

  std::size_t num_hypotheses() const { return space_->size(); }

  void evaluate_all(std::span<const double> sums, std::span<const double> log_sums,
                    std::span<double> out) const;
  double evaluate(std::span<const double> sums, std::span<const double> log_sums,
                  std::size_t h) const;

  struct BlockShape {
    std::vector<int> states;  // 0-based
    double shape = 0.0;
    double lgamma_shape = 0.0;
    double mode_log_density = 0.0;
    double lower = 0.0;  // integration window, log V relative to the mode
    double upper = 0.0;
  };
  struct PartitionShape {
    std::vector<BlockShape> blocks;
    double step = 0.0;
  };

 private:
  double data_term(std::span<const double> log_sums) const;

  const HypothesisSpace* space_;
  std::vector<double> alpha_;
  double prior_rate_ = 0.0;
  double group_const_ = 0.0;
  std::vector<double> state_const_;
  std::vector<PartitionShape> partitions_;
  OrderFactorOptions options_;
};

}  // namespace manyhyp
