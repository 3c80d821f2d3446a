#include "manyhyp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include "manyhyp/dataset.hpp"
#include "manyhyp/error.hpp"

namespace manyhyp {

namespace {

// Tail mass left outside an integration window is below exp(-kWindowLog).
constexpr double kWindowLog = 32.0;
// Grid spacing as a fraction of the narrowest posterior's log-scale width.
constexpr double kStepFraction = 0.25;
constexpr double kMaxGridPoints = 1 << 20;
// Chain probabilities below this are outside what the grid resolves.
constexpr double kGridFloor = 1e-10;

using DoublePolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError(fmt::format("{} = {} is outside Gamma support", what, v));
  }
}

// psi(u) = u + exp(-u) - 1 is the negative log density of log V around its
// mode, per unit of shape. Returns the u < 0 and u > 0 roots of psi(u) = r.
std::pair<double, double> psi_roots(double r) {
  // u > 0 branch, Newton from above on a convex increasing function.
  double hi = r + 1.0;
  for (int it = 0; it < 100; ++it) {
    const double e = std::exp(-hi);
    const double step = (hi + e - 1.0 - r) / (1.0 - e);
    hi -= step;
    if (std::abs(step) < 1e-12 * (1.0 + hi)) break;
  }
  // u < 0 branch in x = exp(-u) > 1: x - 1 - log x = r.
  double x = 2.0 + 2.0 * r;
  for (int it = 0; it < 100; ++it) {
    const double step = (x - 1.0 - std::log(x) - r) / (1.0 - 1.0 / x);
    x -= step;
    if (std::abs(step) < 1e-12 * x) break;
  }
  return {-std::log(x), hi};
}

CollapsedLikelihood::BlockShape make_block(std::vector<int> states, double prior_shape,
                                           std::span<const double> alpha, int n) {
  CollapsedLikelihood::BlockShape b;
  double a = 0.0;
  for (int c : states) a += alpha[static_cast<std::size_t>(c)];
  b.shape = prior_shape + n * a;
  b.states = std::move(states);
  b.lgamma_shape = std::lgamma(b.shape);
  b.mode_log_density = b.shape * std::log(b.shape) - b.shape - b.lgamma_shape;
  const auto [lo, hi] = psi_roots(kWindowLog / b.shape);
  b.lower = lo;
  b.upper = hi;
  return b;
}

double partition_step(std::span<const CollapsedLikelihood::BlockShape> blocks) {
  double s = 1.0;
  for (const auto& b : blocks) s = std::min(s, 1.0 / std::sqrt(b.shape));
  return kStepFraction * s;
}

// Density of log V_m, V_m ~ Inverse-Gamma(A_m, B_m), tabulated on the common
// grid t_k = origin + k * step for k in [first, first + f.size()).
struct GridDensity {
  std::ptrdiff_t first = 0;
  std::vector<double> f;
};

// Running integral of a chain prefix: zero below `first`, `total` past the end.
struct Cumulative {
  bool unit = true;
  std::ptrdiff_t first = 0;
  std::vector<double> values;
  double total = 1.0;

  double at(std::ptrdiff_t k) const {
    if (unit) return 1.0;
    if (k < first) return 0.0;
    const auto idx = static_cast<std::size_t>(k - first);
    return idx < values.size() ? values[idx] : total;
  }
};

class OrderGrid {
 public:
  void setup(std::span<const CollapsedLikelihood::BlockShape> blocks,
             std::span<const double> log_scales, double step) {
    const std::size_t m = blocks.size();
    centers_.resize(m);
    double origin = std::numeric_limits<double>::infinity();
    double end = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < m; ++b) {
      centers_[b] = log_scales[b] - std::log(blocks[b].shape);
      origin = std::min(origin, centers_[b] + blocks[b].lower);
      end = std::max(end, centers_[b] + blocks[b].upper);
    }
    step = std::max(step, (end - origin) / kMaxGridPoints);
    step_ = step;
    densities_.resize(m);
    for (std::size_t b = 0; b < m; ++b) {
      const auto& blk = blocks[b];
      const auto k0 = static_cast<std::ptrdiff_t>(
          std::floor((centers_[b] + blk.lower - origin) / step));
      const auto k1 = static_cast<std::ptrdiff_t>(
          std::ceil((centers_[b] + blk.upper - origin) / step));
      auto& d = densities_[b];
      d.first = k0;
      d.f.resize(static_cast<std::size_t>(k1 - k0 + 1));
      const double u0 = (origin - centers_[b]) + static_cast<double>(k0) * step;
      const double decay = std::exp(-step);
      double e = std::exp(-u0);
      for (std::size_t k = 0; k < d.f.size(); ++k) {
        const double u = u0 + static_cast<double>(k) * step;
        d.f[k] = std::exp(blk.mode_log_density - blk.shape * (u + e - 1.0));
        e *= decay;
      }
    }
    if (levels_.size() < m) levels_.resize(m);
  }

  double chain_probability(std::span<const int> order) {
    const std::size_t m = order.size();
    const Cumulative* prev = &unit_;
    for (std::size_t d = 0; d + 1 < m; ++d) {
      cumulate(densities_[static_cast<std::size_t>(order[d])], *prev, levels_[d]);
      prev = &levels_[d];
    }
    return integrate(densities_[static_cast<std::size_t>(order[m - 1])], *prev);
  }

  // Probabilities of every ordering, indexed by lexicographic permutation rank.
  void all_orders(std::vector<double>& out) {
    const std::size_t m = densities_.size();
    std::size_t count = 1;
    for (std::size_t i = 2; i <= m; ++i) count *= i;
    out.assign(count, 0.0);
    order_.assign(m, 0);
    used_.assign(m, false);
    next_rank_ = 0;
    descend(0, unit_, out);
  }

 private:
  // Permutations are visited in lexicographic order, so ranks are sequential.
  void descend(std::size_t depth, const Cumulative& prev, std::vector<double>& out) {
    const std::size_t m = densities_.size();
    for (std::size_t b = 0; b < m; ++b) {
      if (used_[b]) continue;
      if (depth + 1 == m) {
        out[next_rank_++] = integrate(densities_[b], prev);
        continue;
      }
      used_[b] = true;
      order_[depth] = static_cast<int>(b);
      cumulate(densities_[b], prev, levels_[depth]);
      descend(depth + 1, levels_[depth], out);
      used_[b] = false;
    }
  }

  // g = f * prev over the part of d's support where prev is nonzero, written
  // to g_ after two zero pads. Returns the first grid index covered.
  std::ptrdiff_t product(const GridDensity& d, const Cumulative& prev) const {
    const auto end = d.first + static_cast<std::ptrdiff_t>(d.f.size());
    const std::ptrdiff_t lo = prev.unit ? d.first : std::max(d.first, prev.first);
    const std::size_t n = lo < end ? static_cast<std::size_t>(end - lo) : 0;
    g_.assign(n + 4, 0.0);
    const double* f = d.f.data() + (lo - d.first);
    double* g = g_.data() + 2;
    if (prev.unit) {
      std::copy(f, f + n, g);
      return lo;
    }
    const auto avail = static_cast<std::ptrdiff_t>(prev.values.size()) - (lo - prev.first);
    const std::size_t split = std::min(n, static_cast<std::size_t>(std::max<std::ptrdiff_t>(avail, 0)));
    const double* pv = prev.values.data() + (lo - prev.first);
    for (std::size_t k = 0; k < split; ++k) g[k] = f[k] * pv[k];
    for (std::size_t k = split; k < n; ++k) g[k] = f[k] * prev.total;
    return lo;
  }

  void cumulate(const GridDensity& d, const Cumulative& prev, Cumulative& out) const {
    out.unit = false;
    out.first = product(d, prev);
    const std::size_t n = g_.size() - 4;
    out.values.resize(n);
    const double* g = g_.data() + 2;
    const double half = 0.5 * step_;
    const double corr = step_ / 1440.0;
    double run = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      // Euler-Maclaurin end correction through the third derivative, with
      // five-point differences; the lower end sits where g vanishes.
      const double c = 11.0 * (g[k + 2] - g[k - 2]) - 82.0 * (g[k + 1] - g[k - 1]);
      out.values[k] = std::max(0.0, run + corr * c);
      run += half * (g[k] + g[k + 1]);
    }
    out.total = run;
  }

  double integrate(const GridDensity& d, const Cumulative& prev) const {
    product(d, prev);
    const std::size_t n = g_.size() - 4;
    const double* g = g_.data() + 2;
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += g[k];
    return s * step_;
  }

  double step_ = 0.0;
  std::vector<double> centers_;
  std::vector<GridDensity> densities_;
  std::vector<Cumulative> levels_;
  Cumulative unit_;
  std::vector<int> order_;
  std::vector<bool> used_;
  std::size_t next_rank_ = 0;
  mutable std::vector<double> g_;
};

OrderGrid& scratch_grid() {
  thread_local OrderGrid grid;
  return grid;
}

double log_factorial(std::size_t m) { return std::lgamma(static_cast<double>(m) + 1.0); }

// Leading continued-fraction terms of log I_x(a, b), for x well below a / (a + b).
double lower_tail_log_ibeta(double a, double b, double x) {
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double tail = std::max(1.0 - (a + b) * x / (a + 1.0), 1e-300);
  return a * std::log(x) + b * std::log1p(-x) - std::log(a) - lbeta - std::log(tail);
}

// Deep in the tail the expansion is cheap and close enough; elsewhere the
// exact incomplete beta is used.
double fast_log_pair(double shape1, double scale1, double shape2, double scale2) {
  const double x = scale2 / (scale1 + scale2);
  if ((shape1 + shape2) * x / (shape2 + 1.0) < 0.5) {
    return lower_tail_log_ibeta(shape2, shape1, x);
  }
  return log_order_probability_pair(shape1, scale1, shape2, scale2);
}

double pairwise_log_bound(std::span<const double> shapes, std::span<const double> scales,
                          std::span<const int> order) {
  double s = 0.0;
  for (std::size_t d = 0; d + 1 < order.size(); ++d) {
    const auto a = static_cast<std::size_t>(order[d]);
    const auto b = static_cast<std::size_t>(order[d + 1]);
    s += fast_log_pair(shapes[a], scales[a], shapes[b], scales[b]);
  }
  return s;
}

double finish_log_order(double p, std::span<const double> shapes, std::span<const double> scales,
                        std::span<const int> order) {
  if (p >= kGridFloor) return log_factorial(order.size()) + std::log(std::min(p, 1.0));
  return log_factorial(order.size()) + pairwise_log_bound(shapes, scales, order);
}

// Shared final assembly so that every evaluation path sums the same terms in
// the same order.
double assemble(double log_d, std::size_t m, double group_const, double data, double part) {
  return ((log_d + static_cast<double>(m) * group_const) + data) + part;
}

void check_hypothesis(const Hypothesis& h, int num_states) {
  if (h.num_states() != num_states) {
    throw ValidationError(fmt::format("hypothesis covers {} states, data has {}", h.num_states(),
                                      num_states));
  }
}

}  // namespace

void PriorConfig::validate() const {
  if (!(dirichlet_weight > 0.0) || !std::isfinite(dirichlet_weight)) {
    throw ValidationError("dirichlet_weight must be positive");
  }
  if (!(uniform_upper > 0.0) || !std::isfinite(uniform_upper)) {
    throw ValidationError("uniform_upper must be positive");
  }
}

void GlobalParams::validate(std::size_t num_hypotheses) const {
  if (state_shapes.empty()) throw ValidationError("no state shapes");
  for (double a : state_shapes) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw ValidationError(fmt::format("state shape {} must be positive", a));
    }
  }
  if (!(prior_shape > 0.0) || !std::isfinite(prior_shape)) {
    throw ValidationError("prior shape must be positive");
  }
  if (!(prior_mean_scale > 0.0) || !std::isfinite(prior_mean_scale)) {
    throw ValidationError("prior mean scale must be positive");
  }
  if (num_hypotheses == 0) return;
  if (mixture_weights.size() != num_hypotheses) {
    throw ValidationError(fmt::format("mixture weights have length {}, expected {}",
                                      mixture_weights.size(), num_hypotheses));
  }
  double total = 0.0;
  for (double w : mixture_weights) {
    if (!(w >= 0.0)) throw ValidationError("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError(fmt::format("mixture weights sum to {:.17g}", total));
  }
}

double log_observation_density(double x, double shape, double mean) {
  require_positive(x, "x");
  require_positive(shape, "shape");
  require_positive(mean, "mean");
  const double rate = shape / mean;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_latent_prior_density(double mu, double prior_shape, double prior_mean_scale) {
  require_positive(mu, "mu");
  require_positive(prior_shape, "prior shape");
  require_positive(prior_mean_scale, "prior mean scale");
  const double scale = prior_shape * prior_mean_scale;
  return prior_shape * std::log(scale) - std::lgamma(prior_shape) -
         (prior_shape + 1.0) * std::log(mu) - scale / mu;
}

double log_order_probability_pair(double shape1, double scale1, double shape2, double scale2) {
  // V1 < V2 iff G1 / (G1 + G2) > scale1 / (scale1 + scale2) with G ~ Gamma(A).
  const double y = scale1 / (scale1 + scale2);
  const double p = boost::math::ibetac(shape1, shape2, y, DoublePolicy());
  if (p > 1e-280) return std::log(p);
  return lower_tail_log_ibeta(shape2, shape1, scale2 / (scale1 + scale2));
}

double log_order_factor(std::span<const double> shapes, std::span<const double> scales) {
  if (shapes.size() != scales.size() || shapes.empty()) {
    throw ValidationError("order factor needs matching, non-empty shape and scale lists");
  }
  for (std::size_t m = 0; m < shapes.size(); ++m) {
    require_positive(shapes[m], "posterior shape");
    require_positive(scales[m], "posterior scale");
  }
  if (shapes.size() == 1) return 0.0;
  std::vector<CollapsedLikelihood::BlockShape> blocks;
  std::vector<double> log_scales;
  for (std::size_t m = 0; m < shapes.size(); ++m) {
    CollapsedLikelihood::BlockShape b;
    b.shape = shapes[m];
    b.lgamma_shape = std::lgamma(b.shape);
    b.mode_log_density = b.shape * std::log(b.shape) - b.shape - b.lgamma_shape;
    std::tie(b.lower, b.upper) = psi_roots(kWindowLog / b.shape);
    blocks.push_back(std::move(b));
    log_scales.push_back(std::log(scales[m]));
  }
  std::vector<int> order(shapes.size());
  std::iota(order.begin(), order.end(), 0);
  auto& grid = scratch_grid();
  grid.setup(blocks, log_scales, partition_step(blocks));
  return finish_log_order(grid.chain_probability(order), shapes, scales, order);
}

double order_probability_factor(std::span<const double> shapes, std::span<const double> scales,
                                std::size_t mc_samples, RngStream& rng) {
  if (mc_samples == 0) throw ValidationError("mc_samples must be positive");
  if (shapes.size() != scales.size() || shapes.empty()) {
    throw ValidationError("order factor needs matching, non-empty shape and scale lists");
  }
  for (std::size_t m = 0; m < shapes.size(); ++m) {
    require_positive(shapes[m], "posterior shape");
    require_positive(scales[m], "posterior scale");
  }
  const std::size_t m = shapes.size();
  if (m == 1) return 0.0;
  const std::uint64_t key = rng();
  std::vector<double> draws(m * mc_samples);
  for (std::size_t g = 0; g < m; ++g) {
    RngStream sub(key, stream_id({tag(StreamPurpose::kOrderFactor), g}));
    for (std::size_t s = 0; s < mc_samples; ++s) {
      draws[g * mc_samples + s] = inverse_gamma_variate(shapes[g], scales[g], sub);
    }
  }
  std::size_t hits = 0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    bool ordered = true;
    for (std::size_t g = 0; g + 1 < m && ordered; ++g) {
      ordered = draws[g * mc_samples + s] < draws[(g + 1) * mc_samples + s];
    }
    hits += ordered ? 1 : 0;
  }
  // Half a hit keeps the estimate finite when no draw lands in the region.
  const double p = hits > 0 ? static_cast<double>(hits) / static_cast<double>(mc_samples)
                            : 0.5 / static_cast<double>(mc_samples);
  return log_factorial(m) + std::log(p);
}

CollapsedTerms collapsed_terms(std::span<const double> gene_data, int num_individuals,
                               const Hypothesis& hypothesis, const GlobalParams& params,
                               const OrderFactorOptions& options) {
  params.validate();
  const int s = params.num_states();
  check_hypothesis(hypothesis, s);
  const GeneStatsTable stats(gene_data, s, num_individuals);
  const auto sums = stats.sums(0);
  CollapsedTerms t;
  const double rate = params.prior_shape * params.prior_mean_scale;
  for (const auto& group : hypothesis.groups) {
    double a = 0.0;
    double b = 0.0;
    for (int c : group) {
      const auto i = static_cast<std::size_t>(c - 1);
      a += params.state_shapes[i];
      b += params.state_shapes[i] * sums[i];
    }
    t.shapes.push_back(params.prior_shape + num_individuals * a);
    t.scales.push_back(rate + b);
  }
  if (options.method == OrderFactorMethod::kQuadrature) {
    t.order_factor_log = log_order_factor(t.shapes, t.scales);
  } else {
    auto rng = make_stream(options.mc_seed, {tag(StreamPurpose::kOrderFactor)});
    t.order_factor_log = order_probability_factor(t.shapes, t.scales, options.mc_samples, rng);
  }
  return t;
}

double log_collapsed_likelihood(std::span<const double> gene_data, int num_individuals,
                                const Hypothesis& hypothesis, const GlobalParams& params,
                                const OrderFactorOptions& options) {
  params.validate();
  const int s = params.num_states();
  check_hypothesis(hypothesis, s);
  const GeneStatsTable stats(gene_data, s, num_individuals);
  const HypothesisSpace space(s);
  const std::size_t h = hypothesis_index(hypothesis.group_ranks());
  const CollapsedLikelihood lik(space, params, num_individuals, options);
  return lik.evaluate(stats.sums(0), stats.log_sums(0), h);
}

double log_complete_data_density(std::span<const double> gene_data, int num_individuals,
                                 std::span<const double> latent_means,
                                 const Hypothesis& hypothesis, const GlobalParams& params) {
  params.validate();
  const int s = params.num_states();
  check_hypothesis(hypothesis, s);
  if (latent_means.size() != static_cast<std::size_t>(s) ||
      gene_data.size() != static_cast<std::size_t>(s * num_individuals)) {
    throw ValidationError("latent means or gene data do not match the state count");
  }
  for (double mu : latent_means) require_positive(mu, "latent mean");
  if (hypothesis_from_means(latent_means, 0.0).groups != hypothesis.groups) {
    throw ValidationError("inconsistent latent means");
  }
  double total = log_factorial(hypothesis.num_groups());
  for (int i = 0; i < s; ++i) {
    const auto si = static_cast<std::size_t>(i);
    for (int j = 0; j < num_individuals; ++j) {
      total += log_observation_density(gene_data[si * static_cast<std::size_t>(num_individuals) +
                                                 static_cast<std::size_t>(j)],
                                       params.state_shapes[si], latent_means[si]);
    }
  }
  for (const auto& group : hypothesis.groups) {
    total += log_latent_prior_density(latent_means[static_cast<std::size_t>(group.front() - 1)],
                                      params.prior_shape, params.prior_mean_scale);
  }
  return total;
}

CollapsedLikelihood::CollapsedLikelihood(const HypothesisSpace& space, const GlobalParams& params,
                                         int num_individuals, OrderFactorOptions options)
    : space_(&space), alpha_(params.state_shapes), options_(options) {
  params.validate();
  if (params.num_states() != space.num_states()) {
    throw ValidationError("parameter and hypothesis-space state counts differ");
  }
  if (num_individuals < 1) throw ValidationError("need at least one individual");
  if (options_.method == OrderFactorMethod::kMonteCarlo && options_.mc_samples == 0) {
    throw ValidationError("mc_samples must be positive");
  }
  prior_rate_ = params.prior_shape * params.prior_mean_scale;
  group_const_ = params.prior_shape * std::log(prior_rate_) - std::lgamma(params.prior_shape);
  for (double a : alpha_) {
    state_const_.push_back(num_individuals * (a * std::log(a) - std::lgamma(a)));
  }
  for (const auto& part : space.partitions()) {
    PartitionShape ps;
    for (const auto& block : part.blocks) {
      std::vector<int> states;
      for (int c : block) states.push_back(c - 1);
      ps.blocks.push_back(make_block(std::move(states), params.prior_shape, alpha_,
                                     num_individuals));
    }
    ps.step = partition_step(ps.blocks);
    partitions_.push_back(std::move(ps));
  }
}

double CollapsedLikelihood::data_term(std::span<const double> log_sums) const {
  double d = 0.0;
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    d += state_const_[i] + (alpha_[i] - 1.0) * log_sums[i];
  }
  return d;
}

namespace {

struct GeneBlocks {
  std::vector<double> shapes;
  std::vector<double> scales;
  std::vector<double> log_scales;
  double part = 0.0;
};

void gene_blocks(const CollapsedLikelihood::PartitionShape& ps, std::span<const double> alpha,
                 double prior_rate, std::span<const double> sums, GeneBlocks& out) {
  const std::size_t m = ps.blocks.size();
  out.shapes.resize(m);
  out.scales.resize(m);
  out.log_scales.resize(m);
  out.part = 0.0;
  for (std::size_t b = 0; b < m; ++b) {
    const auto& blk = ps.blocks[b];
    double scale = prior_rate;
    for (int c : blk.states) {
      scale += alpha[static_cast<std::size_t>(c)] * sums[static_cast<std::size_t>(c)];
    }
    out.shapes[b] = blk.shape;
    out.scales[b] = scale;
    out.log_scales[b] = std::log(scale);
    out.part += blk.lgamma_shape - blk.shape * out.log_scales[b];
  }
}

GeneBlocks& scratch_blocks() {
  thread_local GeneBlocks b;
  return b;
}

double mc_log_order(const GeneBlocks& gb, std::span<const int> order,
                    const OrderFactorOptions& options) {
  std::vector<double> shapes;
  std::vector<double> scales;
  for (int b : order) {
    shapes.push_back(gb.shapes[static_cast<std::size_t>(b)]);
    scales.push_back(gb.scales[static_cast<std::size_t>(b)]);
  }
  auto rng = make_stream(options.mc_seed, {tag(StreamPurpose::kOrderFactor)});
  return order_probability_factor(shapes, scales, options.mc_samples, rng);
}

void check_finite(double v) {
  if (!std::isfinite(v)) throw NumericalError("numerical failure in collapsed likelihood");
}

}  // namespace

void CollapsedLikelihood::evaluate_all(std::span<const double> sums,
                                       std::span<const double> log_sums,
                                       std::span<double> out) const {
  if (out.size() != space_->size()) throw ValidationError("output has the wrong length");
  const double data = data_term(log_sums);
  auto& gb = scratch_blocks();
  auto& grid = scratch_grid();
  thread_local std::vector<double> probs;
  thread_local std::vector<int> perm;
  const auto parts = space_->partitions();
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& ps = partitions_[p];
    const std::size_t m = ps.blocks.size();
    gene_blocks(ps, alpha_, prior_rate_, sums, gb);
    const auto& hyps = parts[p].hypothesis_for_order;
    if (m == 1) {
      out[hyps[0]] = assemble(0.0, 1, group_const_, data, gb.part);
      check_finite(out[hyps[0]]);
      continue;
    }
    perm.resize(m);
    std::iota(perm.begin(), perm.end(), 0);
    if (options_.method == OrderFactorMethod::kQuadrature) {
      grid.setup(ps.blocks, gb.log_scales, ps.step);
      grid.all_orders(probs);
      std::size_t r = 0;
      do {
        const double log_d = finish_log_order(probs[r], gb.shapes, gb.scales, perm);
        out[hyps[r]] = assemble(log_d, m, group_const_, data, gb.part);
        check_finite(out[hyps[r]]);
        ++r;
      } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
      std::size_t r = 0;
      do {
        const double log_d = mc_log_order(gb, perm, options_);
        out[hyps[r]] = assemble(log_d, m, group_const_, data, gb.part);
        check_finite(out[hyps[r]]);
        ++r;
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
}

double CollapsedLikelihood::evaluate(std::span<const double> sums,
                                     std::span<const double> log_sums, std::size_t h) const {
  if (h >= space_->size()) throw ValidationError("hypothesis index out of range");
  const double data = data_term(log_sums);
  const auto& ps = partitions_[space_->partition_of(h)];
  const std::size_t m = ps.blocks.size();
  auto& gb = scratch_blocks();
  gene_blocks(ps, alpha_, prior_rate_, sums, gb);
  double log_d = 0.0;
  if (m > 1) {
    const auto order = space_->block_order(h);
    if (options_.method == OrderFactorMethod::kQuadrature) {
      auto& grid = scratch_grid();
      grid.setup(ps.blocks, gb.log_scales, ps.step);
      log_d = finish_log_order(grid.chain_probability(order), gb.shapes, gb.scales, order);
    } else {
      log_d = mc_log_order(gb, order, options_);
    }
  }
  const double v = assemble(log_d, m, group_const_, data, gb.part);
  check_finite(v);
  return v;
}

}  // namespace manyhyp
