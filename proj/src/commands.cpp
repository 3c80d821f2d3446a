#include "manyhyp/commands.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "manyhyp/error.hpp"

namespace manyhyp {

namespace {

constexpr std::array<const char*, 16> kKeys = {
    "chains",         "iterations",     "burn_in",      "thinning",
    "adapt_until",    "omega",          "upper_bound_c", "fdr_target",
    "grid_step",      "d_factor_samples", "order_factor", "seed",
    "grouping_scheme", "epsilon_floor", "initial_step", "workers"};

template <class T>
T parse_number(const std::string& value, const std::string& key, const std::string& where) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) {
    throw ValidationError(fmt::format("{}: invalid value '{}' for '{}'", where, value, key));
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> modal_labels(const std::vector<Hypothesis>& hyps,
                                      std::span<const HypothesisGroupLabel> groups) {
  std::vector<std::string> labels;
  for (const auto& h : hyps) labels.push_back(h.pattern());
  for (const auto& g : groups) {
    for (std::size_t m : g.members) labels[m] = g.label;
  }
  return labels;
}

}  // namespace

void RunConfig::validate() const {
  sampler.validate();
  if (!(fdr_target > 0.0 && fdr_target < 1.0)) {
    throw ValidationError("fdr_target must lie in (0, 1)");
  }
  if (!(grid_step > 0.0 && grid_step <= 0.01)) {
    throw ValidationError("grid_step must lie in (0, 0.01]");
  }
  if (grouping_scheme.empty()) throw ValidationError("grouping_scheme must not be empty");
  if (grouping_scheme != "none" && grouping_scheme != "table2" &&
      !std::filesystem::is_regular_file(grouping_scheme)) {
    throw IoError(fmt::format("grouping file '{}' not found", grouping_scheme));
  }
}

std::span<const char* const> config_keys() { return kKeys; }

void apply_config_value(RunConfig& c, const std::string& key, const std::string& value,
                        const std::string& where) {
  auto& s = c.sampler;
  if (key == "chains") {
    s.num_chains = parse_number<int>(value, key, where);
  } else if (key == "iterations") {
    s.num_iterations = parse_number<std::int64_t>(value, key, where);
  } else if (key == "burn_in") {
    s.burn_in = parse_number<std::int64_t>(value, key, where);
  } else if (key == "thinning") {
    s.thinning = parse_number<std::int64_t>(value, key, where);
  } else if (key == "adapt_until") {
    s.adapt_until = parse_number<std::int64_t>(value, key, where);
  } else if (key == "omega") {
    s.prior.dirichlet_weight = parse_number<double>(value, key, where);
  } else if (key == "upper_bound_c") {
    s.prior.uniform_upper = parse_number<double>(value, key, where);
  } else if (key == "fdr_target") {
    c.fdr_target = parse_number<double>(value, key, where);
  } else if (key == "grid_step") {
    c.grid_step = parse_number<double>(value, key, where);
  } else if (key == "d_factor_samples") {
    s.d_factor_samples = parse_number<std::size_t>(value, key, where);
  } else if (key == "order_factor") {
    if (value == "grid") {
      s.order_method = OrderFactorMethod::kQuadrature;
    } else if (value == "monte_carlo") {
      s.order_method = OrderFactorMethod::kMonteCarlo;
    } else {
      throw ValidationError(
          fmt::format("{}: order_factor must be 'grid' or 'monte_carlo', got '{}'", where, value));
    }
  } else if (key == "seed") {
    s.master_seed = parse_number<std::uint64_t>(value, key, where);
  } else if (key == "grouping_scheme") {
    c.grouping_scheme = value;
  } else if (key == "epsilon_floor") {
    c.read.epsilon_floor = parse_number<double>(value, key, where);
  } else if (key == "initial_step") {
    s.initial_step = parse_number<double>(value, key, where);
  } else if (key == "workers") {
    s.workers = parse_number<int>(value, key, where);
  } else {
    throw ValidationError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

void apply_config(RunConfig& config, std::span<const KeyValue> values, const std::string& source) {
  for (const auto& kv : values) {
    apply_config_value(config, kv.key, kv.value, fmt::format("{}:{}", source, kv.line));
  }
}

std::string describe_config(const RunConfig& c) {
  const auto& s = c.sampler;
  std::string out;
  auto line = [&](const char* k, const std::string& v) { out += fmt::format("{} = {}\n", k, v); };
  line("chains", std::to_string(s.num_chains));
  line("iterations", std::to_string(s.num_iterations));
  line("burn_in", std::to_string(s.burn_in));
  line("thinning", std::to_string(s.thinning));
  line("adapt_until", std::to_string(s.adaptation_end()));
  line("omega", format_double(s.prior.dirichlet_weight));
  line("upper_bound_c", format_double(s.prior.uniform_upper));
  line("fdr_target", format_double(c.fdr_target));
  line("grid_step", format_double(c.grid_step));
  line("d_factor_samples", std::to_string(s.d_factor_samples));
  line("order_factor", s.order_method == OrderFactorMethod::kQuadrature ? "grid" : "monte_carlo");
  line("seed", std::to_string(s.master_seed));
  line("grouping_scheme", c.grouping_scheme);
  line("epsilon_floor", format_double(c.read.epsilon_floor));
  line("initial_step", format_double(s.initial_step));
  return out;
}

std::vector<HypothesisGroupLabel> read_grouping_file(const std::filesystem::path& path,
                                                     int num_states) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  const auto hyps = enumerate_hypotheses(num_states);
  std::unordered_map<std::string, std::size_t> by_pattern;
  for (const auto& h : hyps) by_pattern.emplace(h.pattern(), h.index);

  std::vector<HypothesisGroupLabel> groups;
  std::vector<int> owner(hyps.size(), -1);
  std::string line;
  int line_no = 0;
  const std::string src = path.string();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim_copy(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      throw ValidationError(fmt::format("{}:{}: expected label, members and optional description",
                                        src, line_no));
    }
    HypothesisGroupLabel g;
    g.label = trim_copy(fields[0]);
    if (g.label.empty()) throw ValidationError(fmt::format("{}:{}: empty label", src, line_no));
    if (g.label == kResidualLabel) {
      throw ValidationError(fmt::format("{}:{}: label '{}' is reserved", src, line_no, g.label));
    }
    if (fields.size() == 3) g.description = trim_copy(fields[2]);
    for (const auto& raw : split(fields[1], ',')) {
      const std::string tok = trim_copy(raw);
      if (tok.empty()) continue;
      std::size_t h = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), h);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        const auto it = by_pattern.find(tok);
        if (it == by_pattern.end()) {
          throw ValidationError(fmt::format("{}:{}: unknown hypothesis '{}'", src, line_no, tok));
        }
        h = it->second;
      }
      if (h >= hyps.size()) {
        throw ValidationError(
            fmt::format("{}:{}: hypothesis {} out of range for {} states", src, line_no, h,
                        num_states));
      }
      if (owner[h] >= 0) {
        throw ValidationError(fmt::format("{}:{}: overlapping groups (hypothesis {})", src,
                                          line_no, h));
      }
      owner[h] = static_cast<int>(groups.size());
      g.members.push_back(h);
    }
    if (g.members.empty()) throw ValidationError(fmt::format("{}:{}: no members", src, line_no));
    std::sort(g.members.begin(), g.members.end());
    groups.push_back(std::move(g));
  }
  if (groups.empty()) throw ValidationError(fmt::format("{}: no groups", src));
  HypothesisGroupLabel rest;
  rest.label = std::string(kResidualLabel);
  rest.description = "hypotheses not listed";
  for (std::size_t h = 0; h < hyps.size(); ++h) {
    if (owner[h] < 0) rest.members.push_back(h);
  }
  if (!rest.members.empty()) groups.push_back(std::move(rest));
  return groups;
}

std::vector<HypothesisGroupLabel> resolve_grouping(const std::string& scheme, int num_states) {
  if (scheme == "none") return {};
  if (scheme == "table2") {
    if (num_states != 4) {
      throw ValidationError(
          fmt::format("grouping 'table2' needs 4 states, the dataset has {}", num_states));
    }
    const auto hyps = enumerate_hypotheses(4);
    const auto preds = table2_predicates();
    return collapse_by_predicate(hyps, preds);
  }
  return read_grouping_file(scheme, num_states);
}

FitOutcome run_fit(const RunConfig& config, const ExpressionDataset& data,
                   const std::filesystem::path& output_dir, const ProgressFn& progress) {
  config.validate();
  const int s = data.num_states();
  const auto groups = resolve_grouping(config.grouping_scheme, s);
  ensure_directory(output_dir);

  FitOutcome out;
  out.chains = run_chains(data, config.sampler, progress);
  out.summary = summarize(out.chains.traces);
  const auto hyps = enumerate_hypotheses(s);
  for (const auto& h : hyps) out.summary.column_labels.push_back(h.pattern());
  out.inference = calibrate_threshold(out.summary, config.fdr_target, config.grid_step);

  const auto& ids = data.gene_ids();
  const auto top = top_weight_columns(out.summary.phi_means, 10);
  for (const auto& t : out.chains.traces) {
    write_trace_tsv(output_dir / fmt::format("trace_chain{}.tsv", t.chain_index), t, top);
  }
  write_visits_tsv(output_dir / "visits.tsv", ids, out.chains.traces);
  write_convergence(output_dir / "convergence.txt", out.chains.convergence, out.chains.traces);
  write_posterior_tsv(output_dir / "posterior.tsv", ids, out.summary);
  write_inference_tsv(output_dir / "inference.tsv", ids, out.inference, modal_labels(hyps, groups));
  write_fdr_curve_tsv(output_dir / "fdr_curve.tsv", out.inference);
  std::vector<SummaryColumn> columns;
  for (const auto& h : hyps) columns.push_back({h.pattern(), h.group_string()});
  write_summary_txt(output_dir / "summary.txt", out.summary, out.inference, columns,
                    out.chains.convergence);
  {
    auto f = open_output(output_dir / "run_config.txt");
    f << describe_config(config);
    if (!f) throw IoError("failed writing run_config.txt");
  }

  if (!groups.empty()) {
    out.collapsed_summary = collapse_summary(out.summary, groups);
    out.collapsed = calibrate_threshold(*out.collapsed_summary, config.fdr_target, config.grid_step);
    std::vector<std::string> labels;
    std::vector<SummaryColumn> gcols;
    for (const auto& g : groups) {
      labels.push_back(g.label);
      gcols.push_back({g.label, g.description});
    }
    write_posterior_tsv(output_dir / "collapsed_posterior.tsv", ids, *out.collapsed_summary);
    write_inference_tsv(output_dir / "collapsed_inference.tsv", ids, *out.collapsed, labels);
    write_fdr_curve_tsv(output_dir / "collapsed_fdr_curve.tsv", *out.collapsed);
    write_summary_txt(output_dir / "collapsed_summary.txt", *out.collapsed_summary, *out.collapsed,
                      gcols, out.chains.convergence);
  }
  return out;
}

GlobalParams preset_params(const std::string& name) {
  if (name == "table3") return table3_preset();
  if (name == "strong") return strong_preset();
  throw ValidationError(fmt::format("unknown preset '{}' (expected table3 or strong)", name));
}

SimulatedData run_simulate(const SimulateOptions& options, const std::filesystem::path& dataset_path,
                           const std::filesystem::path& truth_path) {
  const GlobalParams params = preset_params(options.preset);
  auto rng = make_stream(options.seed, {tag(StreamPurpose::kSimulation)});
  SimulatedData sim = generate_dataset(params, options.num_genes, options.num_individuals, rng);
  write_expression_tsv(dataset_path, sim.data);
  write_truth_tsv(truth_path, sim.data.gene_ids(), sim.truth);
  return sim;
}

CoverageReport run_coverage(const CoverageConfig& config, const std::filesystem::path& report_path,
                            const std::optional<std::filesystem::path>& replicates_path,
                            const ReplicateDoneFn& done) {
  const CoverageReport report = coverage_experiment(config, done);
  write_coverage_tsv(report_path, report, config.truth);
  if (replicates_path) {
    write_replicates_tsv(*replicates_path, report,
                         global_parameter_names(config.truth.num_states()));
  }
  return report;
}

void run_diagnose(const ExpressionDataset& data, const DiagnoseOptions& options,
                  const std::filesystem::path& output_dir) {
  if (options.cv_state < 0 || options.cv_state > data.num_states()) {
    throw ValidationError(fmt::format("cv state {} out of range", options.cv_state));
  }
  const auto n = static_cast<std::size_t>(data.num_individuals());
  if (options.num_clusters < 1 || options.num_clusters > n) {
    throw ValidationError(
        fmt::format("cluster count {} must lie in [1, {}]", options.num_clusters, n));
  }
  std::vector<int> a = options.states_a;
  std::vector<int> b = options.states_b;
  if (a.empty() && b.empty()) {
    if (data.num_states() == 4) {
      a = {1, 3};
      b = {2, 4};
    } else if (data.num_states() >= 2) {
      a = {1};
      b = {2};
    }
  }
  // Single-state data has no default contrast.
  if (!a.empty() || !b.empty()) validate_state_sets(data, a, b);
  std::optional<LoadedInference> inf;
  if (options.inference) inf = read_inference_tsv(*options.inference);
  if (options.compare_a.has_value() != options.compare_b.has_value()) {
    throw ValidationError("discrepancies need both comparison results");
  }
  ensure_directory(output_dir);

  write_cv_ranks_tsv(output_dir / "cv_ranks.tsv",
                     cv_rank_table(data, options.cv_state - 1, options.filter_quantile));

  std::vector<EffectSizeReport> effects;
  std::vector<std::string> called;
  std::unordered_map<std::string, std::string> label_of;
  if (inf) {
    for (std::size_t g = 0; g < inf->gene_ids.size(); ++g) {
      label_of.emplace(inf->gene_ids[g],
                       inf->result.genes[g].selected ? inf->group_labels[g] : std::string("null"));
    }
  }
  if (!a.empty() || !b.empty()) {
    for (int g = 0; g < data.num_genes(); ++g) {
      try {
        effects.push_back(effect_size(data, g, a, b));
      } catch (const ValidationError&) {
        // zero pooled sd
        continue;
      }
      if (inf) {
        const auto it = label_of.find(effects.back().gene_id);
        called.push_back(it == label_of.end() ? std::string("NA") : it->second);
      }
    }
  }
  write_effect_sizes_tsv(output_dir / "effect_sizes.tsv", effects, called);

  const auto d = correlation_distance_matrix(data, options.log_scale);
  write_distances_tsv(output_dir / "individual_distances.tsv", data.individual_ids(), d);
  const auto merges = hierarchical_clustering(d, n, options.linkage);
  write_clusters_tsv(output_dir / "clusters.tsv", data.individual_ids(),
                     cut_tree(merges, n, options.num_clusters));
  write_merges_tsv(output_dir / "merges.tsv", merges);

  if (options.compare_a) {
    const auto la = read_inference_tsv(*options.compare_a);
    const auto lb = read_inference_tsv(*options.compare_b);
    const auto rep = discrepancy_report(la.gene_ids, la.result, lb.gene_ids, lb.result);
    write_discrepancies_tsv(output_dir / "discrepancies.tsv", rep, la.result.null_index,
                            lb.result.null_index);
  } else {
    write_discrepancies_tsv(output_dir / "discrepancies.tsv", DiscrepancyReport{}, 0, 0);
  }
}

DiscrepancyReport run_compare(const std::filesystem::path& a, const std::filesystem::path& b,
                              const std::optional<std::filesystem::path>& output) {
  const auto la = read_inference_tsv(a);
  const auto lb = read_inference_tsv(b);
  auto rep = discrepancy_report(la.gene_ids, la.result, lb.gene_ids, lb.result);
  if (output) write_discrepancies_tsv(*output, rep, la.result.null_index, lb.result.null_index);
  return rep;
}

}  // namespace manyhyp
