#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "manyhyp/commands.hpp"
#include "manyhyp/error.hpp"

namespace fs = std::filesystem;
using namespace manyhyp;

namespace {

// --burn-in style flags for every config key, applied after the config file.
struct ConfigFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    for (const char* key : config_keys()) {
      std::string flag = key;
      for (char& c : flag) {
        if (c == '_') c = '-';
      }
      options[key] = app->add_option("--" + flag, values[key], fmt::format("config key '{}'", key));
    }
  }

  void apply(RunConfig& config) const {
    for (const char* key : config_keys()) {
      if (options.at(key)->count() > 0) {
        apply_config_value(config, key, values.at(key), fmt::format("--{}", key));
      }
    }
  }
};

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string tok = s.substr(start, comma == std::string::npos ? comma : comma - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw ValidationError(fmt::format("{}: '{}' is not an integer list", what, s));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Individuals named by id or 1-based position.
std::vector<int> resolve_individuals(const ExpressionDataset& data,
                                     const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& name : names) {
    const auto& ids = data.individual_ids();
    const auto it = std::find(ids.begin(), ids.end(), name);
    if (it != ids.end()) {
      out.push_back(static_cast<int>(it - ids.begin()));
      continue;
    }
    const auto idx = parse_int_list(name, "--drop-individual");
    if (idx.size() != 1 || idx[0] < 1 || idx[0] > data.num_individuals()) {
      throw ValidationError(fmt::format("unknown individual '{}'", name));
    }
    out.push_back(idx[0] - 1);
  }
  return out;
}

RunConfig load_config(const std::string& path) {
  RunConfig config;
  if (!path.empty()) apply_config(config, read_key_values(path), path);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian testing of ordered-equality hypotheses across many genes"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  int workers = 0;
  app.add_option("--config", config_path, "key = value config file")->envname(kConfigEnvVar);
  app.add_option("--workers", workers, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);

  // fit
  auto* fit = app.add_subcommand("fit", "run the sampler and calibrate calls on a dataset");
  std::string fit_input;
  std::string fit_output;
  std::vector<std::string> fit_drop;
  bool fit_progress = false;
  fit->add_option("-i,--input", fit_input, "expression TSV")->required();
  fit->add_option("-o,--output", fit_output, "output directory")->required();
  fit->add_option("--drop-individual", fit_drop, "individual id or 1-based index to exclude");
  fit->add_flag("--progress", fit_progress, "report sampler progress on stderr");
  ConfigFlags fit_flags;
  fit_flags.attach(fit);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a dataset and its truth table");
  SimulateOptions sim_opts;
  std::string sim_output;
  std::string sim_truth;
  sim->add_option("--preset", sim_opts.preset, "table3 or strong")->capture_default_str();
  sim->add_option("--genes", sim_opts.num_genes)->capture_default_str();
  sim->add_option("--individuals", sim_opts.num_individuals)->capture_default_str();
  sim->add_option("--seed", sim_opts.seed)->capture_default_str();
  sim->add_option("-o,--output", sim_output, "dataset TSV")->required();
  sim->add_option("--truth", sim_truth, "truth TSV (default: <output stem>_truth.tsv)");

  // coverage
  auto* cov = app.add_subcommand("coverage", "repeat simulate + fit and report interval coverage");
  std::string cov_preset = "table3";
  int cov_replicates = 25;
  int cov_genes = 100;
  int cov_individuals = 13;
  std::string cov_output;
  std::string cov_replicate_output;
  bool cov_progress = false;
  cov->add_option("--preset", cov_preset, "table3 or strong")->capture_default_str();
  cov->add_option("--replicates", cov_replicates)->capture_default_str();
  cov->add_option("--genes", cov_genes)->capture_default_str();
  cov->add_option("--individuals", cov_individuals)->capture_default_str();
  cov->add_option("-o,--output", cov_output, "coverage TSV")->required();
  cov->add_option("--replicate-output", cov_replicate_output, "per-replicate TSV");
  cov->add_flag("--progress", cov_progress, "report finished replicates on stderr");
  ConfigFlags cov_flags;
  cov_flags.attach(cov);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "CV ranks, effect sizes and individual clustering");
  DiagnoseOptions diag_opts;
  std::string diag_input;
  std::string diag_output;
  std::string diag_a;
  std::string diag_b;
  std::string diag_linkage = "average";
  std::string diag_inference;
  std::string diag_cmp_a;
  std::string diag_cmp_b;
  double diag_floor = 0.0;
  diag->add_option("-i,--input", diag_input, "expression TSV")->required();
  diag->add_option("-o,--output", diag_output, "output directory")->required();
  diag->add_option("--cv-state", diag_opts.cv_state, "1-based state for CV ranks, 0 pools all")
      ->capture_default_str();
  diag->add_option("--filter-quantile", diag_opts.filter_quantile,
                   "drop genes whose mean is below this quantile")
      ->capture_default_str();
  diag->add_flag("--log", diag_opts.log_scale, "correlate log expression");
  diag->add_option("--clusters", diag_opts.num_clusters)->capture_default_str();
  diag->add_option("--linkage", diag_linkage, "average, single or complete")->capture_default_str();
  diag->add_option("--states-a", diag_a, "comma-separated 1-based states");
  diag->add_option("--states-b", diag_b, "comma-separated 1-based states");
  diag->add_option("--inference", diag_inference, "inference.tsv labelling effect sizes");
  diag->add_option("--compare-a", diag_cmp_a, "first inference.tsv for discrepancies");
  diag->add_option("--compare-b", diag_cmp_b, "second inference.tsv for discrepancies");
  diag->add_option("--epsilon-floor", diag_floor, "raise values below this instead of rejecting");

  // compare
  auto* cmp = app.add_subcommand("compare", "discrepancies between two inference.tsv files");
  std::string cmp_a;
  std::string cmp_b;
  std::string cmp_output;
  cmp->add_option("a", cmp_a, "first inference.tsv")->required();
  cmp->add_option("b", cmp_b, "second inference.tsv")->required();
  cmp->add_option("-o,--output", cmp_output, "discrepancy TSV");

  // hypotheses
  auto* hyp = app.add_subcommand("hypotheses", "print the hypothesis enumeration as TSV");
  int hyp_states = 4;
  std::string hyp_grouping = "none";
  hyp->add_option("-s,--states", hyp_states)->capture_default_str();
  hyp->add_option("--grouping", hyp_grouping, "none, table2 or a grouping file")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty() && !fs::is_regular_file(config_path)) {
      throw IoError(fmt::format("config file '{}' not found", config_path));
    }

    if (fit->parsed()) {
      RunConfig config = load_config(config_path);
      fit_flags.apply(config);
      if (workers > 0) config.sampler.workers = workers;
      config.validate();
      ExpressionDataset data = read_expression_tsv(fs::path(fit_input), config.read);
      if (!fit_drop.empty()) data = data.without_individuals(resolve_individuals(data, fit_drop));
      ProgressFn progress;
      if (fit_progress) {
        progress = [](int chain, std::int64_t it) {
          if (it % 500 == 0) fmt::print(stderr, "chain {} iteration {}\n", chain, it);
        };
      }
      const FitOutcome out = run_fit(config, data, fit_output, progress);
      fmt::print("genes = {}\n", data.num_genes());
      fmt::print("hypotheses = {}\n", out.summary.num_hypotheses);
      fmt::print("k_star = {}\n", format_double(out.inference.threshold));
      fmt::print("num_selected = {}\n", out.inference.num_selected());
      fmt::print("converged = {}\n", out.chains.convergence.converged());
      if (out.collapsed) {
        fmt::print("collapsed_k_star = {}\n", format_double(out.collapsed->threshold));
        fmt::print("collapsed_num_selected = {}\n", out.collapsed->num_selected());
      }
      if (!out.chains.convergence.converged()) {
        fmt::print(stderr, "warning: chains have not converged (see convergence.txt)\n");
      }
      if (out.inference.warning) {
        fmt::print(stderr, "warning: no threshold reaches the target FDR with a non-empty "
                           "selection\n");
      }
    } else if (sim->parsed()) {
      fs::path truth = sim_truth;
      if (truth.empty()) {
        const fs::path out(sim_output);
        truth = out.parent_path() / (out.stem().string() + "_truth.tsv");
      }
      const SimulatedData s = run_simulate(sim_opts, sim_output, truth);
      fmt::print("genes = {}\nstates = {}\nindividuals = {}\ntruth = {}\n", s.data.num_genes(),
                 s.data.num_states(), s.data.num_individuals(), truth.string());
    } else if (cov->parsed()) {
      RunConfig config = load_config(config_path);
      cov_flags.apply(config);
      if (workers > 0) config.sampler.workers = workers;
      config.validate();
      CoverageConfig cc;
      cc.truth = preset_params(cov_preset);
      cc.num_datasets = cov_replicates;
      cc.num_genes = cov_genes;
      cc.num_individuals = cov_individuals;
      cc.sampler = config.sampler;
      cc.fdr_target = config.fdr_target;
      cc.grid_step = config.grid_step;
      cc.seed = config.sampler.master_seed;
      cc.workers = config.sampler.workers;
      ReplicateDoneFn done;
      if (cov_progress) done = [](int r) { fmt::print(stderr, "replicate {} done\n", r); };
      std::optional<fs::path> reps;
      if (!cov_replicate_output.empty()) reps = cov_replicate_output;
      const CoverageReport rep = run_coverage(cc, cov_output, reps, done);
      for (const auto& p : rep.params) {
        fmt::print("{}: mean {:.4f} sd {:.4f} coverage {:.1f}%\n", p.name, p.mean_of_means,
                   p.sd_of_means, p.coverage);
      }
      fmt::print("nonnull proportion: {:.4f} +- {:.4f}\n", rep.nonnull_mean, rep.nonnull_sd);
    } else if (diag->parsed()) {
      ReadOptions ro;
      ro.epsilon_floor = diag_floor;
      const ExpressionDataset data = read_expression_tsv(fs::path(diag_input), ro);
      diag_opts.linkage = parse_linkage(diag_linkage);
      if (!diag_a.empty()) diag_opts.states_a = parse_int_list(diag_a, "--states-a");
      if (!diag_b.empty()) diag_opts.states_b = parse_int_list(diag_b, "--states-b");
      if (!diag_inference.empty()) diag_opts.inference = diag_inference;
      if (!diag_cmp_a.empty()) diag_opts.compare_a = diag_cmp_a;
      if (!diag_cmp_b.empty()) diag_opts.compare_b = diag_cmp_b;
      run_diagnose(data, diag_opts, diag_output);
    } else if (cmp->parsed()) {
      std::optional<fs::path> out;
      if (!cmp_output.empty()) out = cmp_output;
      const DiscrepancyReport r = run_compare(cmp_a, cmp_b, out);
      fmt::print("genes_compared = {}\n", r.num_genes_compared);
      fmt::print("discrepancies = {}\n", r.num_discrepancies);
      fmt::print("nonnull_a = {}\nnonnull_b = {}\n", r.nonnull_a, r.nonnull_b);
      fmt::print("only_in_a = {}\nonly_in_b = {}\n", r.only_in_a.size(), r.only_in_b.size());
    } else if (hyp->parsed()) {
      if (hyp_states < 1 || hyp_states > kMaxStates) {
        throw ValidationError(fmt::format("states must lie in [1, {}]", kMaxStates));
      }
      const auto hyps = enumerate_hypotheses(hyp_states);
      const auto groups = resolve_grouping(hyp_grouping, hyp_states);
      write_hypothesis_table(std::cout, hyps, groups);
    }
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical failure: {}\n", e.what());
    return 3;
  } catch (const IoError& e) {
    fmt::print(stderr, "i/o error: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return 1;
  }
  return 0;
}
