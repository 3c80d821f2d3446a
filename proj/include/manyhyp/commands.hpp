#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "manyhyp/dataset.hpp"
#include "manyhyp/diagnostics.hpp"
#include "manyhyp/hypspace.hpp"
#include "manyhyp/inference.hpp"
#include "manyhyp/io.hpp"
#include "manyhyp/sampler.hpp"
#include "manyhyp/simulate.hpp"

namespace manyhyp {

inline constexpr const char* kConfigEnvVar = "MANYHYP_CONFIG";

struct RunConfig {
  SamplerConfig sampler;
  double fdr_target = 0.05;
  double grid_step = 0.001;
  // "none", "table2", or the path of a grouping file.
  std::string grouping_scheme = "none";
  ReadOptions read;

  void validate() const;
};

// Keys accepted in config files (and as --key-with-dashes flags).
std::span<const char* const> config_keys();

// Applies one key; unknown keys and malformed values throw ValidationError
// naming `where`.
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value,
                        const std::string& where);
void apply_config(RunConfig& config, std::span<const KeyValue> values, const std::string& source);

// Flat key = value dump of everything that affects results.
std::string describe_config(const RunConfig& config);

// Groups for a scheme name; empty for "none". Grouping files hold one group
// per line: label, comma-separated members (indices or patterns such as
// mu1=mu3<mu2=mu4) and an optional description, tab-separated. Unlisted
// hypotheses fall into a residual group.
std::vector<HypothesisGroupLabel> resolve_grouping(const std::string& scheme, int num_states);
std::vector<HypothesisGroupLabel> read_grouping_file(const std::filesystem::path& path,
                                                     int num_states);

struct FitOutcome {
  ChainsResult chains;
  PosteriorSummary summary;
  InferenceResult inference;
  std::optional<PosteriorSummary> collapsed_summary;
  std::optional<InferenceResult> collapsed;
};

// Runs the sampler, summarizes, calibrates (and collapses when a grouping is
// configured) and writes every artifact into output_dir.
FitOutcome run_fit(const RunConfig& config, const ExpressionDataset& data,
                   const std::filesystem::path& output_dir, const ProgressFn& progress = {});

// "table3" or "strong".
GlobalParams preset_params(const std::string& name);

struct SimulateOptions {
  std::string preset = "table3";
  int num_genes = 100;
  int num_individuals = 13;
  std::uint64_t seed = 1;
};

SimulatedData run_simulate(const SimulateOptions& options, const std::filesystem::path& dataset_path,
                           const std::filesystem::path& truth_path);

CoverageReport run_coverage(const CoverageConfig& config, const std::filesystem::path& report_path,
                            const std::optional<std::filesystem::path>& replicates_path,
                            const ReplicateDoneFn& done = {});

struct DiagnoseOptions {
  // 1-based state for the CV table; 0 pools all states.
  int cv_state = 0;
  double filter_quantile = 0.25;
  bool log_scale = false;
  std::size_t num_clusters = 2;
  Linkage linkage = Linkage::kAverage;
  // Empty picks {1,3} vs {2,4} for four states and {1} vs {2} otherwise.
  std::vector<int> states_a;
  std::vector<int> states_b;
  // inference.tsv whose calls label the effect-size rows.
  std::optional<std::filesystem::path> inference;
  // Two inference.tsv files for discrepancies.tsv; header only when absent.
  std::optional<std::filesystem::path> compare_a;
  std::optional<std::filesystem::path> compare_b;
};

void run_diagnose(const ExpressionDataset& data, const DiagnoseOptions& options,
                  const std::filesystem::path& output_dir);

DiscrepancyReport run_compare(const std::filesystem::path& a, const std::filesystem::path& b,
                              const std::optional<std::filesystem::path>& output);

}  // namespace manyhyp
