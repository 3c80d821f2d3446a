#include "manyhyp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>

#include "manyhyp/error.hpp"

namespace manyhyp {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// "s3_n12" -> (3, 12)
bool parse_column(std::string_view name, int& state, int& individual) {
  if (name.size() < 5 || name[0] != 's') return false;
  const auto sep = name.find("_n");
  if (sep == std::string_view::npos) return false;
  return parse_int(name.substr(1, sep - 1), state) && parse_int(name.substr(sep + 2), individual) &&
         state >= 1 && individual >= 1;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

void check_stream(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace

std::string format_double(double v) { return fmt::format("{}", v); }

ExpressionDataset read_expression_tsv(std::istream& in, const std::string& source,
                                      const ReadOptions& options) {
  if (!(options.epsilon_floor == 0.0 || options.epsilon_floor >= kMinExpression)) {
    throw ValidationError(fmt::format("epsilon floor must be 0 (off) or >= {}", kMinExpression));
  }
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ValidationError(fmt::format("{}: missing header", source));
  ++line_no;
  strip_cr(line);
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_tabs(line);
  if (header.empty() || header[0] != "gene_id") {
    throw ValidationError(fmt::format("{}:1: header must start with 'gene_id'", source));
  }
  std::vector<std::pair<int, int>> cols;
  int num_states = 0;
  int num_individuals = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    int s = 0;
    int j = 0;
    if (!parse_column(header[c], s, j)) {
      throw ValidationError(fmt::format("{}:1: column {} '{}' is not of the form s<i>_n<j>",
                                        source, c + 1, header[c]));
    }
    cols.emplace_back(s, j);
    num_states = std::max(num_states, s);
    num_individuals = std::max(num_individuals, j);
  }
  if (cols.empty()) throw ValidationError(fmt::format("{}:1: no expression columns", source));
  if (num_states > kMaxStates) {
    throw ValidationError(fmt::format("{}:1: {} states exceeds the limit of {}", source, num_states,
                                      kMaxStates));
  }
  const auto width = static_cast<std::size_t>(num_states * num_individuals);
  std::vector<int> slot(width, -1);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto at = static_cast<std::size_t>((cols[c].first - 1) * num_individuals +
                                             cols[c].second - 1);
    if (slot[at] >= 0) {
      throw ValidationError(fmt::format("{}:1: duplicate column '{}'", source, header[c + 1]));
    }
    slot[at] = static_cast<int>(c);
  }
  for (std::size_t at = 0; at < width; ++at) {
    if (slot[at] < 0) {
      throw ValidationError(fmt::format("{}:1: missing column s{}_n{}", source,
                                        at / static_cast<std::size_t>(num_individuals) + 1,
                                        at % static_cast<std::size_t>(num_individuals) + 1));
    }
  }

  std::vector<std::string> ids;
  std::vector<double> values;
  std::unordered_map<std::string, int> seen;
  std::vector<double> row(width);
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != header.size()) {
      throw ValidationError(fmt::format("{}:{}: expected {} fields, found {}", source, line_no,
                                        header.size(), fields.size()));
    }
    std::string id(trim(fields[0]));
    if (id.empty()) throw ValidationError(fmt::format("{}:{}: empty gene id", source, line_no));
    if (const auto it = seen.find(id); it != seen.end()) {
      throw ValidationError(fmt::format("{}:{}: duplicate gene id '{}' (first on line {})", source,
                                        line_no, id, it->second));
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto field = trim(fields[c + 1]);
      double v = 0.0;
      if (!parse_double(field, v) || !std::isfinite(v)) {
        throw ValidationError(fmt::format("{}:{}: gene '{}' column {}: cannot parse '{}' as a "
                                          "finite number",
                                          source, line_no, id, header[c + 1], field));
      }
      if (options.epsilon_floor > 0.0 && v >= 0.0 && v < options.epsilon_floor) {
        v = options.epsilon_floor;
      }
      if (v < kMinExpression) {
        throw ValidationError(fmt::format(
            "{}:{}: gene '{}' state {} individual {}: value {} is outside the Gamma support "
            "(must be >= {})",
            source, line_no, id, cols[c].first, cols[c].second, field, kMinExpression));
      }
      row[static_cast<std::size_t>((cols[c].first - 1) * num_individuals + cols[c].second - 1)] = v;
    }
    seen.emplace(id, line_no);
    ids.push_back(std::move(id));
    values.insert(values.end(), row.begin(), row.end());
  }
  if (in.bad()) throw IoError(fmt::format("{}: read failure", source));
  if (ids.empty()) throw ValidationError(fmt::format("{}: no gene rows", source));
  return ExpressionDataset(std::move(ids), num_states, num_individuals, std::move(values));
}

ExpressionDataset read_expression_tsv(const std::filesystem::path& path,
                                      const ReadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_expression_tsv(in, path.string(), options);
}

void write_expression_tsv(std::ostream& out, const ExpressionDataset& data) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "gene_id");
  for (int i = 1; i <= data.num_states(); ++i) {
    for (int j = 1; j <= data.num_individuals(); ++j) {
      fmt::format_to(std::back_inserter(buf), "\ts{}_n{}", i, j);
    }
  }
  buf.push_back('\n');
  for (int g = 0; g < data.num_genes(); ++g) {
    fmt::format_to(std::back_inserter(buf), "{}", data.gene_ids()[static_cast<std::size_t>(g)]);
    for (double v : data.gene(g)) fmt::format_to(std::back_inserter(buf), "\t{:.17g}", v);
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_expression_tsv(const std::filesystem::path& path, const ExpressionDataset& data) {
  auto out = open_output(path);
  write_expression_tsv(out, data);
  check_stream(out, path);
}

std::vector<KeyValue> parse_key_values(std::istream& in, const std::string& source) {
  std::vector<KeyValue> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(fmt::format("{}:{}: expected 'key = value'", source, line_no));
    }
    auto rest = t.substr(eq + 1);
    // A '#' after whitespace starts a trailing comment.
    for (std::size_t i = 1; i < rest.size(); ++i) {
      if (rest[i] == '#' && (rest[i - 1] == ' ' || rest[i - 1] == '\t')) {
        rest = rest.substr(0, i);
        break;
      }
    }
    KeyValue kv{std::string(trim(t.substr(0, eq))), std::string(trim(rest)), line_no};
    if (kv.key.empty()) throw ValidationError(fmt::format("{}:{}: empty key", source, line_no));
    for (const auto& prev : out) {
      if (prev.key == kv.key) {
        throw ValidationError(fmt::format("{}:{}: key '{}' already set on line {}", source,
                                          line_no, kv.key, prev.line));
      }
    }
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<KeyValue> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return parse_key_values(in, path.string());
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  return out;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError(fmt::format("cannot create directory '{}'", dir.string()));
  }
}

std::vector<std::size_t> top_weight_columns(std::span<const double> phi_means, std::size_t count) {
  std::vector<std::size_t> idx(phi_means.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return phi_means[a] > phi_means[b]; });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

void write_trace_tsv(const std::filesystem::path& path, const TraceSet& trace,
                     std::span<const std::size_t> phi_columns) {
  auto out = open_output(path);
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "iteration");
  for (const auto& n : global_parameter_names(trace.num_states)) fmt::format_to(it, "\t{}", n);
  for (std::size_t h : phi_columns) fmt::format_to(it, "\tphi_{}", h);
  buf.push_back('\n');
  for (std::size_t d = 0; d < trace.num_retained(); ++d) {
    fmt::format_to(it, "{}", trace.iterations[d]);
    for (std::size_t p = 0; p < trace.num_globals(); ++p) {
      fmt::format_to(it, "\t{}", trace.global(d, p));
    }
    for (std::size_t h : phi_columns) fmt::format_to(it, "\t{}", trace.weight(d, h));
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_stream(out, path);
}

void write_visits_tsv(const std::filesystem::path& path, std::span<const std::string> gene_ids,
                      std::span<const TraceSet> traces) {
  if (traces.empty()) throw ValidationError("no traces");
  const std::size_t h_count = traces[0].num_hypotheses;
  auto out = open_output(path);
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "gene_id");
  for (std::size_t h = 0; h < h_count; ++h) fmt::format_to(it, "\th{}", h);
  buf.push_back('\n');
  for (std::size_t g = 0; g < gene_ids.size(); ++g) {
    fmt::format_to(it, "{}", gene_ids[g]);
    for (std::size_t h = 0; h < h_count; ++h) {
      std::uint64_t n = 0;
      for (const auto& t : traces) n += t.visit(g, h);
      fmt::format_to(it, "\t{}", n);
    }
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_stream(out, path);
}

void write_convergence(const std::filesystem::path& path, const ConvergenceReport& report,
                       std::span<const TraceSet> traces) {
  auto out = open_output(path);
  fmt::print(out, "available = {}\n", report.available);
  fmt::print(out, "threshold = {}\n", format_double(report.threshold));
  fmt::print(out, "converged = {}\n", report.converged());
  fmt::print(out, "num_chains = {}\n", traces.size());
  for (std::size_t p = 0; p < report.names.size(); ++p) {
    fmt::print(out, "rhat.{} = {}\n", report.names[p], format_double(report.rhat[p]));
  }
  for (const auto& t : traces) {
    const auto names = global_parameter_names(t.num_states);
    fmt::print(out, "chain{}.retained = {}\n", t.chain_index, t.num_retained());
    for (std::size_t p = 0; p < names.size() && p < t.acceptance_rates.size(); ++p) {
      fmt::print(out, "chain{}.acceptance.{} = {}\n", t.chain_index, names[p],
                 format_double(t.acceptance_rates[p]));
    }
    for (std::size_t p = 0; p < names.size() && p < t.final_step_sizes.size(); ++p) {
      fmt::print(out, "chain{}.step.{} = {}\n", t.chain_index, names[p],
                 format_double(t.final_step_sizes[p]));
    }
  }
  check_stream(out, path);
}

void write_posterior_tsv(const std::filesystem::path& path, std::span<const std::string> gene_ids,
                         const PosteriorSummary& summary) {
  auto out = open_output(path);
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "gene_id");
  for (std::size_t h = 0; h < summary.num_hypotheses; ++h) {
    if (h < summary.column_labels.size()) {
      fmt::format_to(it, "\t{}", summary.column_labels[h]);
    } else {
      fmt::format_to(it, "\th{}", h);
    }
  }
  buf.push_back('\n');
  for (std::size_t g = 0; g < summary.num_genes; ++g) {
    fmt::format_to(it, "{}", gene_ids[g]);
    for (double p : summary.row(g)) fmt::format_to(it, "\t{}", p);
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_stream(out, path);
}

void write_inference_tsv(const std::filesystem::path& path, std::span<const std::string> gene_ids,
                         const InferenceResult& result,
                         std::span<const std::string> group_labels) {
  auto out = open_output(path);
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "gene_id\tmodal_index\tmodal_probability\tselected\tgroup_label\n");
  for (std::size_t g = 0; g < result.genes.size(); ++g) {
    const GeneCall& c = result.genes[g];
    const std::string label = c.modal_index < group_labels.size()
                                  ? group_labels[c.modal_index]
                                  : fmt::format("h{}", c.modal_index);
    fmt::format_to(it, "{}\t{}\t{}\t{}\t{}\n", gene_ids[g], c.modal_index,
                   c.modal_probability, c.selected ? 1 : 0, label);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_stream(out, path);
}

void write_fdr_curve_tsv(const std::filesystem::path& path, const InferenceResult& result) {
  auto out = open_output(path);
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "k\tfdr_estimate\tnum_selected\n");
  for (const auto& p : result.curve) {
    fmt::format_to(it, "{}\t{}\t{}\n", p.k, p.fdr, p.num_selected);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_stream(out, path);
}

void write_summary_txt(const std::filesystem::path& path, const PosteriorSummary& summary,
                       const InferenceResult& result, std::span<const SummaryColumn> columns,
                       const ConvergenceReport& convergence) {
  auto out = open_output(path);
  std::vector<std::size_t> called(summary.num_hypotheses, 0);
  for (std::size_t g = 0; g < result.genes.size(); ++g) {
    if (result.genes[g].selected) ++called[result.genes[g].modal_index];
  }
  fmt::print(out, "k_star = {}\n", format_double(result.threshold));
  fmt::print(out, "target_fdr = {}\n", format_double(result.target_fdr));
  fmt::print(out, "grid_step = {}\n", format_double(result.grid_step));
  const auto at_k = std::find_if(result.curve.begin(), result.curve.end(),
                                 [&](const FdrCurvePoint& p) { return p.k == result.threshold; });
  fmt::print(out, "fdr_at_k_star = {}\n",
             format_double(at_k == result.curve.end() ? 0.0 : at_k->fdr));
  fmt::print(out, "threshold_warning = {}\n", result.warning);
  fmt::print(out, "num_genes = {}\n", summary.num_genes);
  fmt::print(out, "num_selected = {}\n", result.num_selected());
  fmt::print(out, "num_draws = {}\n", summary.num_draws);
  fmt::print(out, "convergence_available = {}\n", convergence.available);
  fmt::print(out, "converged = {}\n", convergence.converged());
  for (std::size_t p = 0; p < summary.param_names.size(); ++p) {
    const auto& n = summary.param_names[p];
    fmt::print(out, "{}.mean = {}\n", n, format_double(summary.param_means[p]));
    fmt::print(out, "{}.q025 = {}\n", n, format_double(summary.param_quantiles[p][0]));
    fmt::print(out, "{}.q500 = {}\n", n, format_double(summary.param_quantiles[p][1]));
    fmt::print(out, "{}.q975 = {}\n", n, format_double(summary.param_quantiles[p][2]));
  }
  // One block per column: label, description, mean weight and genes called.
  for (std::size_t h = 0; h < summary.num_hypotheses; ++h) {
    const std::string label = h < columns.size() ? columns[h].label : fmt::format("h{}", h);
    fmt::print(out, "column.{}.label = {}\n", h, label);
    if (h < columns.size() && !columns[h].description.empty()) {
      fmt::print(out, "column.{}.description = {}\n", h, columns[h].description);
    }
    if (h < summary.phi_means.size()) {
      fmt::print(out, "column.{}.phi_mean = {}\n", h, format_double(summary.phi_means[h]));
    }
    const std::size_t n = h == result.null_index ? summary.num_genes - result.num_selected()
                                                 : called[h];
    fmt::print(out, "column.{}.num_genes = {}\n", h, n);
  }
  check_stream(out, path);
}

LoadedInference read_inference_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  const std::string source = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(fmt::format("{}: missing header", source));
  strip_cr(line);
  if (line != "gene_id\tmodal_index\tmodal_probability\tselected\tgroup_label") {
    throw ValidationError(fmt::format("{}:1: not an inference table", source));
  }
  LoadedInference r;
  r.result.null_index = std::numeric_limits<std::size_t>::max();
  int line_no = 1;
  std::unordered_map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 5) {
      throw ValidationError(
          fmt::format("{}:{}: expected 5 fields, found {}", source, line_no, f.size()));
    }
    GeneCall c;
    int sel = 0;
    if (!parse_int(f[1], c.modal_index) || !parse_double(f[2], c.modal_probability) ||
        !parse_int(f[3], sel) || (sel != 0 && sel != 1)) {
      throw ValidationError(fmt::format("{}:{}: malformed row", source, line_no));
    }
    c.selected = sel == 1;
    std::string id(f[0]);
    if (!seen.emplace(id, line_no).second) {
      throw ValidationError(fmt::format("{}:{}: duplicate gene id '{}'", source, line_no, id));
    }
    r.gene_ids.push_back(std::move(id));
    r.group_labels.emplace_back(f[4]);
    r.result.genes.push_back(c);
  }
  return r;
}

void write_truth_tsv(const std::filesystem::path& path, std::span<const std::string> gene_ids,
                     const SimulationTruth& truth) {
  const auto s = static_cast<std::size_t>(truth.true_params.num_states());
  const auto hyps = enumerate_hypotheses(static_cast<int>(s));
  auto out = open_output(path);
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "gene_id\ttrue_hypothesis_index\ttrue_pattern");
  for (std::size_t i = 1; i <= s; ++i) fmt::format_to(it, "\ttrue_mean_s{}", i);
  buf.push_back('\n');
  for (std::size_t g = 0; g < gene_ids.size(); ++g) {
    const std::size_t h = truth.assignments[g];
    fmt::format_to(it, "{}\t{}\t{}", gene_ids[g], h, hyps[h].pattern());
    for (std::size_t i = 0; i < s; ++i) fmt::format_to(it, "\t{}", truth.means[g * s + i]);
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_stream(out, path);
}

void write_coverage_tsv(const std::filesystem::path& path, const CoverageReport& report,
                        const GlobalParams& truth) {
  auto out = open_output(path);
  fmt::print(out, "parameter\ttrue_value\tmean_of_means\tsd_of_means\tcoverage_percent\n");
  for (const auto& p : report.params) {
    fmt::print(out, "{}\t{}\t{}\t{}\t{}\n", p.name, format_double(p.true_value),
               format_double(p.mean_of_means), format_double(p.sd_of_means),
               format_double(p.coverage));
  }
  const double nonnull = 1.0 - truth.mixture_weights.at(0);
  fmt::print(out, "nonnull_proportion\t{}\t{}\t{}\tNA\n", format_double(nonnull),
             format_double(report.nonnull_mean), format_double(report.nonnull_sd));
  fmt::print(out, "realized_fdp\tNA\t{}\tNA\tNA\n", format_double(report.fdp_mean));
  check_stream(out, path);
}

void write_replicates_tsv(const std::filesystem::path& path, const CoverageReport& report,
                          std::span<const std::string> param_names) {
  auto out = open_output(path);
  fmt::print(out, "replicate");
  for (const auto& n : param_names) fmt::print(out, "\t{0}.mean\t{0}.q025\t{0}.q975", n);
  fmt::print(out, "\tnum_selected\tnonnull_proportion\trealized_fdp\tconverged\n");
  for (std::size_t r = 0; r < report.replicates.size(); ++r) {
    const auto& o = report.replicates[r];
    fmt::print(out, "{}", r);
    for (std::size_t p = 0; p < param_names.size(); ++p) {
      fmt::print(out, "\t{}\t{}\t{}", format_double(o.posterior_means[p]),
                 format_double(o.intervals[p][0]), format_double(o.intervals[p][2]));
    }
    fmt::print(out, "\t{}\t{}\t{}\t{}\n", o.num_selected, format_double(o.nonnull_proportion),
               format_double(o.realized_fdp), o.converged ? 1 : 0);
  }
  check_stream(out, path);
}

void write_cv_ranks_tsv(const std::filesystem::path& path, std::span<const CvRankRow> rows) {
  auto out = open_output(path);
  fmt::print(out, "gene_id\tmean\tsd\tcv\tmean_rank\tsd_rank\tcv_rank\n");
  for (const auto& r : rows) {
    fmt::print(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.gene_id, format_double(r.mean),
               format_double(r.sd), format_double(r.cv), format_double(r.mean_rank),
               format_double(r.sd_rank), format_double(r.cv_rank));
  }
  check_stream(out, path);
}

void write_effect_sizes_tsv(const std::filesystem::path& path,
                            std::span<const EffectSizeReport> reports,
                            std::span<const std::string> called) {
  auto out = open_output(path);
  fmt::print(out, "gene_id\tstates_a\tstates_b\tmean_a\tmean_b\tpooled_sd\teffect\tcalled\n");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    fmt::print(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.gene_id, fmt::join(r.states_a, ","),
               fmt::join(r.states_b, ","), format_double(r.mean_a), format_double(r.mean_b),
               format_double(r.pooled_sd), format_double(r.effect),
               i < called.size() ? called[i] : std::string("NA"));
  }
  check_stream(out, path);
}

void write_distances_tsv(const std::filesystem::path& path, std::span<const std::string> ids,
                         std::span<const double> distances) {
  auto out = open_output(path);
  fmt::print(out, "individual");
  for (const auto& id : ids) fmt::print(out, "\t{}", id);
  fmt::print(out, "\n");
  for (std::size_t a = 0; a < ids.size(); ++a) {
    fmt::print(out, "{}", ids[a]);
    for (std::size_t b = 0; b < ids.size(); ++b) {
      fmt::print(out, "\t{}", format_double(distances[a * ids.size() + b]));
    }
    fmt::print(out, "\n");
  }
  check_stream(out, path);
}

void write_clusters_tsv(const std::filesystem::path& path, std::span<const std::string> ids,
                        std::span<const int> labels) {
  auto out = open_output(path);
  fmt::print(out, "individual\tcluster\n");
  for (std::size_t i = 0; i < ids.size(); ++i) fmt::print(out, "{}\t{}\n", ids[i], labels[i]);
  check_stream(out, path);
}

void write_merges_tsv(const std::filesystem::path& path, std::span<const Merge> merges) {
  auto out = open_output(path);
  fmt::print(out, "step\tleft\tright\theight\tsize\n");
  for (std::size_t k = 0; k < merges.size(); ++k) {
    fmt::print(out, "{}\t{}\t{}\t{}\t{}\n", k, merges[k].left, merges[k].right,
               format_double(merges[k].height), merges[k].size);
  }
  check_stream(out, path);
}

void write_discrepancies_tsv(const std::filesystem::path& path, const DiscrepancyReport& report,
                             std::size_t null_a, std::size_t null_b) {
  auto out = open_output(path);
  auto show = [](std::size_t c, std::size_t null) {
    return c == null ? std::string("null") : fmt::format("{}", c);
  };
  fmt::print(out, "gene_id\tcalled_a\tcalled_b\n");
  for (const auto& d : report.discrepancies) {
    fmt::print(out, "{}\t{}\t{}\n", d.gene_id, show(d.called_a, null_a), show(d.called_b, null_b));
  }
  check_stream(out, path);
}

void write_hypothesis_table(std::ostream& out, std::span<const Hypothesis> hypotheses,
                            std::span<const HypothesisGroupLabel> groups) {
  std::vector<std::string> label(hypotheses.size());
  for (const auto& g : groups) {
    for (std::size_t h : g.members) {
      if (h < label.size()) label[h] = g.label;
    }
  }
  fmt::print(out, "index\tnum_groups\tgroups\tpattern{}\n", groups.empty() ? "" : "\tgroup_label");
  for (const auto& h : hypotheses) {
    fmt::print(out, "{}\t{}\t{}\t{}", h.index, h.num_groups(), h.group_string(), h.pattern());
    if (!groups.empty()) fmt::print(out, "\t{}", label[h.index]);
    fmt::print(out, "\n");
  }
}

}  // namespace manyhyp
