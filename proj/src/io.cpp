#include "watl/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "watl/errors.hpp"
#include "watl/wasserstein.hpp"

namespace watl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::filesystem::path& file, std::size_t line,
                       const std::string& message) {
  throw parse_error(file.string() + ":" + std::to_string(line) + ": " +
                    message);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    std::size_t a = cell.find_first_not_of(" \t\r");
    std::size_t b = cell.find_last_not_of(" \t\r");
    cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_number(const std::string& cell, const std::filesystem::path& file,
                    std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    fail(file, line, "expected a number, got '" + cell + "'");
  if (!std::isfinite(value)) fail(file, line, "non-finite value");
  return value;
}

Table read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw parse_error(path.string() + ": cannot open file");
  Table table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (table.header.empty()) {
      table.header = cells;
      continue;
    }
    if (cells.size() != table.header.size())
      fail(path, lineno,
           "expected " + std::to_string(table.header.size()) + " columns, got " +
               std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) row.push_back(parse_number(cell, path, lineno));
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(lineno);
  }
  if (table.header.empty())
    throw parse_error(path.string() + ": empty file (missing header row)");
  return table;
}

std::vector<QuantileGrid> load_quantile_responses(
    const std::filesystem::path& path, std::size_t expected_rows,
    const GridPtr& grid, double lo, double hi) {
  Table table = read_numeric_csv(path);
  if (table.rows.size() != expected_rows)
    throw parse_error(path.string() + ": unit count mismatch: expected " +
                      std::to_string(expected_rows) + " rows, got " +
                      std::to_string(table.rows.size()));
  std::vector<QuantileGrid> responses;
  responses.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<double>& v = table.rows[r];
    if (v.size() != grid->size())
      fail(path, table.line_numbers[r],
           "expected " + std::to_string(grid->size()) + " grid columns");
    for (std::size_t j = 1; j < v.size(); ++j) {
      if (v[j] < v[j - 1] - 1e-9)
        fail(path, table.line_numbers[r],
             "quantile row not monotone nondecreasing at column " +
                 std::to_string(j + 1));
      if (v[j] < v[j - 1]) v[j] = v[j - 1];  // repair sub-tolerance jitter
    }
    try {
      responses.emplace_back(grid, std::move(v), lo, hi);
    } catch (const std::invalid_argument& e) {
      fail(path, table.line_numbers[r], e.what());
    }
  }
  return responses;
}

std::vector<std::vector<double>> load_sample_responses(
    const std::filesystem::path& path, std::size_t expected_rows) {
  Table table = read_numeric_csv(path);
  if (table.header.size() != 2)
    throw parse_error(path.string() +
                      ": sample files need exactly two columns (unit_id,value)");
  std::vector<std::vector<double>> samples(expected_rows);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    double id_raw = table.rows[r][0];
    double value = table.rows[r][1];
    if (id_raw < 1.0 || id_raw != std::floor(id_raw))
      fail(path, table.line_numbers[r], "unit_id must be a positive integer");
    std::size_t id = static_cast<std::size_t>(id_raw);
    if (id > expected_rows)
      fail(path, table.line_numbers[r],
           "unit_id " + std::to_string(id) + " exceeds the unit count " +
               std::to_string(expected_rows));
    samples[id - 1].push_back(value);
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].empty())
      throw parse_error(path.string() + ": unit " + std::to_string(i + 1) +
                        " has no observations");
  }
  return samples;
}

json json_double(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

std::string csv_double(double x) {
  return std::isfinite(x) ? format_double(x) : std::string();
}

json cv_trace_to_json(const std::vector<CvPoint>& trace) {
  json arr = json::array();
  for (const CvPoint& p : trace) {
    json entry;
    entry["lambda"] = p.lambda;
    if (p.informative_count) entry["l"] = *p.informative_count;
    if (p.bandwidth) entry["bandwidth"] = *p.bandwidth;
    entry["score"] = json_double(p.score);
    arr.push_back(entry);
  }
  return arr;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw parse_error(path.string() + ": cannot open manifest");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw parse_error(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.contains("studies") || !doc["studies"].is_array())
    throw parse_error(path.string() + ": manifest needs a 'studies' array");

  DatasetManifest manifest;
  std::size_t targets = 0;
  for (const json& s : doc["studies"]) {
    StudySpec spec;
    try {
      spec.label = s.at("label").get<std::string>();
      std::string role = s.at("role").get<std::string>();
      if (role == "target") {
        spec.role = StudyRole::target;
        ++targets;
      } else if (role == "source") {
        spec.role = StudyRole::source;
      } else {
        throw parse_error(path.string() + ": study '" + spec.label +
                          "': role must be 'target' or 'source'");
      }
      spec.covariates_path = s.at("covariates").get<std::string>();
      spec.responses_path = s.at("responses").get<std::string>();
      std::string kind = s.at("response_kind").get<std::string>();
      if (kind == "quantile_grid") {
        spec.kind = ResponseKind::quantile_grid;
      } else if (kind == "samples") {
        spec.kind = ResponseKind::samples;
      } else {
        throw parse_error(path.string() + ": study '" + spec.label +
                          "': response_kind must be 'quantile_grid' or 'samples'");
      }
      if (s.contains("support")) {
        const json& b = s["support"];
        if (b.contains("lo")) spec.support_lo = b["lo"].get<double>();
        if (b.contains("hi")) spec.support_hi = b["hi"].get<double>();
      }
    } catch (const json::exception& e) {
      throw parse_error(path.string() + ": malformed study entry: " + e.what());
    }
    manifest.studies.push_back(std::move(spec));
  }
  if (targets != 1)
    throw parse_error(path.string() + ": manifest must declare exactly one target");
  return manifest;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  DatasetManifest manifest = DatasetManifest::load(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();

  std::optional<Study> target;
  std::vector<Study> sources;
  double target_lo = -std::numeric_limits<double>::infinity();
  double target_hi = std::numeric_limits<double>::infinity();
  GridPtr grid;             // shared across quantile-mode studies
  std::optional<std::size_t> p;  // shared covariate dimension

  for (const StudySpec& spec : manifest.studies) {
    const std::filesystem::path cov_path = base / spec.covariates_path;
    const std::filesystem::path resp_path = base / spec.responses_path;

    Table cov = read_numeric_csv(cov_path);
    if (cov.rows.empty())
      throw parse_error(cov_path.string() + ": no data rows");
    if (p && cov.header.size() != *p)
      throw parse_error(cov_path.string() +
                        ": covariate dimension differs from other studies");
    p = cov.header.size();
    CovariateMatrix x = CovariateMatrix::from_rows(cov.rows);

    const double lo =
        spec.support_lo.value_or(-std::numeric_limits<double>::infinity());
    const double hi =
        spec.support_hi.value_or(std::numeric_limits<double>::infinity());
    if (!(lo <= hi))
      throw parse_error(manifest_path.string() + ": study '" + spec.label +
                        "': support lo exceeds hi");

    std::optional<Study> study;
    if (spec.kind == ResponseKind::quantile_grid) {
      if (!grid) {
        // Column count fixes M; nodes follow the midpoint convention.
        Table peek = read_numeric_csv(resp_path);
        if (peek.rows.empty())
          throw parse_error(resp_path.string() + ": no data rows");
        grid = make_grid(peek.header.size());
      }
      study.emplace(spec.label, spec.role, std::move(x),
                    load_quantile_responses(resp_path, cov.rows.size(), grid,
                                            lo, hi));
    } else {
      study.emplace(spec.label, spec.role, std::move(x),
                    load_sample_responses(resp_path, cov.rows.size()));
    }

    if (spec.role == StudyRole::target) {
      target = std::move(study);
      target_lo = lo;
      target_hi = hi;
    } else {
      sources.push_back(std::move(*study));
    }
  }
  return Dataset{std::move(*target), std::move(sources), target_lo, target_hi};
}

std::vector<std::vector<double>> load_query_csv(
    const std::filesystem::path& path, std::size_t expected_cols) {
  Table table = read_numeric_csv(path);
  if (table.header.size() != expected_cols)
    throw parse_error(path.string() + ": expected " +
                      std::to_string(expected_cols) +
                      " covariate columns, got " +
                      std::to_string(table.header.size()));
  if (table.rows.empty())
    throw parse_error(path.string() + ": no query rows");
  return table.rows;
}

void write_atomic(const std::filesystem::path& path,
                  const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

namespace {

void save_study(const std::filesystem::path& dir, const Study& study,
                const std::string& stem, json& manifest_entry) {
  std::ostringstream cov;
  for (std::size_t j = 0; j < study.p(); ++j)
    cov << (j ? "," : "") << "x" << (j + 1);
  cov << "\n";
  for (std::size_t i = 0; i < study.n(); ++i) {
    for (std::size_t j = 0; j < study.p(); ++j)
      cov << (j ? "," : "") << format_double(study.covariates()(i, j));
    cov << "\n";
  }
  write_atomic(dir / (stem + "_covariates.csv"), cov.str());
  manifest_entry["covariates"] = stem + "_covariates.csv";

  std::ostringstream resp;
  if (study.sample_mode()) {
    resp << "unit_id,value\n";
    for (std::size_t i = 0; i < study.n(); ++i)
      for (double y : study.samples()[i])
        resp << (i + 1) << "," << format_double(y) << "\n";
    manifest_entry["response_kind"] = "samples";
  } else {
    const std::size_t m = study.responses().front().size();
    for (std::size_t j = 0; j < m; ++j) resp << (j ? "," : "") << "q" << (j + 1);
    resp << "\n";
    for (const QuantileGrid& q : study.responses()) {
      for (std::size_t j = 0; j < m; ++j)
        resp << (j ? "," : "") << format_double(q.values()[j]);
      resp << "\n";
    }
    manifest_entry["response_kind"] = "quantile_grid";
  }
  write_atomic(dir / (stem + "_responses.csv"), resp.str());
  manifest_entry["responses"] = stem + "_responses.csv";
}

}  // namespace

void save_dataset(const std::filesystem::path& directory, const Dataset& data,
                  const std::string& manifest_name) {
  std::filesystem::create_directories(directory);
  json manifest;
  manifest["studies"] = json::array();

  json target_entry;
  target_entry["label"] = data.target.label();
  target_entry["role"] = "target";
  if (std::isfinite(data.target_lo) || std::isfinite(data.target_hi)) {
    json support;
    if (std::isfinite(data.target_lo)) support["lo"] = data.target_lo;
    if (std::isfinite(data.target_hi)) support["hi"] = data.target_hi;
    target_entry["support"] = support;
  }
  save_study(directory, data.target, "target", target_entry);
  manifest["studies"].push_back(target_entry);

  for (std::size_t k = 0; k < data.sources.size(); ++k) {
    json entry;
    entry["label"] = data.sources[k].label();
    entry["role"] = "source";
    save_study(directory, data.sources[k], "source_" + std::to_string(k + 1),
               entry);
    manifest["studies"].push_back(entry);
  }
  write_atomic(directory / manifest_name, manifest.dump(2) + "\n");
}

std::string experiment_reports_to_json(
    const std::vector<ExperimentReport>& reports) {
  json arr = json::array();
  for (const ExperimentReport& report : reports) {
    const SimConfig& cfg = report.config;
    json cell;
    cell["config"]["k"] = cfg.num_sources;
    cell["config"]["n0"] = cfg.n0;
    cell["config"]["tau"] = cfg.tau;
    if (!cfg.source_sizes.empty()) cell["config"]["source_sizes"] = cfg.source_sizes;
    cell["config"]["psi"] = cfg.psi;
    cell["config"]["reps"] = cfg.reps;
    cell["config"]["n_eval"] = cfg.n_eval;
    cell["config"]["seed"] = cfg.seed;
    cell["config"]["grid_size"] = cfg.grid_size;
    cell["config"]["lambda"] =
        cfg.lambda ? json(*cfg.lambda) : json("cv");
    cell["config"]["l"] = cfg.informative_count;
    cell["config"]["cv_folds"] = cfg.cv_folds;
    cell["completed_reps"] = report.completed_reps;

    json summaries = json::array();
    for (const EstimatorSummary& s : report.summaries) {
      json entry;
      entry["estimator"] = estimator_name(s.estimator);
      entry["mean_rmspr"] = json_double(s.mean_rmspr);
      entry["sd_rmspr"] = json_double(s.sd_rmspr);
      entry["mean_lambda"] = json_double(s.mean_lambda);
      summaries.push_back(entry);
    }
    cell["summaries"] = summaries;
    cell["selection_rates"] = report.selection_rates;
    cell["exact_selection_rate"] = report.exact_selection_rate;
    cell["pointwise_selection_rates"] = report.pointwise_selection_rates;
    cell["pointwise_exact_rate"] = report.pointwise_exact_rate;

    json records = json::array();
    for (const RepRecord& rec : report.records) {
      json entry;
      entry["rep"] = rec.rep;
      if (rec.failed) {
        entry["failed"] = true;
        entry["error"] = rec.error;
      } else {
        json rmspr = json::object();
        for (const EstimatorSummary& s : report.summaries)
          rmspr[estimator_name(s.estimator)] =
              json_double(rec.rmspr[static_cast<std::size_t>(s.estimator)]);
        entry["rmspr"] = rmspr;
        if (std::isfinite(rec.lambda_watl)) entry["lambda_watl"] = rec.lambda_watl;
        if (std::isfinite(rec.lambda_awatl))
          entry["lambda_awatl"] = rec.lambda_awatl;
        if (!rec.pointwise_selection_rate.empty()) {
          json selected = json::array();
          for (std::size_t k : rec.rep_selected) selected.push_back(k + 1);
          entry["selected"] = selected;  // 1-based
          entry["exact"] = rec.rep_exact;
          entry["pointwise_selection_rate"] = rec.pointwise_selection_rate;
          entry["pointwise_exact_rate"] = rec.pointwise_exact_rate;
        }
      }
      records.push_back(entry);
    }
    cell["records"] = records;
    arr.push_back(cell);
  }
  return arr.dump(2) + "\n";
}

std::string experiment_reports_to_csv(
    const std::vector<ExperimentReport>& reports) {
  std::size_t max_k = 0;
  for (const ExperimentReport& r : reports)
    max_k = std::max(max_k, r.config.num_sources);

  std::ostringstream out;
  out << "estimator,k,n0,tau,source_sizes,psi,reps,completed_reps,n_eval,"
         "grid_size,seed,lambda,mean_rmspr,sd_rmspr,mean_lambda,"
         "exact_selection_rate";
  for (std::size_t k = 1; k <= max_k; ++k) out << ",sel_rate_" << k;
  out << "\n";

  for (const ExperimentReport& report : reports) {
    const SimConfig& cfg = report.config;
    std::ostringstream sizes, psi;
    for (std::size_t k = 1; k <= cfg.num_sources; ++k)
      sizes << (k > 1 ? ";" : "") << cfg.source_size(k);
    for (std::size_t k = 0; k < cfg.psi.size(); ++k)
      psi << (k > 0 ? ";" : "") << format_double(cfg.psi[k]);

    for (const EstimatorSummary& s : report.summaries) {
      const bool adaptive = s.estimator == Estimator::awatl;
      out << estimator_name(s.estimator) << "," << cfg.num_sources << ","
          << cfg.n0 << "," << cfg.tau << "," << sizes.str() << "," << psi.str()
          << "," << cfg.reps << "," << report.completed_reps << ","
          << cfg.n_eval << "," << cfg.grid_size << "," << cfg.seed << ","
          << (cfg.lambda ? format_double(*cfg.lambda) : std::string("cv"))
          << "," << csv_double(s.mean_rmspr) << "," << csv_double(s.sd_rmspr)
          << "," << csv_double(s.mean_lambda) << ","
          << (adaptive ? csv_double(report.exact_selection_rate)
                       : std::string());
      for (std::size_t k = 0; k < max_k; ++k) {
        out << ",";
        if (adaptive && k < report.selection_rates.size())
          out << csv_double(report.selection_rates[k]);
      }
      out << "\n";
    }
  }
  return out.str();
}

std::string predictions_to_csv(const std::vector<std::vector<double>>& queries,
                               const std::vector<FitReport>& reports) {
  if (queries.size() != reports.size())
    throw std::invalid_argument("predictions_to_csv: length mismatch");
  std::ostringstream out;
  const std::size_t p = queries.empty() ? 0 : queries.front().size();
  const std::size_t m = reports.empty() ? 0 : reports.front().prediction.size();
  for (std::size_t j = 0; j < p; ++j) out << (j ? "," : "") << "x" << (j + 1);
  for (std::size_t j = 0; j < m; ++j)
    out << (p + j ? "," : "") << "q" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j)
      out << (j ? "," : "") << format_double(queries[i][j]);
    for (std::size_t j = 0; j < m; ++j)
      out << (p + j ? "," : "")
          << format_double(reports[i].prediction.values()[j]);
    out << "\n";
  }
  return out.str();
}

std::string fit_reports_to_json(const FitRunInfo& info,
                                const std::vector<std::vector<double>>& queries,
                                const std::vector<FitReport>& reports,
                                const std::vector<std::string>& source_labels) {
  json doc;
  doc["mode"] = info.mode == RegressionMode::global ? "global" : "local";
  doc["adaptive"] = info.adaptive;
  doc["lambda"] = info.lambda;
  if (info.informative_count) doc["l"] = *info.informative_count;
  if (info.bandwidth) doc["bandwidth"] = *info.bandwidth;
  if (!info.cv_trace.empty()) doc["cv_trace"] = cv_trace_to_json(info.cv_trace);

  json arr = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const FitReport& r = reports[i];
    json entry;
    entry["query"] = queries[i];
    entry["discrepancies"] = r.discrepancies;
    json selected = json::array();         // 1-based source indices
    json labels = json::array();
    for (std::size_t k : r.selected) {
      selected.push_back(k + 1);
      if (k < source_labels.size()) labels.push_back(source_labels[k]);
    }
    entry["selected"] = selected;
    entry["selected_labels"] = labels;
    entry["diagnostics"]["target_weight_residual"] =
        json_double(r.diagnostics.target_weight_residual);
    entry["diagnostics"]["source_weight_residuals"] = json::array();
    for (double v : r.diagnostics.source_weight_residuals)
      entry["diagnostics"]["source_weight_residuals"].push_back(json_double(v));
    json small = json::array();            // 1-based, like `selected`
    for (std::size_t k : r.diagnostics.small_sources) small.push_back(k + 1);
    entry["diagnostics"]["small_sources"] = small;
    arr.push_back(entry);
  }
  doc["queries"] = arr;
  return doc.dump(2) + "\n";
}

}  // namespace watl
