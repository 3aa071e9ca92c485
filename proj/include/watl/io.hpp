#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "watl/simulation.hpp"
#include "watl/study.hpp"
#include "watl/transfer.hpp"

namespace watl {

enum class ResponseKind { quantile_grid, samples };

struct StudySpec {
  std::string label;
  StudyRole role = StudyRole::source;
  std::string covariates_path;  // relative to the manifest directory
  std::string responses_path;
  ResponseKind kind = ResponseKind::quantile_grid;
  std::optional<double> support_lo;
  std::optional<double> support_hi;
};

struct DatasetManifest {
  std::vector<StudySpec> studies;  // exactly one target
  static DatasetManifest load(const std::filesystem::path& path);
};

struct Dataset {
  Study target;
  std::vector<Study> sources;
  double target_lo = -std::numeric_limits<double>::infinity();
  double target_hi = std::numeric_limits<double>::infinity();
};

// Parses the manifest and every referenced CSV. Covariates: header row plus
// one numeric row per unit. Quantile responses: header row plus one row of
// M nondecreasing values per unit (violations beyond 1e-9 are rejected,
// smaller ones repaired); column j holds the value at node (j+0.5)/M.
// Samples: long format `unit_id,value` with 1-based unit ids covering every
// covariate row. Errors carry file and line context.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes a dataset back out as manifest + CSVs; inverse of load_dataset.
void save_dataset(const std::filesystem::path& directory, const Dataset& data,
                  const std::string& manifest_name = "manifest.json");

// Query covariates: header row plus one numeric row per query point, with
// exactly `expected_cols` columns.
std::vector<std::vector<double>> load_query_csv(
    const std::filesystem::path& path, std::size_t expected_cols);

// Write-temp-then-rename; the destination is never observed half-written.
void write_atomic(const std::filesystem::path& path,
                  const std::string& content);

// Report serialization. Output text is fully determined by the report
// contents; runtime diagnostics are deliberately omitted so reruns are
// byte-identical. Non-finite numbers serialize as null (JSON) or an empty
// field (CSV).
std::string experiment_reports_to_json(
    const std::vector<ExperimentReport>& reports);
std::string experiment_reports_to_csv(
    const std::vector<ExperimentReport>& reports);

// Per-query prediction rows: covariate columns echoed first, then the M
// grid values.
std::string predictions_to_csv(const std::vector<std::vector<double>>& queries,
                               const std::vector<FitReport>& reports);

struct FitRunInfo {
  RegressionMode mode = RegressionMode::global;
  bool adaptive = false;
  double lambda = 0.0;
  std::optional<std::size_t> informative_count;
  std::optional<double> bandwidth;
  std::vector<CvPoint> cv_trace;
};

// FitReport JSON: run settings, cross-validation trace, and per-query
// discrepancies, selections (1-based source indices plus labels), and
// diagnostics.
std::string fit_reports_to_json(const FitRunInfo& info,
                                const std::vector<std::vector<double>>& queries,
                                const std::vector<FitReport>& reports,
                                const std::vector<std::string>& source_labels);

// %.17g; round-trips doubles exactly.
std::string format_double(double x);

}  // namespace watl
