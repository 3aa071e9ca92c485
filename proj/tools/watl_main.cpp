#include <CLI11.hpp>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "watl/errors.hpp"
#include "watl/io.hpp"
#include "watl/parallel.hpp"
#include "watl/selfcheck.hpp"
#include "watl/simulation.hpp"
#include "watl/transfer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  return parts;
}

std::vector<double> parse_double_list(const std::string& s, const char* flag) {
  std::vector<double> out;
  for (const std::string& item : split_list(s)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "'" + item + "' is not a number");
    }
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s,
                                         const char* flag) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(s)) {
    try {
      long long v = std::stoll(item);
      if (v < 0) throw std::invalid_argument("negative");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "'" + item + "' is not a nonnegative integer");
    }
  }
  return out;
}

struct SimulateArgs {
  std::size_t k = 5;
  std::string n0_list = "200";
  std::size_t tau = 100;
  std::string psi;
  std::string source_sizes;
  std::size_t reps = 50;
  std::uint64_t seed = 1;
  std::size_t grid_size = 100;
  std::size_t n_eval = 100;
  std::string estimators = "watl,only_target";
  std::string lambda = "auto";
  std::size_t informative = 2;
  std::size_t cv_folds = 5;
  std::size_t threads = 0;
  std::string out;
};

int run_simulate(const SimulateArgs& args) {
  std::vector<std::size_t> n0_cells = parse_size_list(args.n0_list, "--n0");
  if (n0_cells.empty()) throw CLI::ValidationError("--n0", "empty list");

  std::vector<double> psi = parse_double_list(args.psi, "--psi");
  if (psi.size() != args.k)
    throw CLI::ValidationError("--psi",
                               "need exactly --k similarity parameters");

  std::vector<watl::Estimator> estimators;
  for (const std::string& name : split_list(args.estimators)) {
    auto est = watl::estimator_from_name(name);
    if (!est)
      throw CLI::ValidationError("--estimators", "unknown estimator '" + name +
                                                     "'");
    estimators.push_back(*est);
  }

  std::optional<double> lambda;
  if (args.lambda == "theory") {
    // resolved per cell below, since it depends on n0
  } else if (args.lambda != "auto") {
    try {
      lambda = std::stod(args.lambda);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--lambda",
                                 "expected 'auto', 'theory', or a number");
    }
  }

  std::vector<watl::ExperimentReport> reports;
  std::size_t failed_reps = 0;
  for (std::size_t n0 : n0_cells) {
    watl::SimConfig cfg;
    cfg.num_sources = args.k;
    cfg.n0 = n0;
    cfg.tau = args.tau;
    if (!args.source_sizes.empty())
      cfg.source_sizes = parse_size_list(args.source_sizes, "--source-sizes");
    cfg.psi = psi;
    cfg.reps = args.reps;
    cfg.n_eval = args.n_eval;
    cfg.seed = args.seed;
    cfg.grid_size = args.grid_size;
    cfg.estimators = estimators;
    cfg.lambda = args.lambda == "theory"
                     ? std::optional<double>(watl::theory_lambda(n0))
                     : lambda;
    cfg.informative_count = args.informative;
    cfg.cv_folds = args.cv_folds;
    cfg.threads = args.threads;
    reports.push_back(watl::run_experiment(cfg));
    for (const watl::RepRecord& rec : reports.back().records)
      if (rec.failed) ++failed_reps;
    std::cout << "cell n0=" << n0 << " done in "
              << reports.back().runtime_seconds << " s\n";
  }

  watl::write_atomic(args.out + ".json",
                     watl::experiment_reports_to_json(reports));
  watl::write_atomic(args.out + ".csv",
                     watl::experiment_reports_to_csv(reports));
  std::cout << "wrote " << args.out << ".json and " << args.out << ".csv\n";
  if (failed_reps > 0) {
    std::cerr << "numerical error: " << failed_reps
              << " replication(s) failed; see the error records in the JSON "
                 "report\n";
    return kExitNumerical;
  }
  return kExitOk;
}

struct FitArgs {
  std::string manifest;
  std::string query;
  std::string mode = "global";
  bool adaptive = false;
  std::string lambda = "auto";
  std::string informative = "auto";
  std::string bandwidth = "auto";
  std::size_t grid_size = 500;
  std::size_t cv_folds = 5;
  std::uint64_t seed = 0;
  double ridge = -1.0;  // negative -> default policy
  bool shared_set = false;
  std::string out;
};

int run_fit_predict(const FitArgs& args) {
  if (!args.adaptive && args.informative != "auto")
    throw CLI::ValidationError("--l", "requires --adaptive");
  if (args.mode != "local" && args.bandwidth != "auto")
    throw CLI::ValidationError("--bandwidth", "only applies to --mode local");

  watl::Dataset data = watl::load_dataset(args.manifest);

  watl::TransferConfig cfg;
  cfg.mode = args.mode == "local" ? watl::RegressionMode::local
                                  : watl::RegressionMode::global;
  cfg.grid_size = args.grid_size;
  cfg.cv_folds = args.cv_folds;
  cfg.seed = args.seed;
  cfg.support_lo = data.target_lo;
  cfg.support_hi = data.target_hi;
  cfg.shared_informative_set = args.shared_set;
  if (args.ridge >= 0.0) cfg.ridge = args.ridge;

  if (cfg.mode == watl::RegressionMode::local && data.target.p() != 1) {
    std::cerr << "error: local mode supports scalar predictors only "
                 "(got p = "
              << data.target.p() << ")\n";
    return kExitUsage;
  }

  // Query covariates share the dataset's column convention.
  std::vector<std::vector<double>> queries =
      watl::load_query_csv(args.query, data.target.p());

  const std::size_t K = data.sources.size();
  const bool lambda_auto = args.lambda == "auto";
  const bool l_auto = args.informative == "auto";
  const bool h_auto = args.bandwidth == "auto";

  if (args.lambda == "theory") {
    cfg.lambda = watl::theory_lambda(data.target.n());
  } else if (!lambda_auto) {
    cfg.lambda = std::stod(args.lambda);
  }
  if (args.adaptive && !l_auto) {
    long long l = std::stoll(args.informative);
    if (l < 0 || static_cast<std::size_t>(l) > K)
      throw CLI::ValidationError("--l", "must lie in 0..K");
    cfg.informative_count = static_cast<std::size_t>(l);
  }
  if (cfg.mode == watl::RegressionMode::local && !h_auto)
    cfg.kernel.h = std::stod(args.bandwidth);

  watl::FitRunInfo info;
  info.mode = cfg.mode;
  info.adaptive = args.adaptive;

  const bool need_cv =
      lambda_auto || (args.adaptive && l_auto) ||
      (cfg.mode == watl::RegressionMode::local && h_auto);
  if (need_cv) {
    std::vector<std::size_t> l_grid;
    if (args.adaptive) {
      if (l_auto) {
        for (std::size_t l = 0; l <= K; ++l) l_grid.push_back(l);
      } else {
        l_grid.push_back(cfg.informative_count);
      }
    }
    std::vector<double> lam_grid =
        lambda_auto ? watl::default_lambda_grid()
                    : std::vector<double>{cfg.lambda};
    std::vector<double> h_grid;
    if (cfg.mode == watl::RegressionMode::local) {
      h_grid = h_auto ? watl::default_bandwidth_grid(data.target)
                      : std::vector<double>{cfg.kernel.h};
    }
    watl::TransferConfig cv_cfg = cfg;
    cv_cfg.lambda_grid = lam_grid;
    if (!h_grid.empty()) cv_cfg.kernel.h = h_grid.front();
    watl::CvResult cv = watl::cross_validate(data.target, data.sources,
                                             queries, cv_cfg, l_grid, h_grid);
    cfg.lambda = cv.lambda;
    if (args.adaptive && cv.informative_count)
      cfg.informative_count = *cv.informative_count;
    if (cv.bandwidth) cfg.kernel.h = *cv.bandwidth;
    info.cv_trace = cv.trace;
  }

  info.lambda = cfg.lambda;
  if (args.adaptive) info.informative_count = cfg.informative_count;
  if (cfg.mode == watl::RegressionMode::local) info.bandwidth = cfg.kernel.h;

  std::vector<watl::FitReport> reports =
      args.adaptive
          ? watl::awatl_predict_batch(data.target, data.sources, queries, cfg)
          : watl::watl_predict_batch(data.target, data.sources, queries, cfg);

  std::vector<std::string> labels;
  for (const watl::Study& s : data.sources) labels.push_back(s.label());

  watl::write_atomic(args.out + ".csv",
                     watl::predictions_to_csv(queries, reports));
  watl::write_atomic(args.out + ".json",
                     watl::fit_reports_to_json(info, queries, reports, labels));
  std::cout << "wrote " << args.out << ".csv and " << args.out << ".json\n";
  return kExitOk;
}

int run_selftest(std::uint64_t seed, const std::string& inject) {
  watl::selfcheck::FastCheckOptions options;
  options.seed = seed;
  options.inject_grid_fault = inject == "grid-corruption";
  auto results = watl::selfcheck::run_fast_checks(options);
  int failures = 0;
  for (const auto& r : results) {
    std::cout << (r.ok ? "[ok]   " : "[FAIL] ") << r.name;
    if (!r.ok) {
      std::cout << " -- " << r.detail;
      ++failures;
    }
    std::cout << "\n";
  }
  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Distributional regression with transfer across studies: "
      "quantile-function responses, Wasserstein geometry, adaptive source "
      "selection."};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run the synthetic benchmark and write JSON + CSV reports");
  simulate->add_option("--k", sim.k, "Number of sources");
  simulate->add_option("--n0", sim.n0_list,
                       "Target sample size(s), comma separated");
  simulate->add_option("--tau", sim.tau, "Source size unit (n_k = k*tau)");
  simulate->add_option("--psi", sim.psi, "Comma list of K similarity values")
      ->required();
  simulate->add_option("--source-sizes", sim.source_sizes,
                       "Explicit comma list of K source sizes (overrides --tau)");
  simulate->add_option("--reps", sim.reps, "Replication count");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--grid-size", sim.grid_size, "Quadrature grid size M");
  simulate->add_option("--n-eval", sim.n_eval, "Evaluation query points");
  simulate->add_option("--estimators", sim.estimators,
                       "Comma list from: watl,awatl,only_target,only_source,pooled");
  simulate->add_option(
      "--lambda", sim.lambda,
      "'auto' (five-fold CV), 'theory' (n0^(-0.45)), or a fixed value");
  simulate->add_option("--l", sim.informative,
                       "Informative-set size for the adaptive estimator");
  simulate->add_option("--cv-folds", sim.cv_folds, "CV fold count");
  simulate->add_option("--threads", sim.threads,
                       "Worker threads (0 = WATL_THREADS or hardware)");
  simulate->add_option("--out", sim.out, "Output path prefix")->required();

  FitArgs fit;
  CLI::App* fit_predict = app.add_subcommand(
      "fit-predict", "Fit on a dataset manifest and predict at query points");
  fit_predict->add_option("--manifest", fit.manifest, "Dataset manifest JSON")
      ->required();
  fit_predict->add_option("--query", fit.query, "CSV of query covariates")
      ->required();
  fit_predict->add_option("--mode", fit.mode, "global or local")
      ->check(CLI::IsMember({"global", "local"}));
  fit_predict->add_flag("--adaptive", fit.adaptive,
                        "Select informative sources per query point");
  fit_predict->add_option("--lambda", fit.lambda,
                          "'auto', 'theory', or a fixed value");
  fit_predict->add_option("--l", fit.informative,
                          "'auto' or a fixed informative-set size");
  fit_predict->add_option("--bandwidth", fit.bandwidth,
                          "'auto' or a fixed bandwidth (local mode)");
  fit_predict->add_option("--grid-size", fit.grid_size,
                          "Grid size for sample-mode responses");
  fit_predict->add_option("--cv-folds", fit.cv_folds, "CV fold count");
  fit_predict->add_option("--seed", fit.seed, "CV fold seed");
  fit_predict->add_option("--ridge", fit.ridge,
                          "Covariance ridge (negative = default policy)");
  fit_predict->add_flag("--shared-set", fit.shared_set,
                        "One informative set for the whole query batch");
  fit_predict->add_option("--out", fit.out, "Output path prefix")->required();

  std::uint64_t selftest_seed = 20240801;
  std::string inject;
  CLI::App* selftest =
      app.add_subcommand("selftest", "Run the fast acceptance checks");
  selftest->add_option("--seed", selftest_seed, "Check seed");
  selftest->add_option("--inject", inject,
                       "Test hook: 'grid-corruption' forces a failure")
      ->check(CLI::IsMember({"grid-corruption"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (fit_predict->parsed()) return run_fit_predict(fit);
    if (selftest->parsed()) return run_selftest(selftest_seed, inject);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const watl::parse_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const watl::singular_matrix_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const watl::degenerate_window_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
