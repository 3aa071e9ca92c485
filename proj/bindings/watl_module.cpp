#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "watl/config.hpp"
#include "watl/frechet.hpp"
#include "watl/io.hpp"
#include "watl/normal.hpp"
#include "watl/simulation.hpp"
#include "watl/study.hpp"
#include "watl/transfer.hpp"
#include "watl/wasserstein.hpp"

namespace py = pybind11;
using namespace watl;

namespace {

// pybind11 holders must be non-const; the library's shared grids are
// shared_ptr<const ProbGrid>, so the boundary casts constness both ways.
using PyGridPtr = std::shared_ptr<ProbGrid>;

PyGridPtr to_mutable(const GridPtr& grid) {
  return std::const_pointer_cast<ProbGrid>(grid);
}

QuantileGrid make_quantile(const PyGridPtr& grid, std::vector<double> values,
                           double lo, double hi) {
  return QuantileGrid(grid, std::move(values), lo, hi);
}

py::dict report_to_dict(const FitReport& r) {
  py::dict d;
  d["prediction"] = r.prediction.values();
  d["f_hat"] = r.f_hat.values();
  d["f0_hat"] = r.f0_hat.values();
  d["discrepancies"] = r.discrepancies;
  d["selected"] = r.selected;
  d["lambda"] = r.lambda_used;
  d["target_weight_residual"] = r.diagnostics.target_weight_residual;
  d["source_weight_residuals"] = r.diagnostics.source_weight_residuals;
  d["small_sources"] = r.diagnostics.small_sources;
  return d;
}

py::dict experiment_to_dict(const ExperimentReport& rep) {
  py::dict d;
  py::dict summaries;
  for (const EstimatorSummary& s : rep.summaries) {
    py::dict entry;
    entry["mean_rmspr"] = s.mean_rmspr;
    entry["sd_rmspr"] = s.sd_rmspr;
    entry["mean_lambda"] = s.mean_lambda;
    summaries[estimator_name(s.estimator)] = entry;
  }
  d["summaries"] = summaries;
  d["selection_rates"] = rep.selection_rates;
  d["exact_selection_rate"] = rep.exact_selection_rate;
  d["completed_reps"] = rep.completed_reps;
  d["runtime_seconds"] = rep.runtime_seconds;
  py::list records;
  for (const RepRecord& rec : rep.records) {
    py::dict e;
    e["rep"] = rec.rep;
    e["failed"] = rec.failed;
    py::dict rm;
    for (const EstimatorSummary& s : rep.summaries)
      rm[estimator_name(s.estimator)] =
          rec.rmspr[static_cast<std::size_t>(s.estimator)];
    e["rmspr"] = rm;
    records.append(e);
  }
  d["records"] = records;
  return d;
}

TransferConfig config_from_kwargs(RegressionMode mode, double lambda,
                                  std::size_t informative, double bandwidth,
                                  const std::string& kernel,
                                  std::size_t grid_size, double support_lo,
                                  double support_hi, std::size_t cv_folds,
                                  std::uint64_t seed) {
  TransferConfig cfg;
  cfg.mode = mode;
  cfg.lambda = lambda;
  cfg.informative_count = informative;
  cfg.kernel.h = bandwidth;
  if (kernel == "epanechnikov")
    cfg.kernel.family = KernelFamily::epanechnikov;
  cfg.grid_size = grid_size;
  cfg.support_lo = support_lo;
  cfg.support_hi = support_hi;
  cfg.cv_folds = cv_folds;
  cfg.seed = seed;
  return cfg;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

PYBIND11_MODULE(_watl, m) {
  m.doc() =
      "Distribution-on-covariate regression with transfer across studies: "
      "quantile-function responses under the 2-Wasserstein geometry.";

  py::class_<ProbGrid, PyGridPtr>(m, "ProbGrid")
      .def(py::init([](std::vector<double> nodes, std::vector<double> weights) {
             return std::make_shared<ProbGrid>(std::move(nodes),
                                               std::move(weights));
           }),
           py::arg("nodes"), py::arg("weights"))
      .def_property_readonly("nodes", &ProbGrid::nodes)
      .def_property_readonly("weights", &ProbGrid::weights)
      .def("__len__", &ProbGrid::size);

  m.def(
      "make_grid", [](std::size_t m_) { return to_mutable(make_grid(m_)); },
      py::arg("m"),
      "Midpoint quadrature grid on (0,1): nodes (j+0.5)/M, weights 1/M.");

  py::class_<GridFunction>(m, "GridFunction")
      .def(py::init([](const PyGridPtr& grid, std::vector<double> values) {
             return GridFunction(grid, std::move(values));
           }),
           py::arg("grid"), py::arg("values"))
      .def_property_readonly("values", &GridFunction::values)
      .def_property_readonly(
          "grid", [](const GridFunction& f) { return to_mutable(f.grid_ptr()); })
      .def("__len__", &GridFunction::size);

  py::class_<QuantileGrid>(m, "QuantileGrid")
      .def(py::init(&make_quantile), py::arg("grid"), py::arg("values"),
           py::arg("lo") = -kInf, py::arg("hi") = kInf)
      .def_property_readonly("values", &QuantileGrid::values)
      .def_property_readonly(
          "grid", [](const QuantileGrid& q) { return to_mutable(q.grid_ptr()); })
      .def_property_readonly("lo", &QuantileGrid::lo)
      .def_property_readonly("hi", &QuantileGrid::hi)
      .def("to_function", &QuantileGrid::to_function)
      .def("__len__", &QuantileGrid::size);

  py::enum_<StudyRole>(m, "StudyRole")
      .value("target", StudyRole::target)
      .value("source", StudyRole::source);

  py::class_<CovariateMatrix>(m, "CovariateMatrix")
      .def(py::init(&CovariateMatrix::from_rows), py::arg("rows"))
      .def_property_readonly("n", &CovariateMatrix::rows)
      .def_property_readonly("p", &CovariateMatrix::cols);

  py::class_<Study>(m, "Study")
      .def(py::init<std::string, StudyRole, CovariateMatrix,
                    std::vector<QuantileGrid>>(),
           py::arg("label"), py::arg("role"), py::arg("covariates"),
           py::arg("responses"))
      .def(py::init<std::string, StudyRole, CovariateMatrix,
                    std::vector<std::vector<double>>>(),
           py::arg("label"), py::arg("role"), py::arg("covariates"),
           py::arg("samples"))
      .def_property_readonly("label", &Study::label)
      .def_property_readonly("n", &Study::n)
      .def_property_readonly("p", &Study::p)
      .def_property_readonly("sample_mode", &Study::sample_mode);

  m.def("l2_distance", &l2_distance, py::arg("f"), py::arg("g"));
  m.def("wasserstein_distance", &wasserstein_distance, py::arg("a"),
        py::arg("b"));
  m.def(
      "frechet_mean",
      [](const std::vector<QuantileGrid>& qs, std::vector<double> w) {
        return frechet_mean(qs, w);
      },
      py::arg("qs"), py::arg("weights"));
  m.def("project_to_quantile", &project_to_quantile, py::arg("g"),
        py::arg("lo") = -kInf, py::arg("hi") = kInf);
  m.def(
      "quantile_from_samples",
      [](std::vector<double> ys, const PyGridPtr& grid) {
        return quantile_from_samples(std::move(ys), grid);
      },
      py::arg("ys"), py::arg("grid"));

  m.def(
      "global_weights",
      [](const CovariateMatrix& x_mat, std::vector<double> x,
         std::optional<double> ridge) {
        return global_weights(x_mat, x, ridge);
      },
      py::arg("covariates"), py::arg("x"), py::arg("ridge") = py::none());
  m.def(
      "local_weights",
      [](const CovariateMatrix& x_mat, double x, double bandwidth,
         const std::string& kernel) {
        KernelSpec spec{kernel == "epanechnikov" ? KernelFamily::epanechnikov
                                                 : KernelFamily::gaussian,
                        bandwidth};
        return local_weights(x_mat, x, spec);
      },
      py::arg("covariates"), py::arg("x"), py::arg("bandwidth"),
      py::arg("kernel") = "gaussian");
  m.def(
      "weighted_quantile_estimate",
      [](std::vector<double> weights, const std::vector<QuantileGrid>& qs) {
        return weighted_quantile_estimate(weights, qs);
      },
      py::arg("weights"), py::arg("qs"));

  m.def("bias_correct", &bias_correct, py::arg("target_estimate"),
        py::arg("aggregate"), py::arg("lambda"));
  m.def(
      "select_informative",
      [](std::vector<double> scores, std::size_t count) {
        return select_informative(scores, count);
      },
      py::arg("scores"), py::arg("count"));

  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def("truncated_normal_quantile", &truncated_normal_quantile, py::arg("mu"),
        py::arg("sigma2"), py::arg("a"), py::arg("b"), py::arg("u"));

#define WATL_CONFIG_KWARGS                                                   \
  py::kw_only(), py::arg("mode") = "global", py::arg("lam") = 0.0,           \
      py::arg("l") = 0, py::arg("bandwidth") = 0.1,                          \
      py::arg("kernel") = "gaussian", py::arg("grid_size") = 500,            \
      py::arg("support_lo") = -kInf, py::arg("support_hi") = kInf,           \
      py::arg("cv_folds") = 5, py::arg("seed") = 0

  m.def(
      "watl_predict",
      [](const Study& target, const std::vector<Study>& sources,
         std::vector<double> x, const std::string& mode, double lam,
         std::size_t l, double bandwidth, const std::string& kernel,
         std::size_t grid_size, double support_lo, double support_hi,
         std::size_t cv_folds, std::uint64_t seed) {
        TransferConfig cfg = config_from_kwargs(
            mode == "local" ? RegressionMode::local : RegressionMode::global,
            lam, l, bandwidth, kernel, grid_size, support_lo, support_hi,
            cv_folds, seed);
        return report_to_dict(watl_predict(target, sources, x, cfg));
      },
      py::arg("target"), py::arg("sources"), py::arg("x"), WATL_CONFIG_KWARGS,
      "Transfer fit at one query point with every source used.");
  m.def(
      "awatl_predict",
      [](const Study& target, const std::vector<Study>& sources,
         std::vector<double> x, const std::string& mode, double lam,
         std::size_t l, double bandwidth, const std::string& kernel,
         std::size_t grid_size, double support_lo, double support_hi,
         std::size_t cv_folds, std::uint64_t seed) {
        TransferConfig cfg = config_from_kwargs(
            mode == "local" ? RegressionMode::local : RegressionMode::global,
            lam, l, bandwidth, kernel, grid_size, support_lo, support_hi,
            cv_folds, seed);
        return report_to_dict(awatl_predict(target, sources, x, cfg));
      },
      py::arg("target"), py::arg("sources"), py::arg("x"), WATL_CONFIG_KWARGS,
      "Adaptive transfer fit at one query point (L smallest discrepancies).");
  m.def(
      "baseline_predict",
      [](const Study& study, std::vector<double> x, const std::string& mode,
         double lam, std::size_t l, double bandwidth,
         const std::string& kernel, std::size_t grid_size, double support_lo,
         double support_hi, std::size_t cv_folds, std::uint64_t seed) {
        TransferConfig cfg = config_from_kwargs(
            mode == "local" ? RegressionMode::local : RegressionMode::global,
            lam, l, bandwidth, kernel, grid_size, support_lo, support_hi,
            cv_folds, seed);
        return baseline_predict(study, x, cfg).values();
      },
      py::arg("study"), py::arg("x"), WATL_CONFIG_KWARGS,
      "Plain weighted regression on one study.");
  m.def(
      "cross_validate",
      [](const Study& target, const std::vector<Study>& sources,
         const std::string& mode, double lam, std::size_t l, double bandwidth,
         const std::string& kernel, std::size_t grid_size, double support_lo,
         double support_hi, std::size_t cv_folds, std::uint64_t seed) {
        TransferConfig cfg = config_from_kwargs(
            mode == "local" ? RegressionMode::local : RegressionMode::global,
            lam, l, bandwidth, kernel, grid_size, support_lo, support_hi,
            cv_folds, seed);
        CvResult cv = cross_validate(target, sources, {}, cfg);
        py::dict d;
        d["lambda"] = cv.lambda;
        py::list trace;
        for (const CvPoint& p : cv.trace) {
          py::dict e;
          e["lambda"] = p.lambda;
          e["score"] = p.score;
          trace.append(e);
        }
        d["trace"] = trace;
        return d;
      },
      py::arg("target"), py::arg("sources"), WATL_CONFIG_KWARGS,
      "Five-fold-style CV over the default lambda grid; returns the winner.");
#undef WATL_CONFIG_KWARGS

  m.def(
      "discrepancy_scores",
      [](const Study& target, const std::vector<Study>& sources,
         std::vector<double> x, std::size_t grid_size) {
        TransferConfig cfg;
        cfg.grid_size = grid_size;
        return discrepancy_scores(target, sources, x, cfg);
      },
      py::arg("target"), py::arg("sources"), py::arg("x"),
      py::arg("grid_size") = 500);

  m.def(
      "generate_study",
      [](std::size_t k, double psi, std::size_t n, std::uint64_t seed,
         const PyGridPtr& grid) {
        return generate_study(k, psi, n, seed, grid);
      },
      py::arg("k"), py::arg("psi"), py::arg("n"), py::arg("seed"),
      py::arg("grid"));
  m.def("generate_study_em", &generate_study_em, py::arg("k"), py::arg("psi"),
        py::arg("n"), py::arg("num_samples"), py::arg("seed"));
  m.def(
      "true_regression_quantile",
      [](double x, double psi, const PyGridPtr& grid) {
        return true_regression_quantile(x, psi, grid);
      },
      py::arg("x"), py::arg("psi"), py::arg("grid"));
  m.def(
      "rmspr",
      [](const std::vector<QuantileGrid>& preds,
         const std::vector<QuantileGrid>& truths) {
        return rmspr(preds, truths);
      },
      py::arg("preds"), py::arg("truths"));

  m.def(
      "run_experiment",
      [](std::size_t k, std::size_t n0, std::size_t tau,
         std::vector<double> psi, std::size_t reps, std::uint64_t seed,
         std::size_t grid_size, std::vector<std::string> estimators,
         std::optional<double> lam, std::size_t l, std::size_t n_eval,
         std::vector<std::size_t> source_sizes, std::size_t threads) {
        SimConfig cfg;
        cfg.num_sources = k;
        cfg.n0 = n0;
        cfg.tau = tau;
        cfg.psi = std::move(psi);
        cfg.reps = reps;
        cfg.seed = seed;
        cfg.grid_size = grid_size;
        cfg.estimators.clear();
        for (const std::string& name : estimators) {
          auto est = estimator_from_name(name);
          if (!est)
            throw std::invalid_argument("unknown estimator '" + name + "'");
          cfg.estimators.push_back(*est);
        }
        cfg.lambda = lam;
        cfg.informative_count = l;
        cfg.n_eval = n_eval;
        cfg.source_sizes = std::move(source_sizes);
        cfg.threads = threads;
        return experiment_to_dict(run_experiment(cfg));
      },
      py::arg("k"), py::arg("n0"), py::arg("tau"), py::arg("psi"),
      py::arg("reps") = 10, py::arg("seed") = 1, py::arg("grid_size") = 100,
      py::arg("estimators") = std::vector<std::string>{"watl", "only_target"},
      py::arg("lam") = py::none(), py::arg("l") = 2, py::arg("n_eval") = 100,
      py::arg("source_sizes") = std::vector<std::size_t>{},
      py::arg("threads") = 0,
      "One synthetic benchmark cell; returns summaries and per-rep records.");
}
