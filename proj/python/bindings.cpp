#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qarspec/bootstrap.hpp"
#include "qarspec/error.hpp"
#include "qarspec/factors.hpp"
#include "qarspec/monte_carlo.hpp"
#include "qarspec/panel.hpp"
#include "qarspec/qar.hpp"
#include "qarspec/skewt.hpp"
#include "qarspec/spec_test.hpp"

namespace py = pybind11;
using namespace qarspec;

namespace {

std::optional<FactorSeries> as_factors(const std::optional<Eigen::MatrixXd>& f) {
  if (!f) return std::nullopt;
  return FactorSeries{*f, {}};
}

WeightConfig weights(double gamma_max, int gamma_points, double kappa, int max_lag,
                     const std::string& structure) {
  WeightConfig w;
  w.gamma_max = gamma_max;
  w.gamma_points = gamma_points;
  w.kappa = kappa;
  w.max_lag = max_lag;
  if (structure == "tied") {
    w.structure = GammaStructure::Tied;
  } else if (structure == "per-block") {
    w.structure = GammaStructure::PerBlock;
  } else {
    throw ParameterError("structure must be 'tied' or 'per-block'");
  }
  w.validate();
  return w;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of qarspec";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<LoadError>(m, "LoadError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("tau_grid", &equidistributed_grid, py::arg("m"), py::arg("lo") = 0.1,
        py::arg("hi") = 0.9);

  m.def(
      "extract_factors",
      [](const Eigen::MatrixXd& panel, int k) {
        const FactorModel fm = extract_factors(make_panel(panel), k);
        return py::dict(py::arg("factors") = fm.factors, py::arg("loadings") = fm.loadings,
                        py::arg("eigenvalues") = fm.eigenvalues);
      },
      py::arg("panel"), py::arg("k"), "Principal components of an N x T panel.");

  m.def(
      "fit_path",
      [](std::vector<double> y, int p, std::vector<double> taus,
         std::optional<Eigen::MatrixXd> factors) {
        const auto f = as_factors(factors);
        const RegressionFrame frame = build_frame(TimeSeries{std::move(y), {}}, p,
                                                  f ? &*f : nullptr);
        const QuantileFitPath path = fit_path(frame, taus);
        return py::dict(py::arg("coefficients") = path.coefficients,
                        py::arg("objective") = path.objective);
      },
      py::arg("y"), py::arg("p"), py::arg("taus"), py::arg("factors") = py::none());

  m.def(
      "spec_test",
      [](std::vector<double> y, int p, std::optional<Eigen::MatrixXd> factors,
         const std::string& null, std::size_t m, int boot_reps, std::uint64_t seed,
         double alpha, double gamma_max, int gamma_points, double kappa, int max_lag,
         const std::string& structure) {
        const auto f = as_factors(factors);
        NullHypothesis which = NullHypothesis::H01;
        if (null == "H02") {
          which = NullHypothesis::H02;
        } else if (null != "H01") {
          throw ParameterError("null must be 'H01' or 'H02'");
        }
        const RegressionFrame frame = build_frame(
            TimeSeries{std::move(y), {}}, p,
            which == NullHypothesis::H02 && f ? &*f : nullptr);
        BootstrapConfig bc;
        bc.replications = boot_reps;
        bc.seed = seed;
        bc.alpha = alpha;
        const auto grid = equidistributed_grid(m);
        const TestRun run =
            run_test(frame, f ? &*f : nullptr,
                     weights(gamma_max, gamma_points, kappa, max_lag, structure), grid, bc, which);
        const BootstrapResult& r = run.result;
        return py::dict(py::arg("cvm") = r.original_cvm, py::arg("ks") = r.original_ks,
                        py::arg("p_cvm") = r.p_cvm, py::arg("p_ks") = r.p_ks,
                        py::arg("critical_cvm") = r.critical_cvm,
                        py::arg("critical_ks") = r.critical_ks,
                        py::arg("reject_cvm") = r.reject_cvm, py::arg("reject_ks") = r.reject_ks,
                        py::arg("surface") = run.prepared.surface.values);
      },
      py::arg("y"), py::arg("p") = 1, py::arg("factors") = py::none(), py::arg("null") = "H01",
      py::arg("m") = 17, py::arg("boot_reps") = 99, py::arg("seed") = 20240101,
      py::arg("alpha") = 0.05, py::arg("gamma_max") = 3.0, py::arg("gamma_points") = 30,
      py::arg("kappa") = 2.0, py::arg("max_lag") = 4, py::arg("structure") = "tied");

  m.def(
      "simulate",
      [](const std::string& dgp_case, std::size_t T, std::uint64_t seed, std::size_t panel_n) {
        DgpSpec s;
        s.dgp_case = parse_dgp_case(dgp_case);
        s.T = T;
        s.panel_N = panel_n;
        const SimulatedData d = simulate_dgp(s, StreamKey(seed));
        return py::dict(py::arg("y") = d.y, py::arg("factors") = d.factors,
                        py::arg("panel") = d.panel);
      },
      py::arg("case") = "case2", py::arg("T") = 200, py::arg("seed") = 20240101,
      py::arg("panel_n") = 0);

  m.def(
      "skewt_pdf",
      [](double y, double mu, double sigma, double alpha, double nu) {
        return skewt_pdf(y, SkewTParams{mu, sigma, alpha, nu});
      },
      py::arg("y"), py::arg("mu"), py::arg("sigma"), py::arg("alpha"), py::arg("nu"));
  m.def(
      "skewt_cdf",
      [](double y, double mu, double sigma, double alpha, double nu) {
        return skewt_cdf(y, SkewTParams{mu, sigma, alpha, nu});
      },
      py::arg("y"), py::arg("mu"), py::arg("sigma"), py::arg("alpha"), py::arg("nu"));
  m.def(
      "skewt_quantile",
      [](double prob, double mu, double sigma, double alpha, double nu) {
        return skewt_quantile(prob, SkewTParams{mu, sigma, alpha, nu});
      },
      py::arg("p"), py::arg("mu"), py::arg("sigma"), py::arg("alpha"), py::arg("nu"));
  m.def(
      "fit_skewt",
      [](std::vector<double> values, std::vector<double> probs) {
        QuantileTargets t;
        if (!probs.empty()) t.probs = std::move(probs);
        t.values = std::move(values);
        const SkewTFit fit = fit_skewt(t);
        return py::dict(py::arg("mu") = fit.params.mu, py::arg("sigma") = fit.params.sigma,
                        py::arg("alpha") = fit.params.alpha, py::arg("nu") = fit.params.nu,
                        py::arg("objective") = fit.objective, py::arg("converged") = fit.converged);
      },
      py::arg("values"), py::arg("probs") = std::vector<double>{});
}
