#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cttx/cli.hpp"
#include "cttx/dte.hpp"
#include "cttx/error.hpp"
#include "cttx/limits.hpp"
#include "cttx/markov.hpp"
#include "cttx/models.hpp"
#include "cttx/poisson.hpp"

namespace py = pybind11;
using namespace cttx;

namespace {

poisson::LaggedPoissonParams lagged(double lambda, double epsilon, double r, double s, double t0, double T) {
  poisson::LaggedPoissonParams p{lambda, epsilon, r, s, t0, T};
  p.validate();
  return p;
}

py::dict row_dict(const ConvergenceRow& r) {
  py::dict d;
  d["dt"] = r.dt;
  d["te_sum"] = r.te_sum;
  d["stderr"] = r.stderr;
  d["bound"] = r.bound;
  d["fraction_in_bound"] = r.fraction_in_bound;
  d["divergent"] = r.divergent;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Continuous-time transfer entropy toolkit (C++ core)";
  m.attr("__version__") = CTTX_VERSION;

  // Python-side hierarchy mirrors the C++ one.
  static py::exception<Error> error(m, "Error");
  static py::exception<ParameterError> parameter_error(m, "ParameterError", error.ptr());
  static py::exception<DomainError> domain_error(m, "DomainError", error.ptr());
  static py::exception<GridError> grid_error(m, "GridError", error.ptr());
  static py::exception<ContractError> contract_error(m, "ContractError", error.ptr());
  static py::exception<ModelError> model_error(m, "ModelError", error.ptr());
  static py::exception<AbsoluteContinuityError> ac_error(m, "AbsoluteContinuityError", error.ptr());
  static py::exception<EstimationError> estimation_error(m, "EstimationError", error.ptr());
  static py::exception<NumericalError> numerical_error(m, "NumericalError", error.ptr());
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParameterError& e) {
      PyErr_SetString(parameter_error.ptr(), e.what());
    } catch (const DomainError& e) {
      PyErr_SetString(domain_error.ptr(), e.what());
    } catch (const GridError& e) {
      PyErr_SetString(grid_error.ptr(), e.what());
    } catch (const ContractError& e) {
      PyErr_SetString(contract_error.ptr(), e.what());
    } catch (const ModelError& e) {
      PyErr_SetString(model_error.ptr(), e.what());
    } catch (const AbsoluteContinuityError& e) {
      PyErr_SetString(ac_error.ptr(), e.what());
    } catch (const EstimationError& e) {
      PyErr_SetString(estimation_error.ptr(), e.what());
    } catch (const NumericalError& e) {
      PyErr_SetString(numerical_error.ptr(), e.what());
    } catch (const ConfigError& e) {
      PyErr_SetString(config_error.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  m.def("kl_divergence",
        [](std::vector<Symbol> support, std::vector<double> p, std::vector<double> q) {
          return kl_divergence(Pmf(support, p), Pmf(support, q));
        },
        py::arg("support"), py::arg("p"), py::arg("q"));

  m.def("schreiber_te",
        [](const std::vector<std::tuple<Symbol, std::vector<Symbol>, std::vector<Symbol>, double>>& rows,
           std::size_t k, std::size_t l) {
          std::vector<JointOutcome> joint;
          for (const auto& [x, xh, yh, prob] : rows) joint.push_back({x, xh, yh, prob});
          return schreiber_te(joint, k, l);
        },
        py::arg("joint"), py::arg("k"), py::arg("l"),
        "joint: list of (target, x_history, y_history, probability)");

  m.def("per_step_kl",
        [](double lambda, double epsilon, double r, double dt, long d) {
          return poisson::per_step_kl(lagged(lambda, epsilon, r, r, 0.0, 1.0), dt, {0, d});
        },
        py::arg("lambda_"), py::arg("epsilon"), py::arg("r"), py::arg("dt"), py::arg("d"));

  m.def("single_event_step_kl", &poisson::single_event_step_kl, py::arg("lambda_"), py::arg("dt"),
        py::arg("epsilon"), py::arg("r"));

  m.def("tau_s_schedule",
        [](double lambda, double epsilon, double r, double s, double t0, double T, std::vector<double> dts) {
          std::vector<py::dict> out;
          for (const auto& row : poisson::tau_S_schedule(lagged(lambda, epsilon, r, s, t0, T), dts)) {
            py::dict d;
            d["dt"] = row.dt;
            d["tau"] = row.tau;
            d["S"] = row.s;
            d["tauS"] = row.tau_s;
            out.push_back(d);
          }
          return out;
        },
        py::arg("lambda_"), py::arg("epsilon"), py::arg("r"), py::arg("s"), py::arg("t0"), py::arg("T"),
        py::arg("schedule"));

  m.def("analytic_limit",
        [](double lambda, double epsilon, double r, double t0, double T) {
          return poisson::analytic_limit(lagged(lambda, epsilon, r, r, t0, T));
        },
        py::arg("lambda_"), py::arg("epsilon"), py::arg("r"), py::arg("t0"), py::arg("T"));

  m.def("tau_s_limit",
        [](double lambda, double epsilon, double r, double t0, double T) {
          return poisson::tau_s_limit(lagged(lambda, epsilon, r, r, t0, T));
        },
        py::arg("lambda_"), py::arg("epsilon"), py::arg("r"), py::arg("t0"), py::arg("T"));

  m.def("converge_lagged_poisson",
        [](double lambda, double epsilon, double r, double s, double t0, double T, std::vector<double> dts) {
          const auto model = lagged_poisson_exact(lagged(lambda, epsilon, r, s, t0, T));
          ConvergenceReport rep;
          {
            py::gil_scoped_release release;
            rep = converge_te(*model, {dts, false});
          }
          py::dict out;
          py::list rows;
          for (const auto& r : rep.rows) rows.append(row_dict(r));
          out["rows"] = rows;
          out["limit_estimate"] = rep.limit_estimate;
          out["cauchy_gap"] = rep.cauchy_gap;
          out["converged"] = rep.converged;
          return out;
        },
        py::arg("lambda_"), py::arg("epsilon"), py::arg("r"), py::arg("s"), py::arg("t0"), py::arg("T"),
        py::arg("schedule"));

  m.def("ept_monte_carlo",
        [](const std::string& model, const std::string& params_json, double t0, double T, std::size_t n_paths,
           std::uint64_t seed) {
          const auto jm = make_jump_model(model, nlohmann::json::parse(params_json));
          EptResult r;
          {
            py::gil_scoped_release release;
            r = ept_monte_carlo(*jm, t0, T, n_paths, seed);
          }
          py::dict out;
          out["ept"] = r.estimate.value;
          out["stderr"] = r.estimate.stderr;
          out["n_paths"] = r.estimate.n_paths;
          out["per_path"] = r.per_path;
          return out;
        },
        py::arg("model"), py::arg("params_json"), py::arg("t0"), py::arg("T"), py::arg("n_paths"), py::arg("seed"));

  m.def("jump_model_names", &jump_model_names);

  m.def("run_command",
        [](const std::string& command, const std::string& config_json, std::optional<std::uint64_t> seed,
           std::optional<std::string> format) {
          const auto cfg = cli::load_config(command, config_json, seed, std::nullopt, format);
          cli::RunOutcome out;
          {
            py::gil_scoped_release release;
            out = cli::run(cfg);
          }
          return py::make_tuple(out.artifact, out.summary);
        },
        py::arg("command"), py::arg("config_json"), py::arg("seed") = py::none(), py::arg("format") = py::none(),
        "Runs a CLI command in-process; returns (artifact text, summary line). Writes nothing.");
}
