#include "vchsim/config.hpp"
#include "vchsim/diagnostics.hpp"
#include "vchsim/error.hpp"
#include "vchsim/output.hpp"
#include "vchsim/studies.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace vch;

namespace {

py::dict trajectory_dict(const Trajectory& tr) {
  const Eigen::Index steps = static_cast<Eigen::Index>(tr.states.size());
  const Eigen::Index nodes = steps ? static_cast<Eigen::Index>(tr.grid().size()) : 0;
  Eigen::VectorXd t(steps);
  Eigen::MatrixXd mu(steps, nodes), rho(steps, nodes), xi(steps, nodes);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const SimState& s = tr.states[static_cast<std::size_t>(k)];
    t[k] = s.t;
    mu.row(k) = s.mu.values.transpose();
    rho.row(k) = s.rho.values.transpose();
    xi.row(k) = s.xi.values.transpose();
  }
  py::dict d;
  d["t"] = t;
  d["mu"] = mu;
  d["rho"] = rho;
  d["xi"] = xi;
  return d;
}

py::list violations_list(const DiagnosticReport& rep) {
  py::list out;
  for (const auto& v : rep.violations) out.append(py::make_tuple(v.step, v.check, v.detail));
  return out;
}

}  // namespace

PYBIND11_MODULE(_vchsim, m) {
  m.doc() = "viscous Cahn-Hilliard simulator core";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    }
  });
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<Config>(m, "Config")
      .def_readonly("dim", &Config::dim)
      .def_readonly("n", &Config::n)
      .def_readonly("length", &Config::length)
      .def_readonly("potential", &Config::potential)
      .def_readonly("mobility", &Config::mobility)
      .def_readonly("coupling", &Config::coupling)
      .def_readonly("stride", &Config::stride)
      .def_property_readonly("T", [](const Config& c) { return c.solver.T; })
      .def_property_readonly("N", [](const Config& c) { return c.solver.N; })
      .def_property_readonly("tau", [](const Config& c) { return c.solver.tau(); })
      .def("render", &render_config)
      .def("__eq__", [](const Config& a, const Config& b) { return a == b; })
      .def("__repr__", [](const Config& c) {
        return "<Config dim=" + std::to_string(c.dim) + " n=" + std::to_string(c.n) + " N=" + std::to_string(c.solver.N) +
               ">";
      });

  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def("render_config", &render_config, py::arg("config"));

  m.def(
      "run",
      [](const Config& c, const std::string& base_dir) {
        const Problem p = make_problem(c, base_dir);
        Trajectory tr;
        {
          py::gil_scoped_release release;
          tr = run(p);
        }
        return trajectory_dict(tr);
      },
      py::arg("config"), py::arg("base_dir") = "",
      "Runs the configuration; returns t and per-step mu, rho, xi arrays (steps x nodes).");

  m.def(
      "simulate",
      [](const Config& c, const std::string& out, const std::string& base_dir) {
        const Problem p = make_problem(c, base_dir);
        py::gil_scoped_release release;
        write_run(out, c, run(p), p.laws);
      },
      py::arg("config"), py::arg("out"), py::arg("base_dir") = "");

  m.def(
      "diagnose",
      [](const std::string& traj_dir) {
        const LoadedRun loaded = read_run(traj_dir);
        const DiagnosticReport rep = diagnose(loaded.traj, loaded.config.solver, make_laws(loaded.config));
        std::vector<double> E, residual, slack;
        for (const auto& r : rep.mu) {
          E.push_back(r.E_mu);
          residual.push_back(r.residual);
        }
        for (const auto& r : rep.rho) slack.push_back(r.slack);
        py::dict d;
        d["E_mu"] = E;
        d["mu_residual"] = residual;
        d["rho_slack"] = slack;
        d["sup_mu"] = rep.bounds.sup_mu;
        d["inf_mu"] = rep.bounds.inf_mu;
        d["violations"] = violations_list(rep);
        return d;
      },
      py::arg("traj_dir"));

  m.def(
      "tau_refinement",
      [](const Config& c, const std::vector<int>& Ns, int reference, bool extrapolate) {
        const Problem p = make_problem(c);
        OrderTable t;
        {
          py::gil_scoped_release release;
          t = tau_refinement(p, Ns, reference, extrapolate);
        }
        py::list rows;
        for (const auto& r : t.rows)
          rows.append(py::make_tuple(r.N, r.tau, r.error, r.order ? py::cast(*r.order) : py::none()));
        return rows;
      },
      py::arg("config"), py::arg("Ns"), py::arg("reference"), py::arg("extrapolate") = true,
      "Rows of (N, tau, error, order).");

  m.def(
      "homogeneous_oracle",
      [](const Config& c, const std::vector<int>& Ns, double mu0, double rho0, double lambda) {
        Problem p = make_problem(c);
        p.mu0 = ScalarField(p.mu0.grid, mu0);
        p.rho0 = ScalarField(p.rho0.grid, rho0);
        p.cfg.yosida_lambda = lambda;
        OracleReport rep;
        {
          py::gil_scoped_release release;
          rep = homogeneous_oracle(p, Ns);
        }
        py::list rows;
        for (const auto& r : rep.rows) rows.append(py::make_tuple(r.N, r.tau, r.max_error, r.invariant_drift));
        return rows;
      },
      py::arg("config"), py::arg("Ns"), py::arg("mu0") = 1.0, py::arg("rho0") = 0.5, py::arg("lambda_") = 0.01,
      "Rows of (N, tau, max_error, invariant_drift).");
}
