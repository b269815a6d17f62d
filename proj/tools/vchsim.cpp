#include "vchsim/config.hpp"
#include "vchsim/diagnostics.hpp"
#include "vchsim/error.hpp"
#include "vchsim/output.hpp"
#include "vchsim/studies.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace vch;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kViolation = 4 };

std::string parent_dir(const std::string& path) { return fs::path(path).parent_path().string(); }

int cmd_validate(const std::string& config_path) {
  const Config cfg = load_config(config_path);
  const Problem p = make_problem(cfg, parent_dir(config_path));
  std::cout << "ok: " << p.mu0.size() << " nodes, N = " << cfg.solver.N << ", tau = " << exact(cfg.solver.tau())
            << "\n";
  return kOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out) {
  const Config cfg = load_config(config_path);
  const Problem p = make_problem(cfg, parent_dir(config_path));
  try {
    const Trajectory traj = run(p);
    write_run(out, cfg, traj, p.laws);
    const auto& last = traj.states.back();
    std::cout << "simulated " << traj.steps() << " steps to t = " << exact(last.t) << "; min mu "
              << exact(last.mu.min()) << ", rho in [" << exact(last.rho.min()) << ", " << exact(last.rho.max())
              << "]\n";
    return kOk;
  } catch (const RunError& e) {
    write_run(out, cfg, e.partial(), p.laws);
    std::cerr << "solver failure: " << e.what() << " (" << e.partial().steps() << " steps written)\n";
    return kSolver;
  }
}

int cmd_diagnose(const std::string& traj_dir, const std::string& out) {
  const LoadedRun loaded = read_run(traj_dir);
  const Laws laws = make_laws(loaded.config);
  const DiagnosticReport rep = diagnose(loaded.traj, loaded.config.solver, laws);
  write_report(out, rep);
  std::cout << "sup mu " << exact(rep.bounds.sup_mu) << " (sup mu0 " << exact(rep.bounds.sup_mu0)
            << "), first-step increment " << exact(rep.first_increment) << "\n";
  if (rep.violations.empty()) return kOk;
  for (const auto& v : rep.violations) std::cerr << "step " << v.step << ": " << v.check << ": " << v.detail << "\n";
  return kViolation;
}

int cmd_study(const std::string& spec_path, const std::string& out) {
  const Config cfg = load_config(spec_path);
  const StudyBlock study = cfg.study.value_or(StudyBlock{});
  const Problem base = make_problem(cfg, parent_dir(spec_path));
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error(out + ": " + ec.message());
  const bool all = study.kind == "all";

  try {
    if (all || study.kind == "tau") {
      const OrderTable t = tau_refinement(base, study.values, study.reference, study.extrapolate);
      write_orders((fs::path(out) / "orders.csv").string(), t);
    }
    if (all || study.kind == "oracle") {
      Problem p = base;
      p.mu0 = ScalarField(base.mu0.grid, study.oracle_mu0);
      p.rho0 = ScalarField(base.rho0.grid, study.oracle_rho0);
      if (!p.cfg.yosida_lambda) p.cfg.yosida_lambda = study.oracle_lambda;
      validate_initial_data(p.laws, p.mu0, p.rho0);
      write_oracle((fs::path(out) / "oracle.csv").string(), homogeneous_oracle(p, study.oracle_values));
    }
    if (all || study.kind == "degenerate") {
      Problem p = base;
      if (!std::holds_alternative<TanhPowerMobility>(p.laws.mobility.kind))
        p.laws.mobility = tanh_power_mobility(cfg.m, cfg.r_star);
      const double center = cfg.mu0.kind == InitKind::Bump ? cfg.mu0.center : cfg.length / 2;
      const DegenerateReport rep = degenerate_demo(p, center, study.degenerate_values, study.degenerate_samples,
                                                   study.degenerate_threshold);
      write_degenerate((fs::path(out) / "degenerate.csv").string(), rep);
      std::cout << "degenerate: control wider " << (rep.control_wider ? "yes" : "no") << ", floor monotone "
                << (rep.floor_monotone ? "yes" : "no") << "\n";
    }
  } catch (const RunError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: violates (study): " << e.what() << "\n";
    return kConfig;
  }
  write_manifest(out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viscous Cahn-Hilliard simulator with delay-decoupled time stepping"};
  app.require_subcommand(1);

  std::string config, out, traj, spec;
  auto* sim = app.add_subcommand("simulate", "run a configuration and write series, states and manifest");
  sim->add_option("--config", config, "config file")->required();
  sim->add_option("--out", out, "output directory")->required();

  auto* diag = app.add_subcommand("diagnose", "check ledgers and residuals of a simulate output");
  diag->add_option("--traj", traj, "simulate output directory")->required();
  diag->add_option("--out", out, "report csv")->required();

  auto* st = app.add_subcommand("study", "refinement, oracle and degenerate-mobility studies");
  st->add_option("--spec", spec, "config file with study keys")->required();
  st->add_option("--out", out, "output directory")->required();

  auto* val = app.add_subcommand("validate", "parse a config and check its hypotheses");
  val->add_option("--config", config, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*sim) return cmd_simulate(config, out);
    if (*diag) return cmd_diagnose(traj, out);
    if (*st) return cmd_study(spec, out);
    if (*val) return cmd_validate(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
