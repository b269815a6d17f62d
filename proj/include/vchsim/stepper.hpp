#pragma once

#include "vchsim/constitutive.hpp"
#include "vchsim/mesh.hpp"

#include <Eigen/SparseCore>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vch {

struct SolverConfig {
  double T = 1.0;
  int N = 10;
  double delta = 1.0;
  std::optional<double> yosida_lambda;       // defaults to the time step
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  double linear_tol = 1e-12;
  int linear_max_iter = 20000;
  bool sign_split_reaction = true;
  std::optional<double> mobility_floor_tau;  // defaults to the time step

  double tau() const { return N > 0 ? T / N : 0.0; }
  double lambda() const { return yosida_lambda.value_or(tau()); }
  double mobility_floor() const { return mobility_floor_tau.value_or(tau()); }

  bool operator==(const SolverConfig&) const = default;
};

/// Structural checks on the scheme parameters and the constitutive laws.
/// Throws ConfigError naming the violated hypothesis.
void validate(const SolverConfig& cfg, const Laws& laws);

/// Checks initial data: mu0 >= 0, rho0 in the closed domain of beta and a
/// finite selection xi0 in beta(rho0). Throws ConfigError.
void validate_initial_data(const Laws& laws, const ScalarField& mu0, const ScalarField& rho0);

struct SimState {
  double t = 0.0;
  ScalarField mu;
  ScalarField rho;
  ScalarField xi;
  ScalarField dt_rho;
};

struct StepReport {
  int newton_iters = 0;
  double newton_residual = 0.0;
  int active_set_iters = 0;   // obstacle refinement sweeps (clamp graphs only)
  bool projected = false;     // refinement fell back to plain projection
  int linear_iters = 0;
  double linear_residual = 0.0;
  double min_mu = 0.0;
  double max_mu = 0.0;
  double min_rho = 0.0;
  double max_rho = 0.0;
};

struct Trajectory {
  double tau = 0.0;
  std::vector<SimState> states;
  std::vector<StepReport> reports;

  const Grid& grid() const { return states.front().mu.grid; }
  const ScalarField& mu0() const { return states.front().mu; }
  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

/// A stage failed mid-run; `partial` holds every committed step.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, Trajectory partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

/// mu(t - tau) from the committed history, or mu0 for t <= tau.
ScalarField delayed_mu(const Trajectory& history, double t, double tau,
                       const ScalarField& mu0);

struct RhoStage {
  ScalarField rho;
  ScalarField xi;
  StepReport report;
};

/// Implicit rho update with the delayed chemical potential as forcing.
RhoStage step_rho(const SimState& prev, const ScalarField& mu_del, const SolverConfig& cfg,
                  const Laws& laws);

struct MuStage {
  ScalarField mu;
  StepReport report;
};

/// Linearized implicit mu update with frozen rho_new and dt_rho.
MuStage step_mu(const SimState& prev, const ScalarField& rho_new, const ScalarField& dt_rho,
                const SolverConfig& cfg, const Laws& laws);

/// One full step; appends the new state and its report to `history`.
std::pair<SimState, StepReport> advance(const SimState& state, const SolverConfig& cfg,
                                        const Laws& laws, Trajectory& history);

SimState initial_state(const SolverConfig& cfg, const Laws& laws, const ScalarField& mu0,
                       const ScalarField& rho0);

/// Full run of N steps. Throws ConfigError on invalid data, RunError on stage failure.
Trajectory run(const SolverConfig& cfg, const Laws& laws, const ScalarField& mu0,
               const ScalarField& rho0);

/// Literal growing-interval construction: for n = 1..N the rho and mu
/// problems are re-solved on all of [0, t_n] from the previous mu iterate.
/// O(N^2) stage solves; used to check the rolling form of `run`.
Trajectory run_growing_intervals(const SolverConfig& cfg, const Laws& laws,
                                 const ScalarField& mu0, const ScalarField& rho0);

/// Assembled operators, exposed for matrix-level tests.
Eigen::SparseMatrix<double> stiffness_matrix(const Grid& g, const ScalarField& k,
                                             FaceAverage avg);
Eigen::SparseMatrix<double> mu_system_matrix(const SimState& prev, const ScalarField& rho_new,
                                             const ScalarField& dt_rho,
                                             const SolverConfig& cfg, const Laws& laws);

}  // namespace vch
