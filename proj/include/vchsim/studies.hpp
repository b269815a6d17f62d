#pragma once

#include "vchsim/stepper.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vch {

/// Everything a run needs.
struct Problem {
  SolverConfig cfg;
  Laws laws;
  ScalarField mu0;
  ScalarField rho0;
};

Trajectory run(const Problem& p);

/// Discrete L2(Q) distance between a coarse run and a finer one sampled at the
/// coarse times (mu and rho together). The fine step count must be a multiple.
double l2q_distance(const Trajectory& coarse, const Trajectory& fine);

struct OrderRow {
  int N = 0;
  double tau = 0.0;
  double error = 0.0;
  std::optional<double> order;  // against the previous row
};

struct OrderTable {
  std::vector<OrderRow> rows;
  int reference_N = 0;
  bool extrapolated = true;
};

/// Runs every N in `Ns` plus the reference. With `extrapolate` the reference
/// is the Richardson combination 2 u_ref - u_{ref/2}, which removes the
/// reference's own first-order error from the table.
OrderTable tau_refinement(const Problem& base, const std::vector<int>& Ns, int reference_N,
                          bool extrapolate = true);

struct HomogeneousPath {
  std::vector<double> t;
  std::vector<double> mu;
  std::vector<double> rho;
};

/// Spatially constant system
///   (eps + 2 g(rho)) mu' + mu g'(rho) rho' = 0,
///   delta rho' + beta_lambda(rho) + pi(rho) = mu g'(rho),
/// integrated with an adaptive Dormand-Prince pair and sampled at `times`.
HomogeneousPath integrate_homogeneous(const Laws& laws, double delta, double lambda, double mu0,
                                      double rho0, const std::vector<double>& times,
                                      double tol = 1e-12);

struct OracleRow {
  int N = 0;
  double tau = 0.0;
  double max_error = 0.0;        // L-infinity in time, max over mu and rho
  double invariant_drift = 0.0;  // max_n |a(rho_n) mu_n^2 - a(rho_0) mu_0^2|
  std::optional<double> error_ratio;  // previous row / this row
  std::optional<double> drift_ratio;
};

struct OracleReport {
  std::vector<OracleRow> rows;
  double oracle_invariant_drift = 0.0;
};

/// Compares homogeneous stepper runs at each N against the ODE oracle. The
/// base problem must carry spatially constant data and a fixed yosida_lambda
/// so the oracle sees the same regularized graph at every N.
OracleReport homogeneous_oracle(const Problem& base, const std::vector<int>& Ns);

struct DegenerateRow {
  std::string mobility;  // "tanh" or "constant"
  int N = 0;
  double tau = 0.0;
  double t = 0.0;
  double radius = 0.0;
  double sup_K = 0.0;  // running sup of the discrete H1 norm of K_tau(mu)
};

struct DegenerateReport {
  std::vector<DegenerateRow> rows;
  double threshold = 0.0;
  bool control_wider = true;   // constant-mobility radius > tanh radius at every sample
  bool floor_monotone = true;  // tanh radius at T nonincreasing as tau shrinks
};

/// Spread radius of {mu > threshold} along the x-axis ray from `center`,
/// with linear interpolation at the crossing.
double spread_radius(const ScalarField& mu, double center, double threshold);

/// Bump runs with the tanh-power mobility of `base` and a Constant(1)
/// control, for each N, sampled at `samples` equally spaced times.
DegenerateReport degenerate_demo(const Problem& base, double center, const std::vector<int>& Ns,
                                 int samples = 8, double rel_threshold = 1e-3);

}  // namespace vch
