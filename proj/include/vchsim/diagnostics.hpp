#pragma once

#include "vchsim/stepper.hpp"

#include <string>
#include <vector>

namespace vch {

/// Per-step mu-energy balance. Row 0 holds the initial energy only.
///
/// With a = epsilon + 2 g(rho), testing the mu update by mu^n gives the exact
/// discrete identity
///   E^n - E^{n-1} + diss^n + num_diss^n = cross^n
/// where num_diss = 1/2 int a^n |mu^n - mu^{n-1}|^2 is the backward-Euler
/// dissipation and cross collects the reaction and coefficient-change terms.
struct MuLedgerRow {
  int step = 0;
  double t = 0.0;
  double E_mu = 0.0;
  double diss = 0.0;      // tau * face sum of kappa_tau |grad mu|^2
  double num_diss = 0.0;
  double cross = 0.0;
  double residual = 0.0;  // E^n - E^{n-1} + diss - cross, <= 0 up to solver error
  double diss_cum = 0.0;
  double num_diss_cum = 0.0;
  double cross_cum = 0.0;
};

std::vector<MuLedgerRow> mu_energy_ledger(const Trajectory& traj, const SolverConfig& cfg,
                                          const Laws& laws);

/// Free energy F(rho) = 1/2 |grad rho|^2 + int (f1_lambda + f2)(rho), where
/// f1_lambda is the Moreau envelope the rho update actually descends (it
/// equals f1 on the obstacle interval). Per step:
///   F^n - F^{n-1} + visc^n <= work^n + allowance^n
/// with allowance = (semiconcavity/2) |rho^n - rho^{n-1}|^2 covering the
/// implicitly treated nonconvex part of f2.
struct RhoLedgerRow {
  int step = 0;
  double t = 0.0;
  double F_rho = 0.0;
  double visc = 0.0;       // delta tau int |d_t rho|^2
  double work = 0.0;       // tau int g'(rho) (delayed mu) d_t rho
  double allowance = 0.0;
  double visc_cum = 0.0;
  double work_cum = 0.0;
  double allowance_cum = 0.0;
  double slack = 0.0;      // F^0 + work_cum + allowance_cum - F^n - visc_cum, >= 0 up to tol
  int nodes_outside = 0;   // nodes with rho outside the closed domain of beta
};

std::vector<RhoLedgerRow> rho_energy_ledger(const Trajectory& traj, const SolverConfig& cfg,
                                            const Laws& laws);

struct BoundednessReport {
  double sup_mu = 0.0;   // over all steps and nodes
  double sup_mu0 = 0.0;
  double inf_mu = 0.0;
};

BoundednessReport boundedness_report(const Trajectory& traj, const ScalarField& mu0);

struct ResidualRow {
  int step = 0;
  double t = 0.0;
  double native_mu = 0.0;   // relative 2-norm residual of the linearized mu system
  double native_rho = 0.0;  // max-norm residual of the rho equation with xi
  double strong_mu = 0.0;   // unlagged, unfloored pointwise form, max norm
  double weak_mu = 0.0;     // conservative form with K(mu), max over test bumps
};

std::vector<ResidualRow> formulation_residuals(const Trajectory& traj, const SolverConfig& cfg,
                                               const Laws& laws);

struct ContractionSeries {
  std::vector<double> z_gap;
  std::vector<double> rho_gap;
  std::vector<double> total() const;
  /// max over steps of ln(m_n / m_{n-1}) / tau where m = z_gap + rho_gap.
  double growth_rate = 0.0;
  /// false when the mobility is not constant (no uniqueness theory behind it).
  bool backed = true;
};

ContractionSeries contraction_metric(const Trajectory& a, const Trajectory& b, const Laws& laws);

/// ||rho^1 - rho^0|| / tau in the discrete L2 norm (reported, never asserted).
double first_step_increment(const Trajectory& traj);

struct Violation {
  int step = 0;
  std::string check;
  std::string detail;
};

struct DiagnosticReport {
  std::vector<MuLedgerRow> mu;
  std::vector<RhoLedgerRow> rho;
  std::vector<ResidualRow> residuals;
  BoundednessReport bounds;
  double first_increment = 0.0;
  std::vector<Violation> violations;
};

/// Runs every check and collects violations of the scheme-level guarantees.
DiagnosticReport diagnose(const Trajectory& traj, const SolverConfig& cfg, const Laws& laws);

}  // namespace vch
