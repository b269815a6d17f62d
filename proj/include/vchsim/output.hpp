#pragma once

#include "vchsim/config.hpp"
#include "vchsim/diagnostics.hpp"
#include "vchsim/studies.hpp"

#include <string>
#include <vector>

namespace vch {

struct SeriesRow {
  int step = 0;
  double t = 0.0;
  double E_mu = 0.0;
  double F_rho = 0.0;
  double diss_cum = 0.0;
  double min_mu = 0.0;
  double max_mu = 0.0;
  double min_rho = 0.0;
  double max_rho = 0.0;
  int newton_iters = 0;
  int cg_iters = 0;
};

std::vector<SeriesRow> series_rows(const Trajectory& traj, const SolverConfig& cfg, const Laws& laws);

/// Decimal text for a double that parses back to the same bits.
std::string exact(double v);

void write_series(const std::string& path, const std::vector<SeriesRow>& rows);
void write_report(const std::string& path, const DiagnosticReport& rep);
void write_orders(const std::string& path, const OrderTable& table);
void write_oracle(const std::string& path, const OracleReport& rep);
void write_degenerate(const std::string& path, const DegenerateReport& rep);

/// state_<step>.txt: three snapshot blocks (mu, rho, xi), each in the mesh
/// snapshot format, all stamped with the state's time.
void write_state(const std::string& path, const SimState& s);
SimState read_state(const std::string& path);

std::string sha256_file(const std::string& path);
/// manifest.txt in `dir`: "<sha256>  <name>" for every regular file except itself, sorted by name.
void write_manifest(const std::string& dir);

/// Writes config.txt, series.csv, state files every `stride` steps (plus the
/// last one) and the manifest.
void write_run(const std::string& dir, const Config& cfg, const Trajectory& traj, const Laws& laws);

struct LoadedRun {
  Config config;
  Trajectory traj;
};

/// Rebuilds a trajectory from a run directory. Needs every step on disk
/// (stride 1); d_t rho is recomputed from consecutive states.
LoadedRun read_run(const std::string& dir);

}  // namespace vch
