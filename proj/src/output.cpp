#include "vchsim/output.hpp"

#include "vchsim/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace vch {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  return os;
}

void finish(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw std::runtime_error(path + ": write failed");
}

std::string opt(const std::optional<double>& v) { return v ? exact(*v) : std::string(); }

}  // namespace

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<SeriesRow> series_rows(const Trajectory& traj, const SolverConfig& cfg, const Laws& laws) {
  const auto mu = mu_energy_ledger(traj, cfg, laws);
  const auto rho = rho_energy_ledger(traj, cfg, laws);
  std::vector<SeriesRow> rows;
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    const auto& s = traj.states[n];
    SeriesRow r;
    r.step = static_cast<int>(n);
    r.t = s.t;
    r.E_mu = mu[n].E_mu;
    r.F_rho = rho[n].F_rho;
    r.diss_cum = mu[n].diss_cum;
    r.min_mu = s.mu.min();
    r.max_mu = s.mu.max();
    r.min_rho = s.rho.min();
    r.max_rho = s.rho.max();
    if (n > 0 && n - 1 < traj.reports.size()) {
      r.newton_iters = traj.reports[n - 1].newton_iters;
      r.cg_iters = traj.reports[n - 1].linear_iters;
    }
    rows.push_back(r);
  }
  return rows;
}

void write_series(const std::string& path, const std::vector<SeriesRow>& rows) {
  auto os = open_out(path);
  os << "step,t,E_mu,F_rho,diss_cum,min_mu,max_mu,min_rho,max_rho,newton_iters,cg_iters\n";
  for (const auto& r : rows)
    os << r.step << ',' << exact(r.t) << ',' << exact(r.E_mu) << ',' << exact(r.F_rho) << ','
       << exact(r.diss_cum) << ',' << exact(r.min_mu) << ',' << exact(r.max_mu) << ','
       << exact(r.min_rho) << ',' << exact(r.max_rho) << ',' << r.newton_iters << ',' << r.cg_iters
       << '\n';
  finish(os, path);
}

void write_report(const std::string& path, const DiagnosticReport& rep) {
  auto os = open_out(path);
  os << "step,t,E_mu,diss,num_diss,cross,mu_residual,diss_cum,F_rho,visc,work,allowance,rho_slack,"
        "nodes_outside,native_mu,native_rho,strong_mu,weak_mu\n";
  for (std::size_t n = 0; n < rep.mu.size(); ++n) {
    const auto& m = rep.mu[n];
    const auto& r = rep.rho[n];
    const auto& q = rep.residuals[n];
    os << m.step << ',' << exact(m.t) << ',' << exact(m.E_mu) << ',' << exact(m.diss) << ','
       << exact(m.num_diss) << ',' << exact(m.cross) << ',' << exact(m.residual) << ','
       << exact(m.diss_cum) << ',' << exact(r.F_rho) << ',' << exact(r.visc) << ',' << exact(r.work)
       << ',' << exact(r.allowance) << ',' << exact(r.slack) << ',' << r.nodes_outside << ','
       << exact(q.native_mu) << ',' << exact(q.native_rho) << ',' << exact(q.strong_mu) << ','
       << exact(q.weak_mu) << '\n';
  }
  finish(os, path);
}

void write_orders(const std::string& path, const OrderTable& table) {
  auto os = open_out(path);
  os << "N,tau,error,order\n";
  for (const auto& r : table.rows)
    os << r.N << ',' << exact(r.tau) << ',' << exact(r.error) << ',' << opt(r.order) << '\n';
  finish(os, path);
}

void write_oracle(const std::string& path, const OracleReport& rep) {
  auto os = open_out(path);
  os << "N,tau,max_error,invariant_drift,error_ratio,drift_ratio,oracle_invariant_drift\n";
  for (const auto& r : rep.rows)
    os << r.N << ',' << exact(r.tau) << ',' << exact(r.max_error) << ',' << exact(r.invariant_drift) << ','
       << opt(r.error_ratio) << ',' << opt(r.drift_ratio) << ',' << exact(rep.oracle_invariant_drift) << '\n';
  finish(os, path);
}

void write_degenerate(const std::string& path, const DegenerateReport& rep) {
  auto os = open_out(path);
  os << "mobility,N,tau,t,radius,sup_K,threshold\n";
  for (const auto& r : rep.rows)
    os << r.mobility << ',' << r.N << ',' << exact(r.tau) << ',' << exact(r.t) << ',' << exact(r.radius)
       << ',' << exact(r.sup_K) << ',' << exact(rep.threshold) << '\n';
  finish(os, path);
}

void write_state(const std::string& path, const SimState& s) {
  auto os = open_out(path);
  write_snapshot(os, s.mu, s.t);
  write_snapshot(os, s.rho, s.t);
  write_snapshot(os, s.xi, s.t);
  finish(os, path);
}

SimState read_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  SimState s;
  try {
    s.mu = read_snapshot(in, &s.t);
    s.rho = read_snapshot(in, nullptr);
    s.xi = read_snapshot(in, nullptr);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (!(s.mu.grid == s.rho.grid) || !(s.mu.grid == s.xi.grid))
    throw std::runtime_error(path + ": blocks live on different grids");
  s.dt_rho = ScalarField(s.rho.grid, 0.0);
  return s;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char two[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(two, sizeof two, "%02x", md[i]);
    hex += two;
  }
  return hex;
}

void write_manifest(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.txt") names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  const std::string path = (fs::path(dir) / "manifest.txt").string();
  auto os = open_out(path);
  for (const auto& n : names) os << sha256_file((fs::path(dir) / n).string()) << "  " << n << '\n';
  finish(os, path);
}

void write_run(const std::string& dir, const Config& cfg, const Trajectory& traj, const Laws& laws) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir + ": " + ec.message());
  {
    const std::string path = (fs::path(dir) / "config.txt").string();
    auto os = open_out(path);
    os << render_config(cfg);
    finish(os, path);
  }
  write_series((fs::path(dir) / "series.csv").string(), series_rows(traj, cfg.solver, laws));
  const std::size_t last = traj.states.empty() ? 0 : traj.states.size() - 1;
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    if (n % static_cast<std::size_t>(cfg.stride) != 0 && n != last) continue;
    write_state((fs::path(dir) / ("state_" + std::to_string(n) + ".txt")).string(), traj.states[n]);
  }
  write_manifest(dir);
}

LoadedRun read_run(const std::string& dir) {
  LoadedRun out;
  out.config = load_config((fs::path(dir) / "config.txt").string());
  const int N = out.config.solver.N;
  out.traj.tau = out.config.solver.tau();
  for (int n = 0; n <= N; ++n) {
    const fs::path p = fs::path(dir) / ("state_" + std::to_string(n) + ".txt");
    if (!fs::exists(p))
      throw std::runtime_error(p.string() + ": missing (diagnose needs every step; rerun with stride = 1)");
    out.traj.states.push_back(read_state(p.string()));
  }
  for (std::size_t n = 1; n < out.traj.states.size(); ++n) {
    auto& s = out.traj.states[n];
    s.dt_rho = ScalarField(s.rho.grid, (s.rho.values - out.traj.states[n - 1].rho.values) / out.traj.tau);
  }
  out.traj.reports.resize(out.traj.steps());
  return out;
}

}  // namespace vch
