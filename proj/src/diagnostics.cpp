#include "vchsim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vch {

namespace {

using Vec = Eigen::VectorXd;

Vec coefficient_a(const Laws& laws, const ScalarField& rho) {
  return rho.values.unaryExpr([&](double r) { return laws.coupling.a(r); });
}

ScalarField lagged_mobility(const Laws& laws, const ScalarField& mu_prev, double floor) {
  ScalarField k(mu_prev.grid);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = laws.mobility.kappa(std::abs(mu_prev[i])) + floor;
  return k;
}

double free_energy(const ScalarField& rho, const Laws& laws, double lambda) {
  const Grid& g = rho.grid;
  double bulk = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    bulk += f1_envelope(laws.potential, lambda, rho[i]) + laws.potential.f2(rho[i]);
  return 0.5 * h1_seminorm_sq(g, rho) + g.cell_volume() * bulk;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::vector<MuLedgerRow> mu_energy_ledger(const Trajectory& traj, const SolverConfig& cfg,
                                          const Laws& laws) {
  std::vector<MuLedgerRow> rows;
  if (traj.states.empty()) return rows;
  const Grid& g = traj.grid();
  const double tau = traj.tau;
  const double vol = g.cell_volume();
  {
    const auto& s0 = traj.states.front();
    const Vec a0 = coefficient_a(laws, s0.rho);
    MuLedgerRow r0;
    r0.E_mu = 0.5 * vol * (a0.array() * s0.mu.values.array().square()).sum();
    rows.push_back(r0);
  }
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const SimState& prev = traj.states[n - 1];
    const SimState& cur = traj.states[n];
    const Vec a_prev = coefficient_a(laws, prev.rho);
    const Vec a_cur = coefficient_a(laws, cur.rho);
    const auto mu = cur.mu.values.array();
    const auto mu_p = prev.mu.values.array();

    MuLedgerRow r;
    r.step = static_cast<int>(n);
    r.t = cur.t;
    r.E_mu = 0.5 * vol * (a_cur.array() * mu.square()).sum();
    const ScalarField k = lagged_mobility(laws, prev.mu, cfg.mobility_floor());
    r.diss = tau * weighted_h1_seminorm_sq(g, k, cur.mu, laws.face_average);
    r.num_diss = 0.5 * vol * (a_cur.array() * (mu - mu_p).square()).sum();

    double react = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double b = laws.coupling.dg(cur.rho[i]) * cur.dt_rho[i];
      if (cfg.sign_split_reaction)
        react += std::max(b, 0.0) * mu[ii] * mu[ii] - std::max(-b, 0.0) * mu_p[ii] * mu[ii];
      else
        react += b * mu[ii] * mu[ii];
    }
    r.cross = 0.5 * vol * ((a_cur - a_prev).array() * mu_p.square()).sum() - tau * vol * react;
    r.residual = r.E_mu - rows.back().E_mu + r.diss - r.cross;
    r.diss_cum = rows.back().diss_cum + r.diss;
    r.num_diss_cum = rows.back().num_diss_cum + r.num_diss;
    r.cross_cum = rows.back().cross_cum + r.cross;
    rows.push_back(r);
  }
  return rows;
}

std::vector<RhoLedgerRow> rho_energy_ledger(const Trajectory& traj, const SolverConfig& cfg,
                                            const Laws& laws) {
  std::vector<RhoLedgerRow> rows;
  if (traj.states.empty()) return rows;
  const Grid& g = traj.grid();
  const double vol = g.cell_volume();
  const double lambda = traj.tau > 0.0 ? cfg.yosida_lambda.value_or(traj.tau)
                                       : cfg.yosida_lambda.value_or(1.0);
  const auto [lo, hi] = domain_closure(laws.potential.graph);
  auto outside = [&](const ScalarField& rho) {
    int c = 0;
    for (std::size_t i = 0; i < rho.size(); ++i)
      if (rho[i] < lo || rho[i] > hi) ++c;
    return c;
  };

  RhoLedgerRow r0;
  r0.F_rho = free_energy(traj.states.front().rho, laws, lambda);
  r0.nodes_outside = outside(traj.states.front().rho);
  rows.push_back(r0);
  const double F0 = r0.F_rho;
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const SimState& prev = traj.states[n - 1];
    const SimState& cur = traj.states[n];
    const auto drho = (cur.rho.values - prev.rho.values).array();
    RhoLedgerRow r;
    r.step = static_cast<int>(n);
    r.t = cur.t;
    r.F_rho = free_energy(cur.rho, laws, lambda);
    r.visc = cfg.delta / traj.tau * vol * drho.square().sum();
    double work = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      work += laws.coupling.dg(cur.rho[i]) * prev.mu[i] * drho[static_cast<Eigen::Index>(i)];
    r.work = vol * work;
    r.allowance = 0.5 * laws.potential.semiconcavity * vol * drho.square().sum();
    r.visc_cum = rows.back().visc_cum + r.visc;
    r.work_cum = rows.back().work_cum + r.work;
    r.allowance_cum = rows.back().allowance_cum + r.allowance;
    r.slack = F0 + r.work_cum + r.allowance_cum - r.F_rho - r.visc_cum;
    r.nodes_outside = outside(cur.rho);
    rows.push_back(r);
  }
  return rows;
}

BoundednessReport boundedness_report(const Trajectory& traj, const ScalarField& mu0) {
  BoundednessReport rep;
  rep.sup_mu0 = mu0.max();
  rep.sup_mu = -std::numeric_limits<double>::infinity();
  rep.inf_mu = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.states) {
    rep.sup_mu = std::max(rep.sup_mu, s.mu.max());
    rep.inf_mu = std::min(rep.inf_mu, s.mu.min());
  }
  return rep;
}

std::vector<ResidualRow> formulation_residuals(const Trajectory& traj, const SolverConfig& cfg,
                                               const Laws& laws) {
  std::vector<ResidualRow> rows;
  if (traj.states.empty()) return rows;
  const Grid& g = traj.grid();
  const double tau = traj.tau;
  const double vol = g.cell_volume();

  // bump test fields at every 4th node (per axis): 1 at the centre, 1/2 on neighbours
  std::vector<std::size_t> centres;
  if (g.dim == 1) {
    for (int i = 0; i < g.n; i += 4) centres.push_back(static_cast<std::size_t>(i));
  } else {
    for (int j = 0; j < g.n; j += 4)
      for (int i = 0; i < g.n; i += 4) centres.push_back(g.index(i, j));
  }
  auto neighbours = [&](std::size_t c) {
    std::vector<std::size_t> nb;
    const int i = static_cast<int>(c % static_cast<std::size_t>(g.n));
    const int j = static_cast<int>(c / static_cast<std::size_t>(g.n));
    auto add = [&](int ii, int jj) {
      if (ii >= 0 && ii < g.n && jj >= 0 && jj < g.n) nb.push_back(g.dim == 1 ? std::size_t(ii) : g.index(ii, jj));
    };
    if (g.dim == 1) {
      add(i - 1, 0);
      add(i + 1, 0);
    } else {
      add(i - 1, j);
      add(i + 1, j);
      add(i, j - 1);
      add(i, j + 1);
    }
    return nb;
  };

  rows.push_back(ResidualRow{});
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const SimState& prev = traj.states[n - 1];
    const SimState& cur = traj.states[n];
    ResidualRow r;
    r.step = static_cast<int>(n);
    r.t = cur.t;

    // native linearized mu system
    const auto A = mu_system_matrix(prev, cur.rho, cur.dt_rho, cfg, laws);
    Vec rhs(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double b = laws.coupling.dg(cur.rho[i]) * cur.dt_rho[i];
      double coef = laws.coupling.a(cur.rho[i]) / tau;
      if (cfg.sign_split_reaction) coef += std::max(-b, 0.0);
      rhs[static_cast<Eigen::Index>(i)] = coef * prev.mu[i];
    }
    const Vec res = A * cur.mu.values - rhs;
    const double rn = rhs.norm();
    r.native_mu = rn > 0.0 ? res.norm() / rn : res.norm();

    // native rho equation with the stored selection
    const ScalarField lap = laplace_neumann(g, cur.rho);
    double rho_res = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = cfg.delta * cur.dt_rho[i] - lap[i] + cur.xi[i] + laws.potential.pi(cur.rho[i]) -
                       prev.mu[i] * laws.coupling.dg(cur.rho[i]);
      rho_res = std::max(rho_res, std::abs(v));
    }
    r.native_rho = rho_res;

    // pointwise form with the unregularized mobility at the new time level
    ScalarField k_new(g);
    for (std::size_t i = 0; i < g.size(); ++i) k_new[i] = laws.mobility.kappa(std::max(cur.mu[i], 0.0));
    const ScalarField flux = div_k_grad(g, k_new, cur.mu, laws.face_average);
    double strong = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = laws.coupling.a(cur.rho[i]) * (cur.mu[i] - prev.mu[i]) / tau +
                       cur.mu[i] * laws.coupling.dg(cur.rho[i]) * cur.dt_rho[i] - flux[i];
      strong = std::max(strong, std::abs(v));
    }
    r.strong_mu = strong;

    // conservative form d_t((eps + 2g) mu) - mu g' d_t rho - Lap K(mu), tested by bumps
    ScalarField kmu(g);
    for (std::size_t i = 0; i < g.size(); ++i) kmu[i] = K_eval(laws.mobility, std::max(cur.mu[i], 0.0));
    const ScalarField lapK = laplace_neumann(g, kmu);
    ScalarField pointwise(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double am_new = laws.coupling.a(cur.rho[i]) * cur.mu[i];
      const double am_old = laws.coupling.a(prev.rho[i]) * prev.mu[i];
      pointwise[i] = (am_new - am_old) / tau - cur.mu[i] * laws.coupling.dg(cur.rho[i]) * cur.dt_rho[i] -
                     lapK[i];
    }
    double weak = 0.0;
    for (std::size_t c : centres) {
      double acc = pointwise[c];
      for (std::size_t q : neighbours(c)) acc += 0.5 * pointwise[q];
      weak = std::max(weak, std::abs(vol * acc));
    }
    r.weak_mu = weak;
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> ContractionSeries::total() const {
  std::vector<double> t(z_gap.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = z_gap[i] + rho_gap[i];
  return t;
}

ContractionSeries contraction_metric(const Trajectory& a, const Trajectory& b, const Laws& laws) {
  if (a.states.empty() || b.states.empty() || !(a.grid() == b.grid()) ||
      a.states.size() != b.states.size() || a.tau != b.tau)
    throw std::invalid_argument("contraction_metric: trajectories do not share grid and time grid");
  const Grid& g = a.grid();
  ContractionSeries out;
  out.backed = std::holds_alternative<ConstantMobility>(laws.mobility.kind);
  auto z = [&](const SimState& s) {
    Vec v(s.mu.values.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = s.mu.values[i] * std::sqrt(laws.coupling.a(s.rho.values[i]));
    return v;
  };
  for (std::size_t n = 0; n < a.states.size(); ++n) {
    const Vec dz = z(a.states[n]) - z(b.states[n]);
    const Vec dr = a.states[n].rho.values - b.states[n].rho.values;
    out.z_gap.push_back(g.cell_volume() * dz.squaredNorm());
    out.rho_gap.push_back(g.cell_volume() * dr.squaredNorm());
  }
  const auto m = out.total();
  double rate = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n < m.size(); ++n) {
    if (m[n - 1] > 0.0 && m[n] > 0.0) rate = std::max(rate, std::log(m[n] / m[n - 1]) / a.tau);
  }
  out.growth_rate = std::isfinite(rate) ? rate : 0.0;
  return out;
}

double first_step_increment(const Trajectory& traj) {
  if (traj.states.size() < 2) return 0.0;
  const Grid& g = traj.grid();
  const Vec d = traj.states[1].rho.values - traj.states[0].rho.values;
  return std::sqrt(g.cell_volume() * d.squaredNorm()) / traj.tau;
}

DiagnosticReport diagnose(const Trajectory& traj, const SolverConfig& cfg, const Laws& laws) {
  DiagnosticReport rep;
  rep.mu = mu_energy_ledger(traj, cfg, laws);
  rep.rho = rho_energy_ledger(traj, cfg, laws);
  rep.residuals = formulation_residuals(traj, cfg, laws);
  rep.bounds = boundedness_report(traj, traj.mu0());
  rep.first_increment = first_step_increment(traj);

  auto flag = [&](int step, std::string check, std::string detail) {
    rep.violations.push_back({step, std::move(check), std::move(detail)});
  };
  const double E0 = rep.mu.empty() ? 0.0 : rep.mu.front().E_mu;
  const double F0 = rep.rho.empty() ? 0.0 : rep.rho.front().F_rho;
  const double rho_tol = 1e-7 * (1.0 + std::abs(F0));
  const bool clamp = std::holds_alternative<ClampIndicator>(laws.potential.graph);
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const int step = static_cast<int>(n);
    const auto& s = traj.states[n];
    if (cfg.sign_split_reaction && s.mu.min() < -10.0 * cfg.linear_tol)
      flag(step, "positivity", "min mu = " + num(s.mu.min()));
    const double defect = rep.mu[n].residual + rep.mu[n].num_diss;
    if (std::abs(defect) > 1e-9 * E0 + 1e-300)
      flag(step, "mu-energy-identity", "defect = " + num(defect));
    if (rep.mu[n].residual > 1e-9 * E0 && rep.mu[n].residual > 0.0 && E0 > 0.0)
      flag(step, "mu-energy-dissipation", "residual = " + num(rep.mu[n].residual));
    if (rep.rho[n].slack < -rho_tol) flag(step, "rho-energy", "slack = " + num(rep.rho[n].slack));
    if (clamp && rep.rho[n].nodes_outside > 0)
      flag(step, "constraint", std::to_string(rep.rho[n].nodes_outside) + " nodes outside [a, b]");
    if (rep.residuals[n].native_rho > 10.0 * (cfg.newton_tol + cfg.linear_tol) && !traj.reports.empty() &&
        !traj.reports[n - 1].projected)
      flag(step, "rho-residual", "native rho residual = " + num(rep.residuals[n].native_rho));
    if (rep.residuals[n].native_mu > 10.0 * (cfg.newton_tol + cfg.linear_tol))
      flag(step, "mu-residual", "native mu residual = " + num(rep.residuals[n].native_mu));
  }
  return rep;
}

}  // namespace vch
