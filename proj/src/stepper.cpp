#include "vchsim/stepper.hpp"

#include "vchsim/error.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace vch {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// ---------------------------------------------------------------------------
// rho stage
// ---------------------------------------------------------------------------

/// delta(rho - rho_prev)/tau - Lap rho + [beta_lambda(rho)] + pi(rho) - mu_del g'(rho)
class RhoSystem {
 public:
  RhoSystem(const SimState& prev, const ScalarField& mu_del, const SolverConfig& cfg,
            const Laws& laws)
      : prev_(prev.rho.values),
        mu_del_(mu_del.values),
        laws_(laws),
        mass_(cfg.delta / cfg.tau()),
        lambda_(cfg.lambda()),
        stiffness_(stiffness_matrix(prev.rho.grid, ScalarField(prev.rho.grid, 1.0),
                                    FaceAverage::Arithmetic)) {}

  Vec smooth_residual(const Vec& rho) const {
    Vec r = mass_ * (rho - prev_) + stiffness_ * rho;
    const auto& pot = laws_.potential;
    const auto& cpl = laws_.coupling;
    for (Eigen::Index i = 0; i < rho.size(); ++i)
      r[i] += pot.pi(rho[i]) - mu_del_[i] * cpl.dg(rho[i]);
    return r;
  }

  Vec residual(const Vec& rho) const {
    Vec r = smooth_residual(rho);
    for (Eigen::Index i = 0; i < rho.size(); ++i)
      r[i] += yosida(laws_.potential.graph, lambda_, rho[i]);
    return r;
  }

  /// Jacobian; `mask[i] != 0` rows and columns are replaced by identity.
  SpMat jacobian(const Vec& rho, bool with_graph, const std::vector<std::int8_t>* mask) const {
    SpMat j = stiffness_;
    const auto& pot = laws_.potential;
    const auto& cpl = laws_.coupling;
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
      double d = mass_ + pot.pi_slope(rho[i]) - mu_del_[i] * cpl.d2g(rho[i]);
      if (with_graph) d += yosida_slope(pot.graph, lambda_, rho[i]);
      j.coeffRef(i, i) += d;
    }
    if (mask) {
      for (int k = 0; k < j.outerSize(); ++k) {
        for (SpMat::InnerIterator it(j, k); it; ++it) {
          const bool fixed = (*mask)[static_cast<std::size_t>(it.row())] != 0 ||
                             (*mask)[static_cast<std::size_t>(it.col())] != 0;
          if (fixed) it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
        }
      }
    }
    return j;
  }

 private:
  Vec prev_;
  Vec mu_del_;
  const Laws& laws_;
  double mass_;
  double lambda_;
  SpMat stiffness_;
};

struct NewtonResult {
  Vec x;
  int iters = 0;
  double residual = 0.0;
};

/// Damped Newton on F(x) = 0 with max-norm backtracking.
template <class ResidualFn, class JacobianFn>
NewtonResult damped_newton(Vec x, ResidualFn residual, JacobianFn jacobian, double tol,
                           int max_iter, const char* what) {
  Vec f = residual(x);
  double norm = max_abs(f);
  Eigen::SimplicialLDLT<SpMat> solver;
  bool analyzed = false;
  int it = 0;
  while (norm > tol) {
    if (it >= max_iter)
      throw SolverError(std::string(what) + ": Newton did not converge (residual " +
                            fmt_num(norm) + ")",
                        norm, it);
    SpMat j = jacobian(x);
    if (!analyzed) {
      solver.analyzePattern(j);
      analyzed = true;
    }
    solver.factorize(j);
    if (solver.info() != Eigen::Success)
      throw SolverError(std::string(what) + ": Jacobian factorization failed", norm, it);
    const Vec dx = solver.solve(-f);
    double s = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      Vec trial = x + s * dx;
      Vec ft = residual(trial);
      const double nt = max_abs(ft);
      if (std::isfinite(nt) && nt < (1.0 - 1e-4 * s) * norm) {
        x = std::move(trial);
        f = std::move(ft);
        norm = nt;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    ++it;
    if (!accepted) {
      // Stagnation at round-off level counts as converged only below the tolerance.
      throw SolverError(std::string(what) + ": line search failed (residual " +
                            fmt_num(norm) + ")",
                        norm, it);
    }
  }
  return {std::move(x), it, norm};
}

struct ObstacleResult {
  Vec rho;
  Vec xi;
  int sweeps = 0;
  int newton_iters = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Primal-dual active-set refinement for beta = subdifferential of I_[a,b]:
/// rho is pinned to a bound on active nodes, xi = 0 elsewhere, and xi on the
/// active nodes is read off the equation.
ObstacleResult refine_obstacle(const RhoSystem& sys, const Vec& rho_start,
                               const ClampIndicator& box, const SolverConfig& cfg,
                               double complementarity_scale) {
  const auto n = static_cast<std::size_t>(rho_start.size());
  std::vector<std::int8_t> state(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rho_start[static_cast<Eigen::Index>(i)];
    state[i] = r > box.b ? 1 : (r < box.a ? -1 : 0);
  }
  ObstacleResult out;
  Vec rho = rho_start;
  const double c = complementarity_scale;
  for (int sweep = 1; sweep <= 100; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      if (state[i] > 0) rho[k] = box.b;
      else if (state[i] < 0) rho[k] = box.a;
      else rho[k] = std::clamp(rho[k], box.a, box.b);
    }
    auto reduced = [&](const Vec& x) {
      Vec r = sys.smooth_residual(x);
      for (std::size_t i = 0; i < n; ++i)
        if (state[i] != 0) r[static_cast<Eigen::Index>(i)] = 0.0;
      return r;
    };
    auto jac = [&](const Vec& x) { return sys.jacobian(x, false, &state); };
    NewtonResult nr;
    try {
      nr = damped_newton(rho, reduced, jac, cfg.newton_tol, cfg.newton_max_iter,
                         "rho obstacle refinement");
    } catch (const SolverError&) {
      return out;
    }
    out.newton_iters += nr.iters;
    rho = nr.x;
    const Vec g = sys.smooth_residual(rho);
    Vec xi = Vec::Zero(rho.size());
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      if (state[i] != 0) xi[k] = -g[k];
      std::int8_t next = 0;
      if (xi[k] + c * (rho[k] - box.b) > 0.0) next = 1;
      else if (xi[k] + c * (rho[k] - box.a) < 0.0) next = -1;
      if (next != state[i]) changed = true;
      state[i] = next;
    }
    out.sweeps = sweep;
    if (!changed) {
      out.rho = rho;
      out.xi = xi;
      out.residual = nr.residual;
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

SpMat stiffness_matrix(const Grid& g, const ScalarField& k, FaceAverage avg) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(g.size() * 5);
  const double inv_h2 = 1.0 / (g.h() * g.h());
  for_each_face(g, [&](std::size_t p, std::size_t q) {
    const double w = face_coefficient(k[p], k[q], avg) * inv_h2;
    const auto ip = static_cast<int>(p), iq = static_cast<int>(q);
    trips.emplace_back(ip, ip, w);
    trips.emplace_back(iq, iq, w);
    trips.emplace_back(ip, iq, -w);
    trips.emplace_back(iq, ip, -w);
  });
  const auto n = static_cast<Eigen::Index>(g.size());
  for (Eigen::Index i = 0; i < n; ++i) trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 0.0);
  SpMat s(n, n);
  s.setFromTriplets(trips.begin(), trips.end());
  s.makeCompressed();
  return s;
}

void validate(const SolverConfig& cfg, const Laws& laws) {
  if (cfg.N < 0) throw ConfigError("violates (time-grid): N must be a nonnegative integer", "time-grid");
  if (!(cfg.T >= 0.0) || !std::isfinite(cfg.T)) throw ConfigError("violates (time-grid): T must be finite and >= 0", "time-grid");
  if ((cfg.N == 0) != (cfg.T == 0.0))
    throw ConfigError("violates (time-grid): tau = T/N needs N >= 1 for T > 0 (N = 0 only with T = 0)",
                      "time-grid");
  if (!(cfg.delta > 0.0)) throw ConfigError("violates (hpstruct): delta must be positive", "hpstruct");
  if (!(laws.coupling.epsilon > 0.0)) throw ConfigError("violates (newh): epsilon must be positive", "newh");
  const auto& mob = laws.mobility;
  if (!(mob.kappa_star > 0.0) || !(mob.kappa_sup > 0.0) || !(mob.r_star >= 0.0))
    throw ConfigError("violates (hpcost): need kappa_* > 0, kappa^* > 0, r_* >= 0", "hpcost");
  const double span = 10.0 * std::max(1.0, mob.r_star);
  for (int k = 0; k <= 400; ++k) {
    const double r = span * k / 400.0;
    const double kap = mob.kappa(r);
    if (!(kap >= 0.0))
      throw ConfigError("violates (hpK): mobility negative at r = " + fmt_num(r), "hpK");
    if (kap > mob.kappa_sup * (1.0 + 1e-12))
      throw ConfigError("violates (hpkbis): kappa exceeds kappa^* at r = " + fmt_num(r), "hpkbis");
    if (r >= mob.r_star && kap < mob.kappa_star * (1.0 - 1e-12))
      throw ConfigError("violates (hpkbis): kappa below kappa_* at r = " + fmt_num(r), "hpkbis");
  }
  if (cfg.N > 0) {
    if (cfg.tau() > mob.kappa_sup)
      throw ConfigError("violates (tau-le-kappa-sup): time step tau = " + fmt_num(cfg.tau()) +
                            " exceeds kappa^* (need tau <= kappa^*)",
                        "tau-le-kappa-sup");
    if (!(cfg.lambda() > 0.0)) throw ConfigError("violates (yosida): yosida_lambda must be positive", "yosida");
    if (!(cfg.mobility_floor() >= 0.0))
      throw ConfigError("violates (defkt): mobility_floor_tau must be >= 0", "defkt");
  }
  if (!(cfg.newton_tol > 0.0) || !(cfg.linear_tol > 0.0) || cfg.newton_max_iter < 1 ||
      cfg.linear_max_iter < 1)
    throw ConfigError("violates (solver): solver tolerances and iteration limits must be positive", "solver");
  const auto [lo, hi] = domain_closure(laws.potential.graph);
  if (std::isfinite(lo) && std::isfinite(hi)) {
    for (int k = 0; k <= 100; ++k) {
      const double r = lo + (hi - lo) * k / 100.0;
      if (laws.coupling.g(r) < 0.0)
        throw ConfigError("violates (hpfg): g negative on the domain of beta at r = " + fmt_num(r),
                          "hpfg");
    }
  }
}

void validate_initial_data(const Laws& laws, const ScalarField& mu0, const ScalarField& rho0) {
  if (!(mu0.grid == rho0.grid)) throw ConfigError("violates (hpzero): mu0 and rho0 live on different grids", "hpzero");
  if (!mu0.all_finite() || !rho0.all_finite())
    throw ConfigError("violates (hpzero): initial data must be finite", "hpzero");
  if (mu0.min() < 0.0)
    throw ConfigError("violates (hpzero): mu0 has negative values (min " + fmt_num(mu0.min()) + ")",
                      "hpzero");
  const auto [lo, hi] = domain_closure(laws.potential.graph);
  if (rho0.min() < lo || rho0.max() > hi)
    throw ConfigError("violates (hpzero): rho0 leaves the closed domain [" + fmt_num(lo) + ", " +
                          fmt_num(hi) + "] of beta",
                      "hpzero");
  for (std::size_t k = 0; k < rho0.size(); ++k) {
    if (!in_domain(laws.potential.graph, rho0[k]))
      throw ConfigError("violates (hprhozbis): beta(rho0) is empty at node " + std::to_string(k) +
                            " (rho0 = " + fmt_num(rho0[k]) + ")",
                        "hprhozbis");
  }
}

ScalarField delayed_mu(const Trajectory& history, double t, double tau, const ScalarField& mu0) {
  if (!(tau > 0.0)) throw std::invalid_argument("delayed_mu: tau must be positive");
  if (t <= tau * (1.0 + 1e-12)) return mu0;
  const double target = t - tau;
  const double k = std::round(target / tau);
  const auto idx = static_cast<std::size_t>(k);
  if (k < 0.0 || idx >= history.states.size() ||
      std::abs(history.states[idx].t - target) > 1e-9 * tau)
    throw std::out_of_range("delayed_mu: missing history sample at t = " + fmt_num(target));
  return history.states[idx].mu;
}

RhoStage step_rho(const SimState& prev, const ScalarField& mu_del, const SolverConfig& cfg,
                  const Laws& laws) {
  if (!(mu_del.grid == prev.rho.grid)) throw std::invalid_argument("step_rho: grid mismatch");
  const RhoSystem sys(prev, mu_del, cfg, laws);
  RhoStage out;
  auto residual = [&](const Vec& x) { return sys.residual(x); };
  auto jac = [&](const Vec& x) { return sys.jacobian(x, true, nullptr); };
  NewtonResult nr =
      damped_newton(prev.rho.values, residual, jac, cfg.newton_tol, cfg.newton_max_iter, "rho stage");
  out.report.newton_iters = nr.iters;
  out.report.newton_residual = nr.residual;

  const Grid& g = prev.rho.grid;
  Vec xi(nr.x.size());
  if (const auto* box = std::get_if<ClampIndicator>(&laws.potential.graph)) {
    const double scale = cfg.delta / cfg.tau() + 4.0 * g.dim / (g.h() * g.h());
    ObstacleResult ob = refine_obstacle(sys, nr.x, *box, cfg, scale);
    out.report.active_set_iters = ob.sweeps;
    out.report.newton_iters += ob.newton_iters;
    if (ob.converged) {
      out.rho = ScalarField(g, std::move(ob.rho));
      out.xi = ScalarField(g, std::move(ob.xi));
      out.report.newton_residual = ob.residual;
    } else {
      // plain resolvent selection of the regularized solution
      for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = graph_select(*box, cfg.lambda(), nr.x[i]);
      Vec rho = nr.x.unaryExpr([&](double r) { return std::clamp(r, box->a, box->b); });
      out.rho = ScalarField(g, std::move(rho));
      out.xi = ScalarField(g, std::move(xi));
      out.report.projected = true;
    }
  } else {
    for (Eigen::Index i = 0; i < xi.size(); ++i)
      xi[i] = yosida(laws.potential.graph, cfg.lambda(), nr.x[i]);
    out.rho = ScalarField(g, std::move(nr.x));
    out.xi = ScalarField(g, std::move(xi));
  }
  out.report.min_rho = out.rho.min();
  out.report.max_rho = out.rho.max();
  return out;
}

SpMat mu_system_matrix(const SimState& prev, const ScalarField& rho_new, const ScalarField& dt_rho,
                       const SolverConfig& cfg, const Laws& laws) {
  const Grid& g = prev.mu.grid;
  const double tau = cfg.tau();
  const double floor = cfg.mobility_floor();
  ScalarField k(g);
  for (std::size_t i = 0; i < g.size(); ++i) k[i] = laws.mobility.kappa(std::abs(prev.mu[i])) + floor;
  SpMat a = stiffness_matrix(g, k, laws.face_average);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double b = laws.coupling.dg(rho_new[i]) * dt_rho[i];
    const double react = cfg.sign_split_reaction ? std::max(b, 0.0) : b;
    const auto ii = static_cast<Eigen::Index>(i);
    a.coeffRef(ii, ii) += laws.coupling.a(rho_new[i]) / tau + react;
  }
  return a;
}

MuStage step_mu(const SimState& prev, const ScalarField& rho_new, const ScalarField& dt_rho,
                const SolverConfig& cfg, const Laws& laws) {
  const Grid& g = prev.mu.grid;
  if (!(rho_new.grid == g) || !(dt_rho.grid == g)) throw std::invalid_argument("step_mu: grid mismatch");
  const double tau = cfg.tau();
  const SpMat a = mu_system_matrix(prev, rho_new, dt_rho, cfg, laws);
  Vec rhs(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double b = laws.coupling.dg(rho_new[i]) * dt_rho[i];
    double coef = laws.coupling.a(rho_new[i]) / tau;
    if (cfg.sign_split_reaction) coef += std::max(-b, 0.0);
    rhs[static_cast<Eigen::Index>(i)] = coef * prev.mu[i];
  }
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(cfg.linear_tol);
  cg.setMaxIterations(cfg.linear_max_iter);
  cg.compute(a);
  Vec mu = cg.solveWithGuess(rhs, prev.mu.values);
  MuStage out;
  out.report.linear_iters = static_cast<int>(cg.iterations());
  out.report.linear_residual = cg.error();
  if (cg.info() != Eigen::Success || !mu.allFinite())
    throw SolverError("mu stage: conjugate gradients did not converge (relative residual " +
                          fmt_num(cg.error()) + ")",
                      cg.error(), static_cast<int>(cg.iterations()));
  out.mu = ScalarField(g, std::move(mu));
  out.report.min_mu = out.mu.min();
  out.report.max_mu = out.mu.max();
  return out;
}

SimState initial_state(const SolverConfig& cfg, const Laws& laws, const ScalarField& mu0,
                       const ScalarField& rho0) {
  SimState s;
  s.t = 0.0;
  s.mu = mu0;
  s.rho = rho0;
  s.xi = ScalarField(rho0.grid);
  const double lambda = cfg.N > 0 ? cfg.lambda() : cfg.yosida_lambda.value_or(1.0);
  for (std::size_t i = 0; i < rho0.size(); ++i) s.xi[i] = graph_select(laws.potential.graph, lambda, rho0[i]);
  s.dt_rho = ScalarField(rho0.grid, 0.0);
  return s;
}

std::pair<SimState, StepReport> advance(const SimState& state, const SolverConfig& cfg,
                                        const Laws& laws, Trajectory& history) {
  const double tau = cfg.tau();
  const double step = std::round(state.t / tau) + 1.0;
  const double t_new = step * tau;
  const ScalarField mu_del = delayed_mu(history, t_new, tau, history.mu0());
  RhoStage rs = step_rho(state, mu_del, cfg, laws);
  ScalarField dt_rho(state.rho.grid, (rs.rho.values - state.rho.values) / tau);
  MuStage ms = step_mu(state, rs.rho, dt_rho, cfg, laws);

  StepReport rep = rs.report;
  rep.linear_iters = ms.report.linear_iters;
  rep.linear_residual = ms.report.linear_residual;
  rep.min_mu = ms.report.min_mu;
  rep.max_mu = ms.report.max_mu;

  SimState next{t_new, std::move(ms.mu), std::move(rs.rho), std::move(rs.xi), std::move(dt_rho)};
  history.states.push_back(next);
  history.reports.push_back(rep);
  return {std::move(next), rep};
}

Trajectory run(const SolverConfig& cfg, const Laws& laws, const ScalarField& mu0,
               const ScalarField& rho0) {
  validate(cfg, laws);
  validate_initial_data(laws, mu0, rho0);
  Trajectory traj;
  traj.tau = cfg.tau();
  traj.states.push_back(initial_state(cfg, laws, mu0, rho0));
  for (int n = 0; n < cfg.N; ++n) {
    try {
      advance(traj.states.back(), cfg, laws, traj);
    } catch (const SolverError& e) {
      throw RunError("step " + std::to_string(n + 1) + ": " + e.what(), std::move(traj));
    }
  }
  return traj;
}

Trajectory run_growing_intervals(const SolverConfig& cfg, const Laws& laws,
                                 const ScalarField& mu0, const ScalarField& rho0) {
  validate(cfg, laws);
  validate_initial_data(laws, mu0, rho0);
  const double tau = cfg.tau();
  const SimState init = initial_state(cfg, laws, mu0, rho0);

  std::vector<ScalarField> mu_prev{mu0};  // mu iterate on I_{n-1}
  Trajectory traj;
  traj.tau = tau;
  traj.states.push_back(init);
  for (int n = 1; n <= cfg.N; ++n) {
    // rho on [0, t_n] with the delayed previous iterate
    std::vector<RhoStage> rho_path;
    rho_path.reserve(static_cast<std::size_t>(n));
    SimState cur = init;
    for (int k = 1; k <= n; ++k) {
      rho_path.push_back(step_rho(cur, mu_prev[static_cast<std::size_t>(k - 1)], cfg, laws));
      cur.rho = rho_path.back().rho;
    }
    // mu on [0, t_n] with rho frozen
    std::vector<ScalarField> mu_new{mu0};
    Trajectory sweep;
    sweep.tau = tau;
    sweep.states.push_back(init);
    for (int k = 1; k <= n; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const SimState& before = sweep.states.back();
      RhoStage& rs = rho_path[kk - 1];
      ScalarField dt_rho(before.rho.grid, (rs.rho.values - before.rho.values) / tau);
      MuStage ms = step_mu(before, rs.rho, dt_rho, cfg, laws);
      StepReport rep = rs.report;
      rep.linear_iters = ms.report.linear_iters;
      rep.linear_residual = ms.report.linear_residual;
      rep.min_mu = ms.report.min_mu;
      rep.max_mu = ms.report.max_mu;
      mu_new.push_back(ms.mu);
      sweep.states.push_back(SimState{static_cast<double>(k) * tau, std::move(ms.mu), rs.rho,
                                      rs.xi, std::move(dt_rho)});
      sweep.reports.push_back(rep);
    }
    mu_prev = std::move(mu_new);
    traj = std::move(sweep);
  }
  return traj;
}

}  // namespace vch
