#include "vchsim/studies.hpp"

#include "vchsim/error.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <stdexcept>

namespace vch {

namespace {

Problem with_steps(const Problem& base, int N) {
  Problem p = base;
  p.cfg.N = N;
  return p;
}

// Member runs are independent; results come back in submission order.
std::vector<Trajectory> run_all(const std::vector<Problem>& problems) {
  std::vector<std::future<Trajectory>> jobs;
  jobs.reserve(problems.size());
  for (const auto& p : problems)
    jobs.push_back(std::async(std::launch::async, [&p] { return run(p); }));
  std::vector<Trajectory> out;
  out.reserve(jobs.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

double invariant(const Laws& laws, double mu, double rho) { return laws.coupling.a(rho) * mu * mu; }

}  // namespace

Trajectory run(const Problem& p) { return run(p.cfg, p.laws, p.mu0, p.rho0); }

double l2q_distance(const Trajectory& coarse, const Trajectory& fine) {
  const std::size_t N = coarse.steps();
  const std::size_t M = fine.steps();
  if (N == 0) return 0.0;
  if (M % N != 0) throw std::invalid_argument("l2q_distance: fine step count is not a multiple");
  const std::size_t stride = M / N;
  const double vol = coarse.grid().cell_volume();
  double acc = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    const auto& a = coarse.states[n];
    const auto& b = fine.states[n * stride];
    acc += (a.mu.values - b.mu.values).squaredNorm() + (a.rho.values - b.rho.values).squaredNorm();
  }
  return std::sqrt(coarse.tau * vol * acc);
}

OrderTable tau_refinement(const Problem& base, const std::vector<int>& Ns, int reference_N,
                          bool extrapolate) {
  if (Ns.size() < 3) throw std::invalid_argument("tau_refinement: need at least 3 step counts");
  for (std::size_t k = 1; k < Ns.size(); ++k)
    if (Ns[k] <= Ns[k - 1]) throw std::invalid_argument("tau_refinement: step counts must increase");
  OrderTable table;
  table.reference_N = reference_N;
  table.extrapolated = extrapolate;
  if (base.cfg.T == 0.0) {
    for (int N : Ns) table.rows.push_back({N, 0.0, 0.0, std::nullopt});
    return table;
  }
  const int half = reference_N / 2;
  for (int N : Ns) {
    if (N < 1 || reference_N % N != 0 || (extrapolate && (reference_N % 2 != 0 || half % N != 0)))
      throw std::invalid_argument("tau_refinement: reference N must be a multiple of every N" +
                                  std::string(extrapolate ? " (and so must reference N / 2)" : ""));
  }

  std::vector<Problem> problems;
  for (int N : Ns) problems.push_back(with_steps(base, N));
  problems.push_back(with_steps(base, reference_N));
  if (extrapolate) problems.push_back(with_steps(base, half));
  std::vector<Trajectory> runs = run_all(problems);

  Trajectory ref = runs[Ns.size()];
  if (extrapolate) {
    const Trajectory& coarse_ref = runs[Ns.size() + 1];
    for (std::size_t m = 0; m <= static_cast<std::size_t>(half); ++m) {
      auto& s = ref.states[2 * m];
      s.mu.values = 2.0 * s.mu.values - coarse_ref.states[m].mu.values;
      s.rho.values = 2.0 * s.rho.values - coarse_ref.states[m].rho.values;
    }
  }

  for (std::size_t k = 0; k < Ns.size(); ++k) {
    OrderRow row;
    row.N = Ns[k];
    row.tau = runs[k].tau;
    row.error = l2q_distance(runs[k], ref);
    if (k > 0) {
      const double prev = table.rows.back().error;
      if (prev > 0.0 && row.error > 0.0 && std::isfinite(prev) && std::isfinite(row.error))
        row.order = std::log(prev / row.error) / std::log(static_cast<double>(Ns[k]) / Ns[k - 1]);
    }
    table.rows.push_back(row);
  }
  return table;
}

HomogeneousPath integrate_homogeneous(const Laws& laws, double delta, double lambda, double mu0,
                                      double rho0, const std::vector<double>& times, double tol) {
  namespace ode = boost::numeric::odeint;
  using State = std::array<double, 2>;
  auto rhs = [&](const State& x, State& dx, double) {
    const double mu = x[0], rho = x[1];
    const double dg = laws.coupling.dg(rho);
    const double drho =
        (mu * dg - yosida(laws.potential.graph, lambda, rho) - laws.potential.pi(rho)) / delta;
    dx[1] = drho;
    dx[0] = -mu * dg * drho / laws.coupling.a(rho);
  };
  HomogeneousPath path;
  if (times.empty()) return path;
  State x{mu0, rho0};
  auto observe = [&](const State& s, double t) {
    path.t.push_back(t);
    path.mu.push_back(s[0]);
    path.rho.push_back(s[1]);
  };
  try {
    auto stepper = ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<State>());
    const double dt0 = times.size() > 1 ? std::max((times[1] - times[0]) * 1e-3, 1e-12) : 1e-6;
    ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), dt0, observe,
                         ode::max_step_checker(100000));
  } catch (const std::exception& e) {
    throw SolverError(std::string("homogeneous oracle did not converge: ") + e.what(), 0.0, 0);
  }
  for (std::size_t k = 0; k < path.t.size(); ++k)
    if (!std::isfinite(path.mu[k]) || !std::isfinite(path.rho[k]))
      throw SolverError("homogeneous oracle produced non-finite values", 0.0, static_cast<int>(k));
  return path;
}

OracleReport homogeneous_oracle(const Problem& base, const std::vector<int>& Ns) {
  const double mu0 = base.mu0[0];
  const double rho0 = base.rho0[0];
  if (base.mu0.min() != base.mu0.max() || base.rho0.min() != base.rho0.max())
    throw std::invalid_argument("homogeneous_oracle: initial data must be spatially constant");
  if (!base.cfg.yosida_lambda)
    throw std::invalid_argument("homogeneous_oracle: set yosida_lambda so the oracle matches every run");

  OracleReport rep;
  std::vector<Problem> problems;
  for (int N : Ns) problems.push_back(with_steps(base, N));
  std::vector<Trajectory> runs = run_all(problems);
  const double I0 = invariant(base.laws, mu0, rho0);

  for (std::size_t k = 0; k < Ns.size(); ++k) {
    const Trajectory& tr = runs[k];
    std::vector<double> times;
    for (const auto& s : tr.states) times.push_back(s.t);
    const HomogeneousPath path = integrate_homogeneous(base.laws, base.cfg.delta, *base.cfg.yosida_lambda,
                                                       mu0, rho0, times);
    OracleRow row;
    row.N = Ns[k];
    row.tau = tr.tau;
    for (std::size_t n = 0; n < tr.states.size(); ++n) {
      const auto& s = tr.states[n];
      for (std::size_t i = 0; i < s.mu.size(); ++i) {
        row.max_error = std::max({row.max_error, std::abs(s.mu[i] - path.mu[n]), std::abs(s.rho[i] - path.rho[n])});
        row.invariant_drift = std::max(row.invariant_drift, std::abs(invariant(base.laws, s.mu[i], s.rho[i]) - I0));
      }
      rep.oracle_invariant_drift =
          std::max(rep.oracle_invariant_drift, std::abs(invariant(base.laws, path.mu[n], path.rho[n]) - I0));
    }
    if (!rep.rows.empty()) {
      const auto& prev = rep.rows.back();
      if (row.max_error > 0.0) row.error_ratio = prev.max_error / row.max_error;
      if (row.invariant_drift > 0.0) row.drift_ratio = prev.invariant_drift / row.invariant_drift;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

double spread_radius(const ScalarField& mu, double center, double threshold) {
  const Grid& g = mu.grid;
  const int ic = std::clamp(static_cast<int>(std::floor(center / g.h())), 0, g.n - 1);
  auto at = [&](int i) { return g.dim == 1 ? mu[static_cast<std::size_t>(i)] : mu[g.index(i, ic)]; };
  if (!(at(ic) > threshold)) return 0.0;
  for (int i = ic + 1; i < g.n; ++i) {
    if (!(at(i) > threshold)) {
      const double a = at(i - 1), b = at(i);
      const double x = g.coord(i - 1) + g.h() * (a - threshold) / (a - b);
      return std::max(x - center, 0.0);
    }
  }
  return g.length - center;
}

DegenerateReport degenerate_demo(const Problem& base, double center, const std::vector<int>& Ns,
                                 int samples, double rel_threshold) {
  if (!std::holds_alternative<TanhPowerMobility>(base.laws.mobility.kind))
    throw std::invalid_argument("degenerate_demo: base problem needs a tanh-power mobility");
  if (samples < 1) throw std::invalid_argument("degenerate_demo: need at least one sample time");
  for (int N : Ns)
    if (N % samples != 0) throw std::invalid_argument("degenerate_demo: every N must be a multiple of samples");

  DegenerateReport rep;
  rep.threshold = rel_threshold * base.mu0.max();

  std::vector<Problem> problems;
  for (int N : Ns) {
    Problem p = with_steps(base, N);
    problems.push_back(p);
    p.laws.mobility = constant_mobility(1.0);
    problems.push_back(p);
  }
  std::vector<Trajectory> runs = run_all(problems);

  std::vector<double> final_tanh;
  for (std::size_t k = 0; k < Ns.size(); ++k) {
    const int N = Ns[k];
    const int stride = N / samples;
    for (int which = 0; which < 2; ++which) {
      const Problem& p = problems[2 * k + which];
      const Trajectory& tr = runs[2 * k + which];
      const double floor = p.cfg.mobility_floor();
      double supK = 0.0;
      for (int n = 0; n <= N; ++n) {
        const auto& mu = tr.states[static_cast<std::size_t>(n)].mu;
        ScalarField K(mu.grid);
        for (std::size_t i = 0; i < K.size(); ++i) K[i] = K_tau_eval(p.laws.mobility, floor, mu[i]);
        const double norm =
            std::sqrt(mu.grid.cell_volume() * K.values.squaredNorm() + h1_seminorm_sq(mu.grid, K));
        supK = std::max(supK, norm);
        if (n > 0 && n % stride == 0) {
          DegenerateRow row;
          row.mobility = which == 0 ? "tanh" : "constant";
          row.N = N;
          row.tau = tr.tau;
          row.t = tr.states[static_cast<std::size_t>(n)].t;
          row.radius = spread_radius(mu, center, rep.threshold);
          row.sup_K = supK;
          rep.rows.push_back(row);
        }
      }
    }
    // rows of this N: first `samples` tanh, then `samples` constant
    const std::size_t off = rep.rows.size() - 2 * static_cast<std::size_t>(samples);
    for (int s = 0; s < samples; ++s) {
      const auto& tanh_row = rep.rows[off + static_cast<std::size_t>(s)];
      const auto& ctrl_row = rep.rows[off + static_cast<std::size_t>(samples + s)];
      if (!(ctrl_row.radius > tanh_row.radius)) rep.control_wider = false;
    }
    final_tanh.push_back(rep.rows[off + static_cast<std::size_t>(samples) - 1].radius);
  }
  // Ns increasing means the floor (= tau) decreasing
  for (std::size_t k = 1; k < final_tanh.size(); ++k) {
    const bool finer = Ns[k] > Ns[k - 1];
    if (finer ? final_tanh[k] > final_tanh[k - 1] : final_tanh[k] < final_tanh[k - 1]) rep.floor_monotone = false;
  }
  return rep;
}

}  // namespace vch
