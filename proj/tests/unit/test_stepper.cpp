#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vchsim/error.hpp"
#include "vchsim/stepper.hpp"

#include <cmath>
#include <random>

using namespace vch;

namespace {

Laws make(Potential p, CouplingLaw c, MobilityLaw m) { return Laws{std::move(p), std::move(c), std::move(m), FaceAverage::Arithmetic}; }

SolverConfig config(double T, int N) {
  SolverConfig cfg;
  cfg.T = T;
  cfg.N = N;
  return cfg;
}

SimState state_of(const ScalarField& mu, const ScalarField& rho) {
  return SimState{0.0, mu, rho, ScalarField(rho.grid), ScalarField(rho.grid)};
}

ScalarField cosine(const Grid& g, double base, double amp) {
  ScalarField u(g);
  for (int i = 0; i < g.n; ++i) u[static_cast<std::size_t>(i)] = base + amp * std::cos(M_PI * g.coord(i) / g.length);
  return u;
}

template <class F>
double bisect(F f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 300 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("delayed mu") {
  Grid g(1, 4, 1.0);
  const double tau = 0.1;
  Trajectory h;
  h.tau = tau;
  for (int k = 0; k <= 3; ++k) h.states.push_back(SimState{k * tau, ScalarField(g, k + 1.0), ScalarField(g), ScalarField(g), ScalarField(g)});
  const ScalarField mu0(g, 1.0);
  CHECK(delayed_mu(h, tau / 2, tau, mu0) == mu0);
  CHECK(delayed_mu(h, tau, tau, mu0) == mu0);
  CHECK(delayed_mu(h, 3 * tau, tau, mu0)[0] == 3.0);
  Trajectory other = h;
  other.states[3].mu = ScalarField(g, -5.0);
  CHECK(delayed_mu(other, 3 * tau, tau, mu0) == delayed_mu(h, 3 * tau, tau, mu0));
  CHECK_THROWS_AS(delayed_mu(h, 10 * tau, tau, mu0), std::out_of_range);
}

TEST_CASE("rho stage: stationary interior state") {
  Grid g(1, 8, 1.0);
  const Laws laws = make(clamp_potential(0.0), constant_coupling(0.0), constant_mobility(1.0));
  const SolverConfig cfg = config(1.0, 10);
  const RhoStage rs = step_rho(state_of(ScalarField(g, 1.0), ScalarField(g, 0.5)), ScalarField(g, 0.0), cfg, laws);
  CHECK(rs.rho.values == ScalarField(g, 0.5).values);
  CHECK(rs.xi.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rho stage: homogeneous log data against scalar bisection") {
  Grid g(2, 4, 1.0);
  const Laws laws = make(log_potential(0.5, 2.0), linear_coupling(), constant_mobility(1.0));
  SolverConfig cfg = config(0.1, 10);
  cfg.yosida_lambda = 0.01;
  const double rho0 = 0.3, mu = 1.5;
  const RhoStage rs = step_rho(state_of(ScalarField(g, mu), ScalarField(g, rho0)), ScalarField(g, mu), cfg, laws);
  const double tau = cfg.tau();
  const double oracle = bisect(
      [&](double r) {
        const double beta = yosida(laws.potential.graph, 0.01, r);
        return cfg.delta * (r - rho0) / tau + beta + 2.0 * (1.0 - 2.0 * r) - mu * 1.0;
      },
      0.0, 1.0);
  for (std::size_t i = 0; i < rs.rho.size(); ++i) CHECK(std::abs(rs.rho[i] - oracle) <= 1e-9);
}

TEST_CASE("rho stage: saturation at the upper obstacle") {
  Grid g(1, 10, 1.0);
  const Laws laws = make(clamp_potential(2.0), linear_coupling(), constant_mobility(1.0));
  const SolverConfig cfg = config(0.5, 5);
  ScalarField rho0(g, 0.9);
  const RhoStage rs = step_rho(state_of(ScalarField(g, 50.0), rho0), ScalarField(g, 50.0), cfg, laws);
  CHECK_FALSE(rs.report.projected);
  for (std::size_t i = 0; i < rs.rho.size(); ++i) {
    CHECK(rs.rho[i] == 1.0);
    CHECK(rs.xi[i] >= 0.0);
  }
}

TEST_CASE("rho stage: obstacle selections on a mixed profile") {
  Grid g(1, 32, 1.0);
  const Laws laws = make(clamp_potential(2.0), linear_coupling(), constant_mobility(1.0));
  const SolverConfig cfg = config(0.2, 10);
  ScalarField rho0(g), mu(g);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    rho0[static_cast<std::size_t>(i)] = x < 0.3 ? 0.0 : (x > 0.7 ? 1.0 : (x - 0.3) / 0.4);
    mu[static_cast<std::size_t>(i)] = 3.0 * x * x;
  }
  const RhoStage rs = step_rho(state_of(mu, rho0), mu, cfg, laws);
  CHECK_FALSE(rs.report.projected);
  for (std::size_t i = 0; i < rs.rho.size(); ++i) {
    CHECK(rs.rho[i] >= 0.0);
    CHECK(rs.rho[i] <= 1.0);
    if (rs.rho[i] > 0.0 && rs.rho[i] < 1.0) CHECK(rs.xi[i] == 0.0);
    if (rs.rho[i] == 0.0) CHECK(rs.xi[i] <= 0.0);
    if (rs.rho[i] == 1.0) CHECK(rs.xi[i] >= 0.0);
  }
}

TEST_CASE("mu stage: zero stays zero") {
  Grid g(2, 6, 1.0);
  const Laws laws = make(log_potential(0.5, 2.0), linear_coupling(), tanh_power_mobility(2.0));
  const SolverConfig cfg = config(1.0, 20);
  const SimState prev = state_of(ScalarField(g, 0.0), ScalarField(g, 0.4));
  const MuStage ms = step_mu(prev, ScalarField(g, 0.45), ScalarField(g, 1.0), cfg, laws);
  CHECK(ms.mu.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mu stage: eigenvector resolvent") {
  const int n = 32;
  Grid g(1, n, 1.0);
  const double c = 0.25;
  const Laws laws = make(clamp_potential(2.0), constant_coupling(c), constant_mobility(1.0));
  SolverConfig cfg = config(0.5, 10);
  cfg.mobility_floor_tau = 0.0;
  const double tau = cfg.tau();
  const double a = 1.0 + 2.0 * c;
  const double h = g.h();
  const double lam = 2.0 / (h * h) * (1.0 - std::cos(M_PI * h));
  const ScalarField mu_prev = cosine(g, 0.0, 1.0);
  const MuStage ms = step_mu(state_of(mu_prev, ScalarField(g, 0.5)), ScalarField(g, 0.5), ScalarField(g, 0.0), cfg, laws);
  const Eigen::VectorXd expect = mu_prev.values / (1.0 + tau * lam / a);
  CHECK((ms.mu.values - expect).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("mu stage: homogeneous reaction") {
  Grid g(1, 4, 1.0);
  const Laws laws = make(log_potential(0.5, 2.0), linear_coupling(), constant_mobility(1.0));
  const SolverConfig cfg = config(0.1, 10);
  const double tau = cfg.tau();
  const double rho = 0.6, dt = 2.0, mu = 1.3;
  const double a = 1.0 + 2.0 * rho, b = 1.0 * dt;
  const MuStage up = step_mu(state_of(ScalarField(g, mu), ScalarField(g, 0.4)), ScalarField(g, rho), ScalarField(g, dt), cfg, laws);
  CHECK(up.mu[0] == doctest::Approx(mu / (1.0 + tau * b / a)).epsilon(1e-12));
  // b < 0 goes to the explicit side
  const MuStage down = step_mu(state_of(ScalarField(g, mu), ScalarField(g, 0.4)), ScalarField(g, rho), ScalarField(g, -dt), cfg, laws);
  CHECK(down.mu[0] == doctest::Approx(mu * (a / tau + b) / (a / tau)).epsilon(1e-12));
}

TEST_CASE("run: trivial cases and determinism") {
  Grid g(1, 16, 1.0);
  const Laws laws = make(clamp_potential(2.0), linear_coupling(), constant_mobility(1.0));
  SolverConfig zero = config(0.0, 0);
  const Trajectory t0 = run(zero, laws, cosine(g, 1.0, 0.5), ScalarField(g, 0.5));
  CHECK(t0.states.size() == 1);
  CHECK(t0.steps() == 0);

  // equilibrium: constant mu, rho at the critical point of f2, g' mu balanced by nothing
  const Laws eq_laws = make(clamp_potential(2.0), constant_coupling(0.3), constant_mobility(1.0));
  const Trajectory eq = run(config(1.0, 5), eq_laws, ScalarField(g, 2.0), ScalarField(g, 0.5));
  for (const auto& s : eq.states) {
    CHECK(s.mu.values == ScalarField(g, 2.0).values);
    CHECK(s.rho.values == ScalarField(g, 0.5).values);
  }
  CHECK(eq.states.back().t == 1.0);

  const SolverConfig cfg = config(0.5, 12);
  const ScalarField mu0 = cosine(g, 1.0, 0.5), rho0 = cosine(g, 0.5, 0.3);
  const Trajectory a = run(cfg, laws, mu0, rho0);
  const Trajectory b = run(cfg, laws, mu0, rho0);
  for (std::size_t n = 0; n < a.states.size(); ++n) {
    CHECK(a.states[n].mu.values == b.states[n].mu.values);
    CHECK(a.states[n].rho.values == b.states[n].rho.values);
  }
  // N composed advances reproduce run
  Trajectory manual;
  manual.tau = cfg.tau();
  manual.states.push_back(initial_state(cfg, laws, mu0, rho0));
  for (int k = 0; k < cfg.N; ++k) advance(manual.states.back(), cfg, laws, manual);
  for (std::size_t n = 0; n < a.states.size(); ++n) {
    CHECK(manual.states[n].mu.values == a.states[n].mu.values);
    CHECK(manual.states[n].xi.values == a.states[n].xi.values);
    CHECK(manual.states[n].t == a.states[n].t);
  }
}

TEST_CASE("run: eigenvector product formula") {
  Grid g(1, 24, 2.0);
  const double c = 0.5;
  const Laws laws = make(clamp_potential(2.0), constant_coupling(c), constant_mobility(1.0));
  SolverConfig cfg = config(0.4, 8);
  cfg.mobility_floor_tau = 0.0;
  const ScalarField mu0 = cosine(g, 2.0, 1.0);  // constant plus eigenmode, stays positive
  const Trajectory tr = run(cfg, laws, mu0, ScalarField(g, 0.5));
  const double h = g.h(), a = 1.0 + 2.0 * c;
  const double lam = 2.0 / (h * h) * (1.0 - std::cos(M_PI * h / g.length));
  double factor = 1.0;
  for (int n = 1; n <= cfg.N; ++n) {
    factor /= 1.0 + cfg.tau() * lam / a;
    const auto& mu = tr.states[static_cast<std::size_t>(n)].mu;
    for (int i = 0; i < g.n; ++i) {
      const double expect = 2.0 + factor * std::cos(M_PI * g.coord(i) / g.length);
      CHECK(std::abs(mu[static_cast<std::size_t>(i)] - expect) <= 1e-10);
    }
  }
}

TEST_CASE("rolling history equals the growing-interval construction") {
  Grid g(1, 12, 1.0);
  for (const Laws& laws : {make(clamp_potential(2.0), linear_coupling(), tanh_power_mobility(2.0)),
                           make(log_potential(0.5, 2.0), linear_coupling(), constant_mobility(1.0))}) {
    const SolverConfig cfg = config(0.4, 8);
    const ScalarField mu0 = cosine(g, 1.0, 0.8), rho0 = cosine(g, 0.5, 0.35);
    const Trajectory roll = run(cfg, laws, mu0, rho0);
    const Trajectory lit = run_growing_intervals(cfg, laws, mu0, rho0);
    REQUIRE(roll.states.size() == lit.states.size());
    for (std::size_t n = 0; n < roll.states.size(); ++n) {
      CHECK(roll.states[n].mu.values == lit.states[n].mu.values);
      CHECK(roll.states[n].rho.values == lit.states[n].rho.values);
      CHECK(roll.states[n].xi.values == lit.states[n].xi.values);
      CHECK(roll.states[n].t == lit.states[n].t);
    }
  }
}

TEST_CASE("validation names the hypothesis") {
  Grid g(1, 8, 1.0);
  const Laws laws = make(clamp_potential(2.0), linear_coupling(), constant_mobility(1.0));
  auto hyp = [&](auto fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      return e.hypothesis();
    }
    return std::string("none");
  };
  CHECK(hyp([&] { validate_initial_data(laws, ScalarField(g, -0.5), ScalarField(g, 0.5)); }) == "hpzero");
  CHECK(hyp([&] { validate_initial_data(laws, ScalarField(g, 1.0), ScalarField(g, 1.5)); }) == "hpzero");
  const Laws log_laws = make(log_potential(0.5, 2.0), linear_coupling(), constant_mobility(1.0));
  CHECK(hyp([&] { validate_initial_data(log_laws, ScalarField(g, 1.0), ScalarField(g, 1.0)); }) == "hprhozbis");
  CHECK(hyp([&] { validate(config(1.0, 10), make(clamp_potential(2.0), linear_coupling(), constant_mobility(-1.0))); }) == "hpcost");
  CHECK(hyp([&] { validate(config(1.0, 10), make(clamp_potential(2.0), constant_coupling(-0.2), constant_mobility(1.0))); }) == "hpfg");
  SolverConfig bad = config(1.0, 10);
  bad.delta = 0.0;
  CHECK(hyp([&] { validate(bad, laws); }) == "hpstruct");
  CHECK(hyp([&] { validate(config(10.0, 2), make(clamp_potential(2.0), linear_coupling(), constant_mobility(1.0))); }) ==
        "tau-le-kappa-sup");
  CHECK(hyp([&] { validate(config(1.0, 0), laws); }) == "time-grid");
  try {
    validate_initial_data(laws, ScalarField(g, -0.5), ScalarField(g, 0.5));
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("violates (hpzero): mu0 has negative values") != std::string::npos);
  }
}

TEST_CASE("positivity and constraint on seeded random configs") {
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    const int dim = 1 + trial % 2;
    const int n = dim == 1 ? 8 + static_cast<int>(U(rng) * 40) : 6 + static_cast<int>(U(rng) * 6);
    Grid g(dim, n, 0.5 + U(rng));
    const bool clamp = trial % 3 != 0;
    const Laws laws = make(clamp ? clamp_potential(U(rng) * 3) : log_potential(0.5, U(rng) * 3), linear_coupling(),
                           trial % 2 ? tanh_power_mobility(2.0) : constant_mobility(0.5 + U(rng)));
    const SolverConfig cfg = config(0.2 + U(rng), 5 + static_cast<int>(U(rng) * 30));
    ScalarField mu0(g), rho0(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      mu0[i] = U(rng) < 0.3 ? 0.0 : 3.0 * U(rng);
      rho0[i] = clamp ? (U(rng) < 0.2 ? std::round(U(rng)) : U(rng)) : 0.05 + 0.9 * U(rng);
    }
    const Trajectory tr = run(cfg, laws, mu0, rho0);
    for (const auto& s : tr.states) {
      CHECK(s.mu.min() >= -10.0 * cfg.linear_tol);
      if (clamp) {
        CHECK(s.rho.min() >= 0.0);
        CHECK(s.rho.max() <= 1.0);
      }
    }
  }
}
