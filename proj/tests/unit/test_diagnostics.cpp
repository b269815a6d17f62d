#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vchsim/diagnostics.hpp"

#include <Eigen/LU>

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

ScalarField profile(const Grid& g, double base, double amp, double freq = 1.0) {
  ScalarField u(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const int i = static_cast<int>(k % static_cast<std::size_t>(g.n));
    const int j = static_cast<int>(k / static_cast<std::size_t>(g.n));
    double v = std::cos(freq * M_PI * g.coord(i) / g.length);
    if (g.dim == 2) v *= std::cos(M_PI * g.coord(j) / g.length);
    u[k] = base + amp * v;
  }
  return u;
}

}  // namespace

TEST_CASE("constant trajectory has a flat ledger") {
  Grid g(1, 10, 1.0);
  const Laws laws = make(clamp_potential(2.0), constant_coupling(0.2), constant_mobility(1.0));
  const SolverConfig cfg = config(1.0, 6);
  const Trajectory tr = run(cfg, laws, ScalarField(g, 1.5), ScalarField(g, 0.5));
  const auto mu = mu_energy_ledger(tr, cfg, laws);
  REQUIRE(mu.size() == 7);
  for (const auto& r : mu) {
    CHECK(r.E_mu == mu.front().E_mu);
    CHECK(r.diss == 0.0);
    CHECK(r.residual == 0.0);
  }
  const auto rho = rho_energy_ledger(tr, cfg, laws);
  for (const auto& r : rho) {
    CHECK(r.visc == 0.0);
    CHECK(r.work == 0.0);
    CHECK(r.F_rho == rho.front().F_rho);
  }
  for (const auto& r : formulation_residuals(tr, cfg, laws)) {
    CHECK(r.native_mu <= 1e-14);
    CHECK(r.native_rho == 0.0);
    CHECK(r.strong_mu == 0.0);
    CHECK(r.weak_mu == 0.0);
  }
  const auto b = boundedness_report(tr, tr.mu0());
  CHECK(b.sup_mu == 1.5);
  CHECK(b.sup_mu0 == 1.5);
}

TEST_CASE("heat case satisfies the implicit Euler energy identity") {
  for (int dim : {1, 2}) {
    Grid g(dim, dim == 1 ? 48 : 12, 1.0);
    const Laws laws = make(clamp_potential(2.0), constant_coupling(0.0), constant_mobility(1.0));
    const SolverConfig cfg = config(0.3, 30);
    const Trajectory tr = run(cfg, laws, profile(g, 0.5, 0.5), profile(g, 0.5, 0.3));
    const auto mu = mu_energy_ledger(tr, cfg, laws);
    const double E0 = mu.front().E_mu;
    double run_diss = 0.0, run_num = 0.0;
    for (std::size_t n = 1; n < mu.size(); ++n) {
      run_diss += mu[n].diss;
      run_num += mu[n].num_diss;
      CHECK(mu[n].diss_cum == run_diss);
      CHECK(mu[n].num_diss_cum == run_num);
      CHECK(mu[n].cross == 0.0);
      CHECK(std::abs(mu[n].E_mu + mu[n].diss_cum + mu[n].num_diss_cum - E0) <= 1e-9 * E0);
      CHECK(mu[n].residual <= 1e-9 * E0);
      CHECK(mu[n].E_mu <= mu[n - 1].E_mu);
    }
    const auto b = boundedness_report(tr, tr.mu0());
    CHECK(b.sup_mu <= 1.0 + 1e-10);
  }
}

TEST_CASE("mu dissipation when the reaction term vanishes") {
  Grid g(1, 40, 1.0);
  const Laws laws = make(log_potential(0.5, 2.0), constant_coupling(0.35), tanh_power_mobility(2.0));
  const SolverConfig cfg = config(0.5, 40);
  const Trajectory tr = run(cfg, laws, profile(g, 0.6, 0.4, 2.0), profile(g, 0.5, 0.3));
  const auto mu = mu_energy_ledger(tr, cfg, laws);
  const double E0 = mu.front().E_mu;
  for (std::size_t n = 1; n < mu.size(); ++n) {
    CHECK(mu[n].diss >= 0.0);
    CHECK(mu[n].E_mu + mu[n].diss_cum <= E0 + 1e-9 * E0);
  }
  CHECK(boundedness_report(tr, tr.mu0()).sup_mu <= 1.0 + 1e-10);
}

TEST_CASE("coupled ledger closes up to the solver tolerance") {
  Grid g(1, 32, 1.0);
  const Laws laws = make(log_potential(0.5, 2.0), linear_coupling(), constant_mobility(1.0));
  const SolverConfig cfg = config(0.5, 25);
  const Trajectory tr = run(cfg, laws, profile(g, 1.0, 0.5), profile(g, 0.5, 0.3, 2.0));
  const auto mu = mu_energy_ledger(tr, cfg, laws);
  for (std::size_t n = 1; n < mu.size(); ++n)
    CHECK(std::abs(mu[n].residual + mu[n].num_diss) <= 1e-9 * mu.front().E_mu);
  const DiagnosticReport rep = diagnose(tr, cfg, laws);
  CHECK(rep.violations.empty());
  CHECK(rep.first_increment > 0.0);
}

TEST_CASE("pure gradient flow decreases the free energy") {
  Grid g(1, 32, 1.0);
  for (const Laws& laws : {make(log_potential(0.5, 2.0), linear_coupling(), constant_mobility(1.0)),
                           make(clamp_potential(2.0), linear_coupling(), constant_mobility(1.0))}) {
    const SolverConfig cfg = config(0.2, 20);
    const Trajectory tr = run(cfg, laws, ScalarField(g, 0.0), profile(g, 0.5, 0.4, 3.0));
    const auto rho = rho_energy_ledger(tr, cfg, laws);
    for (std::size_t n = 1; n < rho.size(); ++n) {
      CHECK(rho[n].F_rho <= rho[n - 1].F_rho + 1e-9);
      CHECK(rho[n].work == 0.0);
      CHECK(rho[n].slack >= -1e-7 * (1.0 + std::abs(rho.front().F_rho)));
    }
  }
}

TEST_CASE("saturated obstacle run keeps the indicator at zero") {
  Grid g(1, 16, 1.0);
  const Laws laws = make(clamp_potential(2.0), linear_coupling(), constant_mobility(1.0));
  const SolverConfig cfg = config(0.5, 10);
  const Trajectory tr = run(cfg, laws, ScalarField(g, 30.0), profile(g, 0.8, 0.2));
  for (const auto& s : tr.states) {
    double f1 = 0.0;
    for (std::size_t i = 0; i < s.rho.size(); ++i) f1 += laws.potential.f1(s.rho[i]);
    CHECK(f1 == 0.0);
  }
  CHECK(tr.states.back().rho.min() == 1.0);
  const auto rho = rho_energy_ledger(tr, cfg, laws);
  for (const auto& r : rho) CHECK(r.nodes_outside == 0);
}

TEST_CASE("native residuals sit at solver tolerance") {
  Grid g(2, 10, 1.0);
  const Laws laws = make(clamp_potential(2.0), linear_coupling(), tanh_power_mobility(2.0));
  const SolverConfig cfg = config(0.3, 12);
  const Trajectory tr = run(cfg, laws, profile(g, 1.0, 0.9), profile(g, 0.5, 0.5));
  for (const auto& r : formulation_residuals(tr, cfg, laws)) {
    CHECK(r.native_mu <= 10.0 * (cfg.newton_tol + cfg.linear_tol));
    CHECK(r.native_rho <= 10.0 * (cfg.newton_tol + cfg.linear_tol));
  }
}

TEST_CASE("weak residual is first order in tau") {
  Grid g(1, 32, 1.0);
  const Laws laws = make(log_potential(0.5, 2.0), linear_coupling(), tanh_power_mobility(2.0));
  double prev = 0.0;
  for (int N : {20, 40, 80}) {
    const SolverConfig cfg = config(0.4, N);
    const Trajectory tr = run(cfg, laws, profile(g, 1.0, 0.5), profile(g, 0.5, 0.2));
    const double w = formulation_residuals(tr, cfg, laws).back().weak_mu;
    if (prev > 0.0) {
      const double ratio = prev / w;
      CHECK(ratio > 1.7);
      CHECK(ratio < 2.3);
    }
    prev = w;
  }
}

TEST_CASE("mu system matrix is an M-matrix") {
  Grid g(1, 16, 1.0);
  const Laws laws = make(clamp_potential(2.0), linear_coupling(), tanh_power_mobility(2.0));
  const SolverConfig cfg = config(0.5, 10);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ScalarField mu(g), rho(g), dt(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    mu[i] = 2 * U(rng);
    rho[i] = U(rng);
    dt[i] = 4 * U(rng) - 2;
  }
  const SimState prev{0.0, mu, rho, ScalarField(g), ScalarField(g)};
  const Eigen::MatrixXd A = Eigen::MatrixXd(mu_system_matrix(prev, rho, dt, cfg, laws));
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (i != j) {
        CHECK(A(i, j) <= 0.0);
        off += -A(i, j);
      }
    CHECK(A(i, i) > off);
  }
  CHECK(Eigen::MatrixXd(A.inverse()).minCoeff() >= 0.0);
}

TEST_CASE("contraction metric") {
  Grid g(1, 24, 1.0);
  const Laws laws = make(clamp_potential(2.0), linear_coupling(), constant_mobility(1.0));
  const SolverConfig cfg = config(0.3, 15);
  const ScalarField mu0 = profile(g, 1.0, 0.4), rho0 = profile(g, 0.5, 0.3);
  const Trajectory a = run(cfg, laws, mu0, rho0);
  const ContractionSeries same = contraction_metric(a, a, laws);
  for (double v : same.total()) CHECK(v == 0.0);
  CHECK(same.backed);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ScalarField noise(g);
  for (std::size_t i = 0; i < g.size(); ++i) noise[i] = U(rng);
  auto perturbed = [&](double amp) {
    ScalarField m = mu0;
    m.values += amp * noise.values;
    return run(cfg, laws, m, rho0);
  };
  const ContractionSeries big = contraction_metric(a, perturbed(1e-6), laws);
  const ContractionSeries small = contraction_metric(a, perturbed(5e-7), laws);
  const double r0 = big.z_gap.front() / small.z_gap.front();
  CHECK(r0 == doctest::Approx(4.0).epsilon(0.1));
  CHECK(std::isfinite(big.growth_rate));

  const ContractionSeries ba = contraction_metric(perturbed(1e-6), a, laws);
  CHECK(ba.z_gap == big.z_gap);
  CHECK(ba.rho_gap == big.rho_gap);

  // g = 0 reduces z to mu
  const Laws flat = make(clamp_potential(2.0), constant_coupling(0.0), constant_mobility(1.0));
  const Trajectory fa = run(cfg, flat, mu0, rho0);
  ScalarField m1 = mu0;
  m1.values.array() += 0.01;
  const Trajectory fb = run(cfg, flat, m1, rho0);
  const ContractionSeries fc = contraction_metric(fa, fb, flat);
  for (std::size_t n = 0; n < fa.states.size(); ++n)
    CHECK(fc.z_gap[n] == doctest::Approx(g.cell_volume() * (fa.states[n].mu.values - fb.states[n].mu.values).squaredNorm()).epsilon(1e-14));

  CHECK_FALSE(contraction_metric(a, a, make(clamp_potential(2.0), linear_coupling(), tanh_power_mobility(2.0))).backed);
  const Trajectory shorter = run(config(0.3, 5), laws, mu0, rho0);
  CHECK_THROWS_AS(contraction_metric(a, shorter, laws), std::invalid_argument);
}
