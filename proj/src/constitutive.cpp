#include "vchsim/constitutive.hpp"

#include "vchsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kResolventTol = 1e-13;
constexpr int kMaxIter = 300;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_lambda(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("resolvent: lambda must be positive");
}

bool collapsed(double lo, double hi) {
  return hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                        std::max({1.0, std::abs(lo), std::abs(hi)});
}

double log_beta(const LogGraph& lg, double r) {
  return lg.alpha1 * (std::log(r - lg.a) - std::log(lg.b - r));
}

double log_beta_slope(const LogGraph& lg, double r) {
  return lg.alpha1 * (1.0 / (r - lg.a) + 1.0 / (lg.b - r));
}

// Safeguarded Newton for the increasing function phi on the open bracket (lo, hi).
template <class Phi, class DPhi>
double bracketed_newton(Phi phi, DPhi dphi, double lo, double hi, double start) {
  double r = std::clamp(start, lo, hi);
  if (r <= lo || r >= hi) r = 0.5 * (lo + hi);
  double f = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    f = phi(r);
    if (std::abs(f) <= kResolventTol) return r;
    if (f > 0.0) hi = r; else lo = r;
    if (collapsed(lo, hi)) return r;
    double next = r - f / dphi(r);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == r) return r;
    r = next;
  }
  throw SolverError("resolvent: no convergence", std::abs(f), kMaxIter);
}

double log_resolvent(const LogGraph& lg, double lambda, double y) {
  const double c = lambda * lg.alpha1;
  if (c == 0.0) return std::clamp(y, lg.a, lg.b);
  auto phi = [&](double r) { return r + lambda * log_beta(lg, r) - y; };
  auto dphi = [&](double r) { return 1.0 + lambda * log_beta_slope(lg, r); };
  return bracketed_newton(phi, dphi, lg.a, lg.b, 0.5 * (lg.a + lg.b));
}

double smooth_resolvent(const SmoothGraph& sg, double lambda, double y) {
  auto phi = [&](double r) { return r + lambda * sg.value(r) - y; };
  auto dphi = [&](double r) { return 1.0 + lambda * sg.slope(r); };
  // phi(y) = lambda beta(y): the root lies on the side opposite to its sign.
  double lo = y, hi = y;
  double step = 1.0;
  if (phi(y) > 0.0) {
    for (int k = 0; phi(lo) > 0.0; ++k) {
      if (k > 200) throw SolverError("resolvent: cannot bracket root", phi(lo), k);
      lo -= step;
      step *= 2.0;
    }
  } else {
    for (int k = 0; phi(hi) < 0.0; ++k) {
      if (k > 200) throw SolverError("resolvent: cannot bracket root", phi(hi), k);
      hi += step;
      step *= 2.0;
    }
  }
  if (phi(lo) == 0.0) return lo;
  if (phi(hi) == 0.0) return hi;
  return bracketed_newton(phi, dphi, lo, hi, y);
}

}  // namespace

double resolvent(const MonotoneGraph& graph, double lambda, double y) {
  require_lambda(lambda);
  return std::visit(
      overloaded{
          [&](const ClampIndicator& c) { return std::clamp(y, c.a, c.b); },
          [&](const LogGraph& lg) { return log_resolvent(lg, lambda, y); },
          [&](const SmoothGraph& sg) { return smooth_resolvent(sg, lambda, y); },
      },
      graph);
}

double resolvent_slope(const MonotoneGraph& graph, double lambda, double y) {
  require_lambda(lambda);
  return std::visit(
      overloaded{
          [&](const ClampIndicator& c) { return (y >= c.a && y <= c.b) ? 1.0 : 0.0; },
          [&](const LogGraph& lg) {
            const double r = log_resolvent(lg, lambda, y);
            if (r <= lg.a || r >= lg.b) return 0.0;
            return 1.0 / (1.0 + lambda * log_beta_slope(lg, r));
          },
          [&](const SmoothGraph& sg) {
            const double r = smooth_resolvent(sg, lambda, y);
            return 1.0 / (1.0 + lambda * sg.slope(r));
          },
      },
      graph);
}

double graph_select(const MonotoneGraph& graph, double lambda, double y) {
  return (y - resolvent(graph, lambda, y)) / lambda;
}

double yosida(const MonotoneGraph& graph, double lambda, double r) {
  return graph_select(graph, lambda, r);
}

double yosida_slope(const MonotoneGraph& graph, double lambda, double r) {
  return (1.0 - resolvent_slope(graph, lambda, r)) / lambda;
}

std::pair<double, double> domain_closure(const MonotoneGraph& graph) {
  return std::visit(
      overloaded{
          [](const ClampIndicator& c) { return std::pair{c.a, c.b}; },
          [](const LogGraph& lg) { return std::pair{lg.a, lg.b}; },
          [](const SmoothGraph&) { return std::pair{-kInf, kInf}; },
      },
      graph);
}

bool in_domain(const MonotoneGraph& graph, double r) {
  return std::visit(
      overloaded{
          [&](const ClampIndicator& c) { return r >= c.a && r <= c.b; },
          [&](const LogGraph& lg) { return r > lg.a && r < lg.b; },
          [&](const SmoothGraph&) { return std::isfinite(r); },
      },
      graph);
}

std::string graph_name(const MonotoneGraph& graph) {
  return std::visit(overloaded{
                        [](const ClampIndicator&) { return std::string("clamp"); },
                        [](const LogGraph&) { return std::string("log"); },
                        [](const SmoothGraph&) { return std::string("smooth"); },
                    },
                    graph);
}

// ---------------------------------------------------------------------------

namespace {

Potential with_quadratic_part(Potential p, double alpha2) {
  p.f2 = [alpha2](double r) { return alpha2 * r * (1.0 - r); };
  p.pi = [alpha2](double r) { return alpha2 * (1.0 - 2.0 * r); };
  p.pi_slope = [alpha2](double) { return -2.0 * alpha2; };
  p.pi_lipschitz = 2.0 * std::abs(alpha2);
  p.semiconcavity = std::max(0.0, 2.0 * alpha2);
  return p;
}

}  // namespace

Potential clamp_potential(double alpha2) {
  Potential p;
  p.graph = ClampIndicator{0.0, 1.0};
  p.f1 = [](double r) { return (r >= 0.0 && r <= 1.0) ? 0.0 : kInf; };
  return with_quadratic_part(std::move(p), alpha2);
}

Potential log_potential(double alpha1, double alpha2) {
  if (!(alpha1 > 0.0)) throw ConfigError("violates (hpbeta): log potential needs alpha1 > 0", "hpbeta");
  Potential p;
  p.graph = LogGraph{alpha1, 0.0, 1.0};
  p.f1 = [alpha1](double r) {
    if (r < 0.0 || r > 1.0) return kInf;
    auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
    // shift by alpha1 ln 2 so the minimum at r = 1/2 is zero
    return std::max(0.0, alpha1 * (xlogx(r) + xlogx(1.0 - r) + std::log(2.0)));
  };
  return with_quadratic_part(std::move(p), alpha2);
}

double f_total(const Potential& potential, double r) {
  const double f1 = potential.f1(r);
  if (std::isinf(f1)) return kInf;
  return f1 + potential.f2(r);
}

double f1_envelope(const Potential& potential, double lambda, double r) {
  const double j = resolvent(potential.graph, lambda, r);
  const double d = r - j;
  return potential.f1(j) + d * d / (2.0 * lambda);
}

// ---------------------------------------------------------------------------

CouplingLaw linear_coupling(double epsilon, double width) {
  if (!(width > 0.0)) throw ConfigError("violates (hpfg): coupling transition width must be positive", "hpfg");
  CouplingLaw c;
  const double w = width;
  c.g = [w](double r) {
    if (r >= 0.0) return r;
    if (r <= -w) return 0.0;
    return r * (r + w) * (r + w) / (w * w);
  };
  c.dg = [w](double r) {
    if (r >= 0.0) return 1.0;
    if (r <= -w) return 0.0;
    return (r + w) * (3.0 * r + w) / (w * w);
  };
  c.d2g = [w](double r) {
    if (r >= 0.0 || r <= -w) return 0.0;
    return (6.0 * r + 4.0 * w) / (w * w);
  };
  c.epsilon = epsilon;
  c.g_lipschitz = 1.0;
  c.dg_lipschitz = 4.0 / w;
  return c;
}

CouplingLaw constant_coupling(double value, double epsilon) {
  CouplingLaw c;
  c.g = [value](double) { return value; };
  c.dg = [](double) { return 0.0; };
  c.d2g = [](double) { return 0.0; };
  c.epsilon = epsilon;
  return c;
}

// ---------------------------------------------------------------------------

double MobilityLaw::kappa(double r) const {
  return std::visit(overloaded{
                        [](const ConstantMobility& c) { return c.kappa0; },
                        [&](const TanhPowerMobility& t) {
                          return r > 0.0 ? std::tanh(std::pow(r, t.m - 1.0)) : 0.0;
                        },
                        [&](const CustomMobility& c) { return c.kappa(r); },
                    },
                    kind);
}

MobilityLaw constant_mobility(double kappa0) {
  if (!(kappa0 > 0.0)) throw ConfigError("violates (hpcost): constant mobility needs kappa0 > 0", "hpcost");
  MobilityLaw m;
  m.kind = ConstantMobility{kappa0};
  m.kappa_star = kappa0;
  m.kappa_sup = kappa0;
  m.r_star = 0.0;
  m.s_star = 0.0;
  return m;
}

MobilityLaw tanh_power_mobility(double m, double r_star) {
  if (!(m > 1.0)) throw ConfigError("violates (hpK): tanh-power mobility needs m > 1", "hpK");
  if (!(r_star > 0.0)) throw ConfigError("violates (hpcost): tanh-power mobility needs r_star > 0", "hpcost");
  MobilityLaw law;
  law.kind = TanhPowerMobility{m};
  law.kappa_sup = 1.0;
  law.r_star = r_star;
  law.kappa_star = std::tanh(std::pow(r_star, m - 1.0));
  law.s_star = K_eval(law, r_star);
  return law;
}

MobilityLaw custom_mobility(std::function<double(double)> kappa, double kappa_star,
                            double kappa_sup, double r_star) {
  MobilityLaw law;
  law.kind = CustomMobility{std::move(kappa)};
  law.kappa_star = kappa_star;
  law.kappa_sup = kappa_sup;
  law.r_star = r_star;
  law.s_star = r_star > 0.0 ? K_eval(law, r_star) : 0.0;
  return law;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b,
                    double fa, double fm, double fb, double whole, double tol,
                    int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double log_cosh(double r) {
  const double x = std::abs(r);
  return x - std::log(2.0) + std::log1p(std::exp(-2.0 * x));
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double result = simpson_step(f, a, b, fa, fm, fb, whole, tol, 50);
  if (!std::isfinite(result)) throw SolverError("adaptive_simpson: non-finite result", result, 0);
  return result;
}

double K_eval(const MobilityLaw& mob, double r) {
  if (r < 0.0) throw std::invalid_argument("K_eval: argument must be nonnegative");
  return std::visit(
      overloaded{
          [&](const ConstantMobility& c) { return c.kappa0 * r; },
          [&](const TanhPowerMobility& t) {
            if (t.m == 2.0) return log_cosh(r);
            return adaptive_simpson([&](double s) { return mob.kappa(s); }, 0.0, r, 1e-12);
          },
          [&](const CustomMobility&) {
            return adaptive_simpson([&](double s) { return mob.kappa(s); }, 0.0, r, 1e-12);
          },
      },
      mob.kind);
}

double K_tau_eval(const MobilityLaw& mob, double tau, double r) {
  const double k = K_eval(mob, std::abs(r));
  return (r < 0.0 ? -k : k) + tau * r;
}

double K_inverse(const MobilityLaw& mob, double s) {
  if (s < 0.0) throw std::invalid_argument("K_inverse: argument must be nonnegative");
  if (s == 0.0) return 0.0;
  if (const auto* c = std::get_if<ConstantMobility>(&mob.kind)) return s / c->kappa0;
  const double tol = 1e-12 * std::max(1.0, s);
  double lo = 0.0, hi = 1.0;
  for (int k = 0; K_eval(mob, hi) < s; ++k) {
    if (k > 200) throw SolverError("K_inverse: cannot bracket", s, k);
    lo = hi;
    hi *= 2.0;
  }
  double r = 0.5 * (lo + hi);
  double f = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    f = K_eval(mob, r) - s;
    if (std::abs(f) <= tol) return r;
    if (f > 0.0) hi = r; else lo = r;
    if (collapsed(lo, hi)) return r;
    const double slope = mob.kappa(r);
    double next = slope > 0.0 ? r - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    r = next;
  }
  throw SolverError("K_inverse: no convergence", std::abs(f), kMaxIter);
}

double K_star_eval(const MobilityLaw& mob, double s) {
  if (s < 0.0) throw std::invalid_argument("K_star_eval: argument must be nonnegative");
  if (mob.r_star <= 0.0 || s >= mob.s_star) return K_inverse(mob, s);
  return mob.r_star * s / mob.s_star;
}

}  // namespace vch
