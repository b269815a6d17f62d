#pragma once

#include "vchsim/mesh.hpp"

#include <functional>
#include <string>
#include <utility>
#include <variant>

namespace vch {

// ---------------------------------------------------------------------------
// Monotone graphs beta = subdifferential of the convex potential part f1.
// ---------------------------------------------------------------------------

/// beta = subdifferential of the indicator of [a, b].
struct ClampIndicator {
  double a = 0.0;
  double b = 1.0;
};

/// beta(r) = alpha1 ln((r - a)/(b - r)) on (a, b).
struct LogGraph {
  double alpha1 = 0.5;
  double a = 0.0;
  double b = 1.0;
};

/// Single-valued, nondecreasing beta defined on all of R.
struct SmoothGraph {
  std::function<double(double)> value;
  std::function<double(double)> slope;
};

using MonotoneGraph = std::variant<ClampIndicator, LogGraph, SmoothGraph>;

/// Unique r with r + lambda beta(r) containing y.
double resolvent(const MonotoneGraph& graph, double lambda, double y);
/// Derivative of the resolvent with respect to y (a.e.; clamp uses the closed interval).
double resolvent_slope(const MonotoneGraph& graph, double lambda, double y);
/// xi = (y - J(y))/lambda, a selection of beta at J(y).
double graph_select(const MonotoneGraph& graph, double lambda, double y);
/// Yosida approximation beta_lambda(r).
double yosida(const MonotoneGraph& graph, double lambda, double r);
double yosida_slope(const MonotoneGraph& graph, double lambda, double r);

/// Closure of the effective domain of beta (infinite bounds for smooth graphs).
std::pair<double, double> domain_closure(const MonotoneGraph& graph);
/// True if beta(r) is nonempty.
bool in_domain(const MonotoneGraph& graph, double r);
std::string graph_name(const MonotoneGraph& graph);

// ---------------------------------------------------------------------------

/// f = f1 + f2 with beta = f1' and pi = f2'.
struct Potential {
  MonotoneGraph graph;
  std::function<double(double)> f1;  // +infinity outside D(f1)
  std::function<double(double)> f2;
  std::function<double(double)> pi;
  std::function<double(double)> pi_slope;
  double pi_lipschitz = 0.0;
  /// sup of -f2'', so f2(y) - f2(x) <= pi(y)(y - x) + (semiconcavity/2)(y - x)^2.
  double semiconcavity = 0.0;
};

/// Obstacle potential I_[0,1] plus alpha2 r(1 - r).
Potential clamp_potential(double alpha2);
/// Logarithmic potential alpha1 [r ln r + (1-r) ln(1-r)] + alpha1 ln 2 plus alpha2 r(1 - r).
Potential log_potential(double alpha1, double alpha2);

double f_total(const Potential& potential, double r);
/// Moreau envelope f1(J r) + |r - J r|^2/(2 lambda).
double f1_envelope(const Potential& potential, double lambda, double r);

// ---------------------------------------------------------------------------

/// Coupling g = h - epsilon/2 and its first two derivatives.
struct CouplingLaw {
  std::function<double(double)> g;
  std::function<double(double)> dg;
  std::function<double(double)> d2g;
  double epsilon = 1.0;
  double g_lipschitz = 0.0;
  double dg_lipschitz = 0.0;

  double a(double r) const { return epsilon + 2.0 * g(r); }
};

/// g(r) = r on [0, inf), cubic C^1 transition on [-width, 0), zero below.
CouplingLaw linear_coupling(double epsilon = 1.0, double width = 0.1);
CouplingLaw constant_coupling(double value, double epsilon = 1.0);

// ---------------------------------------------------------------------------
// Mobility kappa(mu) and its primitive K.
// ---------------------------------------------------------------------------

struct ConstantMobility {
  double kappa0 = 1.0;
};
/// kappa(r) = tanh(r^(m-1)), m > 1.
struct TanhPowerMobility {
  double m = 2.0;
};
struct CustomMobility {
  std::function<double(double)> kappa;
};

struct MobilityLaw {
  std::variant<ConstantMobility, TanhPowerMobility, CustomMobility> kind;
  double kappa_star = 1.0;  // lower bound on [r_star, inf)
  double kappa_sup = 1.0;   // global upper bound
  double r_star = 0.0;
  double s_star = 0.0;      // K(r_star)

  double kappa(double r) const;
};

MobilityLaw constant_mobility(double kappa0);
MobilityLaw tanh_power_mobility(double m, double r_star = 1.0);
MobilityLaw custom_mobility(std::function<double(double)> kappa, double kappa_star,
                            double kappa_sup, double r_star);

double K_eval(const MobilityLaw& mob, double r);
/// K_tau(r) = K(|r|) sign(r) + tau r.
double K_tau_eval(const MobilityLaw& mob, double tau, double r);
double K_inverse(const MobilityLaw& mob, double s);
/// Globally Lipschitz increasing map equal to K^{-1} on [s_star, inf).
double K_star_eval(const MobilityLaw& mob, double s);

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol);

// ---------------------------------------------------------------------------

struct Laws {
  Potential potential;
  CouplingLaw coupling;
  MobilityLaw mobility;
  FaceAverage face_average = FaceAverage::Arithmetic;
};

}  // namespace vch
