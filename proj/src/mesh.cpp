#include "vchsim/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace vch {

namespace {

void require_on(const Grid& g, const ScalarField& u, const char* what) {
  if (u.size() != g.size() || !(u.grid == g)) {
    throw std::invalid_argument(std::string(what) +
                                ": field does not match grid (" +
                                std::to_string(u.size()) + " values, grid has " +
                                std::to_string(g.size()) + ")");
  }
}

}  // namespace

Grid::Grid(int dim_, int n_, double length_) : dim(dim_), n(n_), length(length_) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("grid dim must be 1 or 2");
  if (n < 2) throw std::invalid_argument("grid needs at least 2 nodes per axis");
  if (!(length > 0.0) || !std::isfinite(length))
    throw std::invalid_argument("grid length must be positive");
}

ScalarField::ScalarField(const Grid& g, double fill)
    : grid(g), values(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.size()), fill)) {}

ScalarField::ScalarField(const Grid& g, Eigen::VectorXd v) : grid(g), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != g.size())
    throw std::invalid_argument("field values do not match grid size");
}

double face_coefficient(double kp, double kq, FaceAverage avg) {
  if (avg == FaceAverage::Arithmetic) return 0.5 * (kp + kq);
  const double s = kp + kq;
  return s > 0.0 ? 2.0 * kp * kq / s : 0.0;
}

ScalarField laplace_neumann(const Grid& g, const ScalarField& u) {
  require_on(g, u, "laplace_neumann");
  ScalarField out(g, 0.0);
  const double inv_h2 = 1.0 / (g.h() * g.h());
  for_each_face(g, [&](std::size_t p, std::size_t q) {
    const double d = (u[q] - u[p]) * inv_h2;
    out[p] += d;
    out[q] -= d;
  });
  return out;
}

ScalarField div_k_grad(const Grid& g, const ScalarField& k, const ScalarField& u,
                       FaceAverage avg) {
  require_on(g, u, "div_k_grad");
  require_on(g, k, "div_k_grad");
  if (k.min() < 0.0) throw std::invalid_argument("div_k_grad: negative coefficient");
  ScalarField out(g, 0.0);
  const double inv_h2 = 1.0 / (g.h() * g.h());
  for_each_face(g, [&](std::size_t p, std::size_t q) {
    const double d = face_coefficient(k[p], k[q], avg) * (u[q] - u[p]) * inv_h2;
    out[p] += d;
    out[q] -= d;
  });
  return out;
}

double integrate(const Grid& g, const ScalarField& u) {
  require_on(g, u, "integrate");
  return g.cell_volume() * u.values.sum();
}

double h1_seminorm_sq(const Grid& g, const ScalarField& u) {
  require_on(g, u, "h1_seminorm_sq");
  double acc = 0.0;
  const double inv_h = 1.0 / g.h();
  for_each_face(g, [&](std::size_t p, std::size_t q) {
    const double d = (u[q] - u[p]) * inv_h;
    acc += d * d;
  });
  return g.cell_volume() * acc;
}

double weighted_h1_seminorm_sq(const Grid& g, const ScalarField& k,
                               const ScalarField& u, FaceAverage avg) {
  require_on(g, u, "weighted_h1_seminorm_sq");
  require_on(g, k, "weighted_h1_seminorm_sq");
  double acc = 0.0;
  const double inv_h = 1.0 / g.h();
  for_each_face(g, [&](std::size_t p, std::size_t q) {
    const double d = (u[q] - u[p]) * inv_h;
    acc += face_coefficient(k[p], k[q], avg) * d * d;
  });
  return g.cell_volume() * acc;
}

void write_snapshot(std::ostream& os, const ScalarField& u, double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", u.grid.length);
  std::string len = buf;
  std::snprintf(buf, sizeof buf, "%.17g", t);
  os << u.grid.dim << ' ' << u.grid.n << ' ' << len << ' ' << buf << '\n';
  for (Eigen::Index k = 0; k < u.values.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", u.values[k]);
    os << buf << '\n';
  }
  if (!os) throw std::runtime_error("write_snapshot: stream failure");
}

ScalarField read_snapshot(std::istream& is, double* t) {
  int dim = 0, n = 0;
  double length = 0.0, time = 0.0;
  if (!(is >> dim >> n >> length >> time))
    throw std::runtime_error("read_snapshot: malformed header");
  Grid g(dim, n, length);
  ScalarField u(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("read_snapshot: truncated values");
    // strtod round-trips %.17g output and accepts inf/nan spellings
    u[k] = std::strtod(tok.c_str(), nullptr);
  }
  if (t) *t = time;
  return u;
}

}  // namespace vch
