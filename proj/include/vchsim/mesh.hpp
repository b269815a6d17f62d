#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <string>

namespace vch {

/// Uniform cell-centered grid on [0, length]^dim with homogeneous Neumann
/// closure. Node i sits at (i + 1/2) h, so reflected ghosts give zero flux.
struct Grid {
  int dim = 1;
  int n = 32;
  double length = 1.0;

  Grid() = default;
  Grid(int dim_, int n_, double length_);

  double h() const { return length / n; }
  std::size_t size() const {
    return dim == 1 ? static_cast<std::size_t>(n)
                    : static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  }
  double cell_volume() const { return dim == 1 ? h() : h() * h(); }
  double coord(int i) const { return (i + 0.5) * h(); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(i);
  }

  bool operator==(const Grid&) const = default;
};

/// Node values of a scalar quantity on a Grid.
struct ScalarField {
  Grid grid;
  Eigen::VectorXd values;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0);
  ScalarField(const Grid& g, Eigen::VectorXd v);

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  double& operator[](std::size_t k) { return values[static_cast<Eigen::Index>(k)]; }
  double operator[](std::size_t k) const {
    return values[static_cast<Eigen::Index>(k)];
  }
  double min() const { return values.minCoeff(); }
  double max() const { return values.maxCoeff(); }
  bool all_finite() const { return values.allFinite(); }

  bool operator==(const ScalarField& o) const {
    return grid == o.grid && values.size() == o.values.size() &&
           values == o.values;
  }
};

enum class FaceAverage { Arithmetic, Harmonic };

ScalarField laplace_neumann(const Grid& g, const ScalarField& u);

/// Discrete div(k grad u) in flux form; boundary faces carry no flux.
ScalarField div_k_grad(const Grid& g, const ScalarField& k, const ScalarField& u,
                       FaceAverage avg = FaceAverage::Arithmetic);

double integrate(const Grid& g, const ScalarField& u);

/// Face sum of h^dim ((u_q - u_p)/h)^2 over interior faces.
double h1_seminorm_sq(const Grid& g, const ScalarField& u);

/// Face sum of h^dim k_face ((u_q - u_p)/h)^2.
double weighted_h1_seminorm_sq(const Grid& g, const ScalarField& k,
                               const ScalarField& u,
                               FaceAverage avg = FaceAverage::Arithmetic);

double face_coefficient(double kp, double kq, FaceAverage avg);

/// Calls visit(p, q) once for every interior face, p < q.
template <class F>
void for_each_face(const Grid& g, F&& visit) {
  if (g.dim == 1) {
    for (int i = 0; i + 1 < g.n; ++i) visit(std::size_t(i), std::size_t(i + 1));
    return;
  }
  for (int j = 0; j < g.n; ++j) {
    for (int i = 0; i < g.n; ++i) {
      if (i + 1 < g.n) visit(g.index(i, j), g.index(i + 1, j));
      if (j + 1 < g.n) visit(g.index(i, j), g.index(i, j + 1));
    }
  }
}

// Snapshot text format: "dim n length t" then one value per line, %.17g.
void write_snapshot(std::ostream& os, const ScalarField& u, double t);
ScalarField read_snapshot(std::istream& is, double* t = nullptr);

}  // namespace vch
