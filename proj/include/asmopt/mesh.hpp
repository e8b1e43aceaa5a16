#pragma once

#include <array>
#include <functional>
#include <vector>

#include "asmopt/types.hpp"

namespace asmopt {

/// Which level of the hierarchy a nodal vector lives on.
enum class Level { coarse, fine };

/// One structured mesh level on (0,1) or (0,1)^2.
///
/// In 2D each grid cell is split into two right triangles along the
/// (i,j)-(i+1,j+1) diagonal, so refinements of the same grid nest exactly.
/// Node ids are lexicographic, x fastest. Functions carry one coefficient per
/// interior node; boundary values are implicitly zero (homogeneous Dirichlet).
struct Grid {
  int dim = 1;
  int cells = 0; // per axis
  double h = 0.0;

  std::vector<std::array<double, 2>> coords;  // per node, y = 0 in 1D
  std::vector<std::array<int, 2>> segments;   // 1D elements
  std::vector<std::array<int, 3>> triangles;  // 2D elements
  std::vector<bool> is_boundary;              // per node
  std::vector<int> interior_index;            // node -> dof or -1
  std::vector<int> interior_nodes;            // dof -> node

  int nodes_per_axis() const { return cells + 1; }
  int num_nodes() const { return static_cast<int>(coords.size()); }
  int num_interior() const { return static_cast<int>(interior_nodes.size()); }
  int num_elements() const {
    return dim == 1 ? static_cast<int>(segments.size())
                    : static_cast<int>(triangles.size());
  }

  int node_id(int i, int j = 0) const {
    return dim == 1 ? i : j * nodes_per_axis() + i;
  }
  std::array<int, 2> node_ij(int node) const {
    if (dim == 1) return {node, 0};
    const int n = nodes_per_axis();
    return {node % n, node / n};
  }
};

/// Nested coarse/fine pair of structured meshes. H = 1/m, h = 1/(m*r).
struct MeshHierarchy {
  int dim = 1;
  int coarse_cells = 0; // m
  int refinement = 0;   // r
  Grid coarse;
  Grid fine;

  double H() const { return coarse.h; }
  double h() const { return fine.h; }
  const Grid& grid(Level level) const {
    return level == Level::fine ? fine : coarse;
  }
};

/// Coefficients over the interior nodes of one level; boundary values are 0.
struct FemFunction {
  Level level = Level::fine;
  Vec coeffs;
};

Grid build_uniform_grid(int dim, int cells_per_axis);

/// d in {1,2}, m >= 2, r >= 2; throws std::invalid_argument otherwise.
MeshHierarchy build_mesh_hierarchy(int dim, int coarse_cells, int refinement);

/// Nodal interpolation onto `target`: samples the callable at the target's
/// interior nodes. The callable receives (x, y); y is 0 in 1D.
FemFunction nodal_interpolate(const MeshHierarchy& mesh, Level target,
                              const std::function<double(double, double)>& f);

/// Nodal interpolation of a hierarchy function. Coarse -> fine evaluates the
/// coarse piecewise linear at fine nodes (exact on the nested meshes);
/// fine -> coarse samples fine values at coarse node positions; same level
/// copies.
FemFunction nodal_interpolate(const MeshHierarchy& mesh, Level target,
                              const FemFunction& u);

Vec embed_full(const Grid& grid, const Vec& interior);
Vec restrict_interior(const Grid& grid, const Vec& full);

/// Integral of |grad u|^s over the grid for full nodal values. Exact for
/// piecewise linears: the gradient is constant per element, accumulated as
/// (|grad|^2)^(s/2) * measure in element order.
double gradient_power_integral(const Grid& grid, const Vec& full_values,
                               double s);

/// Integral of |u|^s by per-element Gauss quadrature of degree ceil(s)+1.
double value_power_integral(const Grid& grid, const Vec& full_values, double s,
                            int quadrature_degree = -1);

/// Integral of |grad u|^s for an interior-coefficient function (s >= 1).
double energy_sobolev_seminorm(const MeshHierarchy& mesh, const FemFunction& u,
                               double s);

/// (Integral |u|^s + integral |grad u|^s)^(1/s).
double w1s_norm(const MeshHierarchy& mesh, const FemFunction& u, double s);

/// Dirichlet stiffness matrix over interior dofs.
SpMat assemble_stiffness(const Grid& grid);

/// Mass matrix over interior dofs.
SpMat assemble_mass(const Grid& grid);

/// Integral of each interior hat function (row sums of the full mass matrix).
Vec lumped_masses(const Grid& grid);

/// P1 interpolation from coarse interior dofs to fine interior dofs.
SpMat prolongation_matrix(const MeshHierarchy& mesh);

/// Gauss-Legendre rule on [0,1], exact for polynomials of degree 2n-1.
struct Quadrature1D {
  std::vector<double> points;
  std::vector<double> weights;
};
Quadrature1D gauss_legendre_01(int npoints);

/// Precomputed P1 element data: vertex nodes, constant basis gradients
/// (second row zero in 1D) and the element measure.
struct P1Element {
  std::array<int, 3> nodes{};
  int nv = 0;
  Eigen::Matrix<double, 2, 3> grads = Eigen::Matrix<double, 2, 3>::Zero();
  double measure = 0.0;
};
std::vector<P1Element> p1_elements(const Grid& grid);

} // namespace asmopt
