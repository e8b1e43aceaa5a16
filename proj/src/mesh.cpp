#include "asmopt/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace asmopt {

namespace {

void check_exponent(double s) {
  if (!(s >= 1.0))
    throw std::invalid_argument("Sobolev exponent must satisfy s >= 1");
}

// Element gradient of a P1 function on a triangle, from vertex coordinates
// and values.
Eigen::Vector2d triangle_gradient(const std::array<double, 2>& p0,
                                  const std::array<double, 2>& p1,
                                  const std::array<double, 2>& p2, double u0,
                                  double u1, double u2) {
  Eigen::Matrix2d J;
  J << p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1];
  Eigen::Vector2d rhs(u1 - u0, u2 - u0);
  return J.transpose().inverse() * rhs;
}

double triangle_area(const std::array<double, 2>& p0,
                     const std::array<double, 2>& p1,
                     const std::array<double, 2>& p2) {
  const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) -
                     (p2[0] - p0[0]) * (p1[1] - p0[1]);
  return 0.5 * std::abs(det);
}

} // namespace

Grid build_uniform_grid(int dim, int cells_per_axis) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("grid dimension must be 1 or 2");
  if (cells_per_axis < 1)
    throw std::invalid_argument("cells per axis must be positive");

  Grid g;
  g.dim = dim;
  g.cells = cells_per_axis;
  g.h = 1.0 / cells_per_axis;
  const int n = g.nodes_per_axis();

  if (dim == 1) {
    g.coords.resize(n);
    g.is_boundary.assign(n, false);
    for (int i = 0; i < n; ++i) {
      g.coords[i] = {i * g.h, 0.0};
      g.is_boundary[i] = (i == 0 || i == g.cells);
    }
    g.segments.reserve(g.cells);
    for (int i = 0; i < g.cells; ++i) g.segments.push_back({i, i + 1});
  } else {
    g.coords.resize(static_cast<size_t>(n) * n);
    g.is_boundary.assign(static_cast<size_t>(n) * n, false);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int id = g.node_id(i, j);
        g.coords[id] = {i * g.h, j * g.h};
        g.is_boundary[id] =
            (i == 0 || j == 0 || i == g.cells || j == g.cells);
      }
    g.triangles.reserve(2 * g.cells * g.cells);
    for (int j = 0; j < g.cells; ++j)
      for (int i = 0; i < g.cells; ++i) {
        const int v00 = g.node_id(i, j);
        const int v10 = g.node_id(i + 1, j);
        const int v01 = g.node_id(i, j + 1);
        const int v11 = g.node_id(i + 1, j + 1);
        g.triangles.push_back({v00, v10, v11});
        g.triangles.push_back({v00, v11, v01});
      }
  }

  g.interior_index.assign(g.num_nodes(), -1);
  for (int id = 0; id < g.num_nodes(); ++id) {
    if (!g.is_boundary[id]) {
      g.interior_index[id] = static_cast<int>(g.interior_nodes.size());
      g.interior_nodes.push_back(id);
    }
  }
  return g;
}

MeshHierarchy build_mesh_hierarchy(int dim, int coarse_cells, int refinement) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("mesh dimension must be 1 or 2");
  if (coarse_cells < 2)
    throw std::invalid_argument("coarse resolution must be >= 2");
  if (refinement < 2)
    throw std::invalid_argument("refinement must be >= 2");

  MeshHierarchy mesh;
  mesh.dim = dim;
  mesh.coarse_cells = coarse_cells;
  mesh.refinement = refinement;
  mesh.coarse = build_uniform_grid(dim, coarse_cells);
  mesh.fine = build_uniform_grid(dim, coarse_cells * refinement);
  return mesh;
}

FemFunction nodal_interpolate(const MeshHierarchy& mesh, Level target,
                              const std::function<double(double, double)>& f) {
  const Grid& g = mesh.grid(target);
  FemFunction out{target, Vec(g.num_interior())};
  for (int d = 0; d < g.num_interior(); ++d) {
    const auto& p = g.coords[g.interior_nodes[d]];
    out.coeffs[d] = f(p[0], p[1]);
  }
  return out;
}

namespace {

// Evaluate a coarse P1 function (full coarse nodal values) at a fine node of
// the nested refinement.
double eval_coarse_at_fine(const MeshHierarchy& mesh, const Vec& coarse_full,
                           int fi, int fj) {
  const int r = mesh.refinement;
  const Grid& cg = mesh.coarse;
  int ci = fi / r, cj = fj / r;
  if (ci >= cg.cells) ci = cg.cells - 1;
  if (cj >= cg.cells) cj = cg.cells - 1;
  const double xi = static_cast<double>(fi - ci * r) / r;
  const double eta = mesh.dim == 1
                         ? 0.0
                         : static_cast<double>(fj - cj * r) / r;
  if (mesh.dim == 1) {
    const double u0 = coarse_full[ci];
    const double u1 = coarse_full[ci + 1];
    return u0 + xi * (u1 - u0);
  }
  const double u00 = coarse_full[cg.node_id(ci, cj)];
  const double u10 = coarse_full[cg.node_id(ci + 1, cj)];
  const double u01 = coarse_full[cg.node_id(ci, cj + 1)];
  const double u11 = coarse_full[cg.node_id(ci + 1, cj + 1)];
  if (xi >= eta) // lower triangle (v00, v10, v11)
    return u00 * (1.0 - xi) + u10 * (xi - eta) + u11 * eta;
  return u00 * (1.0 - eta) + u11 * xi + u01 * (eta - xi);
}

} // namespace

FemFunction nodal_interpolate(const MeshHierarchy& mesh, Level target,
                              const FemFunction& u) {
  if (u.level == target) return u;

  if (target == Level::fine) {
    // coarse -> fine: evaluate the coarse piecewise linear at fine nodes
    const Vec coarse_full = embed_full(mesh.coarse, u.coeffs);
    const Grid& fg = mesh.fine;
    FemFunction out{Level::fine, Vec(fg.num_interior())};
    for (int d = 0; d < fg.num_interior(); ++d) {
      const auto ij = fg.node_ij(fg.interior_nodes[d]);
      out.coeffs[d] = eval_coarse_at_fine(mesh, coarse_full, ij[0], ij[1]);
    }
    return out;
  }

  // fine -> coarse: sample fine nodal values at coarse node positions
  const Vec fine_full = embed_full(mesh.fine, u.coeffs);
  const Grid& cg = mesh.coarse;
  const Grid& fg = mesh.fine;
  const int r = mesh.refinement;
  FemFunction out{Level::coarse, Vec(cg.num_interior())};
  for (int d = 0; d < cg.num_interior(); ++d) {
    const auto ij = cg.node_ij(cg.interior_nodes[d]);
    out.coeffs[d] = fine_full[fg.node_id(ij[0] * r, ij[1] * r)];
  }
  return out;
}

Vec embed_full(const Grid& grid, const Vec& interior) {
  if (interior.size() != grid.num_interior())
    throw std::invalid_argument("coefficient length does not match level");
  Vec full = Vec::Zero(grid.num_nodes());
  for (int d = 0; d < grid.num_interior(); ++d)
    full[grid.interior_nodes[d]] = interior[d];
  return full;
}

Vec restrict_interior(const Grid& grid, const Vec& full) {
  Vec out(grid.num_interior());
  for (int d = 0; d < grid.num_interior(); ++d)
    out[d] = full[grid.interior_nodes[d]];
  return out;
}

double gradient_power_integral(const Grid& grid, const Vec& full_values,
                               double s) {
  check_exponent(s);
  double total = 0.0;
  if (grid.dim == 1) {
    for (const auto& seg : grid.segments) {
      const double slope =
          (full_values[seg[1]] - full_values[seg[0]]) / grid.h;
      total += std::pow(slope * slope, 0.5 * s) * grid.h;
    }
  } else {
    for (const auto& tri : grid.triangles) {
      const auto& p0 = grid.coords[tri[0]];
      const auto& p1 = grid.coords[tri[1]];
      const auto& p2 = grid.coords[tri[2]];
      const Eigen::Vector2d grad = triangle_gradient(
          p0, p1, p2, full_values[tri[0]], full_values[tri[1]],
          full_values[tri[2]]);
      total += std::pow(grad.squaredNorm(), 0.5 * s) *
               triangle_area(p0, p1, p2);
    }
  }
  return total;
}

double value_power_integral(const Grid& grid, const Vec& full_values, double s,
                            int quadrature_degree) {
  check_exponent(s);
  const int degree = quadrature_degree > 0
                         ? quadrature_degree
                         : static_cast<int>(std::ceil(s)) + 1;
  double total = 0.0;
  if (grid.dim == 1) {
    const Quadrature1D quad = gauss_legendre_01((degree + 2) / 2);
    for (const auto& seg : grid.segments) {
      const double u0 = full_values[seg[0]], u1 = full_values[seg[1]];
      double acc = 0.0;
      for (size_t a = 0; a < quad.points.size(); ++a) {
        const double u = u0 + quad.points[a] * (u1 - u0);
        acc += quad.weights[a] * std::pow(std::abs(u), s);
      }
      total += acc * grid.h;
    }
  } else {
    // collapsed tensor rule on the reference triangle:
    // (xi', eta') = (xi (1-eta), eta), Jacobian factor (1-eta)
    const Quadrature1D quad = gauss_legendre_01((degree + 3) / 2);
    for (const auto& tri : grid.triangles) {
      const double u0 = full_values[tri[0]];
      const double u1 = full_values[tri[1]];
      const double u2 = full_values[tri[2]];
      const double two_area = 2.0 * triangle_area(grid.coords[tri[0]],
                                                  grid.coords[tri[1]],
                                                  grid.coords[tri[2]]);
      double acc = 0.0;
      for (size_t a = 0; a < quad.points.size(); ++a)
        for (size_t b = 0; b < quad.points.size(); ++b) {
          const double eta = quad.points[b];
          const double xi = quad.points[a] * (1.0 - eta);
          const double u = u0 + xi * (u1 - u0) + eta * (u2 - u0);
          acc += quad.weights[a] * quad.weights[b] * (1.0 - eta) *
                 std::pow(std::abs(u), s);
        }
      total += acc * two_area;
    }
  }
  return total;
}

double energy_sobolev_seminorm(const MeshHierarchy& mesh, const FemFunction& u,
                               double s) {
  const Grid& g = mesh.grid(u.level);
  return gradient_power_integral(g, embed_full(g, u.coeffs), s);
}

double w1s_norm(const MeshHierarchy& mesh, const FemFunction& u, double s) {
  const Grid& g = mesh.grid(u.level);
  const Vec full = embed_full(g, u.coeffs);
  const double total =
      value_power_integral(g, full, s) + gradient_power_integral(g, full, s);
  return std::pow(total, 1.0 / s);
}

namespace {

template <typename Element, typename LocalMatrix>
SpMat assemble_interior(const Grid& grid, const std::vector<Element>& elements,
                        const LocalMatrix& local) {
  std::vector<Triplet> triplets;
  triplets.reserve(elements.size() * 9);
  for (const auto& el : elements) {
    const auto k = local(el);
    const int nv = static_cast<int>(el.size());
    for (int a = 0; a < nv; ++a) {
      const int ia = grid.interior_index[el[a]];
      if (ia < 0) continue;
      for (int b = 0; b < nv; ++b) {
        const int ib = grid.interior_index[el[b]];
        if (ib < 0) continue;
        triplets.emplace_back(ia, ib, k(a, b));
      }
    }
  }
  SpMat out(grid.num_interior(), grid.num_interior());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

} // namespace

SpMat assemble_stiffness(const Grid& grid) {
  if (grid.dim == 1) {
    const double w = 1.0 / grid.h;
    return assemble_interior(grid, grid.segments,
                             [&](const std::array<int, 2>&) {
                               Eigen::Matrix2d k;
                               k << w, -w, -w, w;
                               return k;
                             });
  }
  return assemble_interior(
      grid, grid.triangles, [&](const std::array<int, 3>& tri) {
        const auto& p0 = grid.coords[tri[0]];
        const auto& p1 = grid.coords[tri[1]];
        const auto& p2 = grid.coords[tri[2]];
        const double area = triangle_area(p0, p1, p2);
        Eigen::Matrix2d J;
        J << p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1];
        Eigen::Matrix<double, 2, 3> ref;
        ref << -1, 1, 0, -1, 0, 1;
        const Eigen::Matrix<double, 2, 3> grads =
            J.transpose().inverse() * ref;
        Eigen::Matrix3d k = area * grads.transpose() * grads;
        return k;
      });
}

SpMat assemble_mass(const Grid& grid) {
  if (grid.dim == 1) {
    const double w = grid.h / 6.0;
    return assemble_interior(grid, grid.segments,
                             [&](const std::array<int, 2>&) {
                               Eigen::Matrix2d k;
                               k << 2 * w, w, w, 2 * w;
                               return k;
                             });
  }
  return assemble_interior(
      grid, grid.triangles, [&](const std::array<int, 3>& tri) {
        const double area = triangle_area(grid.coords[tri[0]],
                                          grid.coords[tri[1]],
                                          grid.coords[tri[2]]);
        Eigen::Matrix3d k;
        k << 2, 1, 1, 1, 2, 1, 1, 1, 2;
        k *= area / 12.0;
        return k;
      });
}

Vec lumped_masses(const Grid& grid) {
  Vec out = Vec::Zero(grid.num_interior());
  if (grid.dim == 1) {
    for (const auto& seg : grid.segments)
      for (int a = 0; a < 2; ++a) {
        const int ia = grid.interior_index[seg[a]];
        if (ia >= 0) out[ia] += grid.h / 2.0;
      }
  } else {
    for (const auto& tri : grid.triangles) {
      const double area = triangle_area(grid.coords[tri[0]],
                                        grid.coords[tri[1]],
                                        grid.coords[tri[2]]);
      for (int a = 0; a < 3; ++a) {
        const int ia = grid.interior_index[tri[a]];
        if (ia >= 0) out[ia] += area / 3.0;
      }
    }
  }
  return out;
}

SpMat prolongation_matrix(const MeshHierarchy& mesh) {
  const Grid& fg = mesh.fine;
  const Grid& cg = mesh.coarse;
  std::vector<Triplet> triplets;
  for (int cd = 0; cd < cg.num_interior(); ++cd) {
    Vec coarse_full = Vec::Zero(cg.num_nodes());
    coarse_full[cg.interior_nodes[cd]] = 1.0;
    // hat support spans the surrounding coarse cells only
    const auto cij = cg.node_ij(cg.interior_nodes[cd]);
    const int r = mesh.refinement;
    const int lo_i = std::max(0, (cij[0] - 1) * r);
    const int hi_i = std::min(fg.cells, (cij[0] + 1) * r);
    const int lo_j = mesh.dim == 1 ? 0 : std::max(0, (cij[1] - 1) * r);
    const int hi_j = mesh.dim == 1 ? 0 : std::min(fg.cells, (cij[1] + 1) * r);
    for (int fj = lo_j; fj <= hi_j; ++fj)
      for (int fi = lo_i; fi <= hi_i; ++fi) {
        const int fd = fg.interior_index[fg.node_id(fi, fj)];
        if (fd < 0) continue;
        const double v = eval_coarse_at_fine(mesh, coarse_full, fi, fj);
        if (v != 0.0) triplets.emplace_back(fd, cd, v);
      }
  }
  SpMat P(fg.num_interior(), cg.num_interior());
  P.setFromTriplets(triplets.begin(), triplets.end());
  return P;
}

std::vector<P1Element> p1_elements(const Grid& g) {
  std::vector<P1Element> out;
  if (g.dim == 1) {
    out.reserve(g.segments.size());
    for (const auto& seg : g.segments) {
      P1Element e;
      e.nodes = {seg[0], seg[1], -1};
      e.nv = 2;
      e.grads(0, 0) = -1.0 / g.h;
      e.grads(0, 1) = 1.0 / g.h;
      e.measure = g.h;
      out.push_back(e);
    }
  } else {
    out.reserve(g.triangles.size());
    for (const auto& tri : g.triangles) {
      P1Element e;
      e.nodes = tri;
      e.nv = 3;
      const auto& p0 = g.coords[tri[0]];
      const auto& p1 = g.coords[tri[1]];
      const auto& p2 = g.coords[tri[2]];
      Eigen::Matrix2d J;
      J << p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1];
      Eigen::Matrix<double, 2, 3> ref;
      ref << -1, 1, 0, -1, 0, 1;
      e.grads = J.transpose().inverse() * ref;
      e.measure = 0.5 * std::abs(J.determinant());
      out.push_back(e);
    }
  }
  return out;
}

Quadrature1D gauss_legendre_01(int npoints) {
  if (npoints < 1) throw std::invalid_argument("quadrature needs >= 1 point");
  // Golub-Welsch on the Legendre Jacobi matrix, then map [-1,1] -> [0,1].
  Mat J = Mat::Zero(npoints, npoints);
  for (int k = 1; k < npoints; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  Quadrature1D q;
  q.points.resize(npoints);
  q.weights.resize(npoints);
  for (int i = 0; i < npoints; ++i) {
    q.points[i] = 0.5 * (es.eigenvalues()[i] + 1.0);
    const double v0 = es.eigenvectors()(0, i);
    q.weights[i] = v0 * v0; // 2 v0^2, halved by the interval map
  }
  return q;
}

} // namespace asmopt
