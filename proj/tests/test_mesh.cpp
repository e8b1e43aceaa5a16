#include "doctest.h"

#include <cmath>
#include <random>

#include "asmopt/mesh.hpp"

using namespace asmopt;

namespace {

Vec random_interior(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec v(g.num_interior());
  for (int i = 0; i < g.num_interior(); ++i) v[i] = normal(rng);
  return v;
}

} // namespace

TEST_CASE("mesh hierarchy construction and validation") {
  const MeshHierarchy m1 = build_mesh_hierarchy(1, 4, 4);
  CHECK(m1.h() == doctest::Approx(1.0 / 16).epsilon(1e-15));
  CHECK(m1.H() == doctest::Approx(1.0 / 4).epsilon(1e-15));
  CHECK(m1.fine.num_interior() == 15);

  const MeshHierarchy m2 = build_mesh_hierarchy(2, 2, 2);
  CHECK(m2.fine.cells == 4);
  CHECK(m2.fine.num_interior() == 9);
  CHECK(static_cast<int>(m2.fine.triangles.size()) == 32);

  CHECK_THROWS_AS(build_mesh_hierarchy(2, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_mesh_hierarchy(3, 4, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_mesh_hierarchy(1, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_mesh_hierarchy(1, -2, 4), std::invalid_argument);

  // interior count equals total minus boundary
  int boundary = 0;
  for (bool b : m2.fine.is_boundary) boundary += b ? 1 : 0;
  CHECK(m2.fine.num_interior() == m2.fine.num_nodes() - boundary);
}

TEST_CASE("nodal interpolation") {
  const MeshHierarchy mesh = build_mesh_hierarchy(2, 4, 2);

  const FemFunction one =
      nodal_interpolate(mesh, Level::fine, [](double, double) { return 1.0; });
  CHECK((one.coeffs.array() == 1.0).all());

  // idempotent on its own level
  const FemFunction again = nodal_interpolate(mesh, Level::fine, one);
  CHECK((again.coeffs - one.coeffs).lpNorm<Eigen::Infinity>() == 0.0);

  // coarse -> fine preserves values at coarse node positions exactly
  FemFunction coarse{Level::coarse, random_interior(mesh.coarse, 7)};
  const FemFunction fine = nodal_interpolate(mesh, Level::fine, coarse);
  const Vec coarse_full = embed_full(mesh.coarse, coarse.coeffs);
  const Vec fine_full = embed_full(mesh.fine, fine.coeffs);
  for (int J = 0; J <= mesh.coarse.cells; ++J)
    for (int I = 0; I <= mesh.coarse.cells; ++I) {
      const int cn = mesh.coarse.node_id(I, J);
      const int fn = mesh.fine.node_id(I * mesh.refinement, J * mesh.refinement);
      if (!mesh.fine.is_boundary[fn])
        CHECK(fine_full[fn] == coarse_full[cn]);
    }

  // fine -> coarse samples at coarse nodes
  const FemFunction back = nodal_interpolate(mesh, Level::coarse, fine);
  CHECK((back.coeffs - coarse.coeffs).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("gradient power integral on explicit small meshes") {
  // two elements of length 1/2, nodal values (0, 1, 0): slopes +-2
  const Grid g = build_uniform_grid(1, 2);
  Vec vals(3);
  vals << 0.0, 1.0, 0.0;
  CHECK(gradient_power_integral(g, vals, 2.0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(gradient_power_integral(g, vals, 3.0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(gradient_power_integral(g, vals, 1.5) ==
        doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-14));

  // u = x on the unit interval (boundary mask bypassed): integral of 1
  const Grid g16 = build_uniform_grid(1, 16);
  Vec xs(g16.num_nodes());
  for (int i = 0; i < g16.num_nodes(); ++i) xs[i] = g16.coords[i][0];
  CHECK(gradient_power_integral(g16, xs, 2.0) == doctest::Approx(1.0).epsilon(1e-14));

  // u = x + y in 2D: |grad| = sqrt(2)
  const Grid g2 = build_uniform_grid(2, 4);
  Vec xy(g2.num_nodes());
  for (int i = 0; i < g2.num_nodes(); ++i)
    xy[i] = g2.coords[i][0] + g2.coords[i][1];
  CHECK(gradient_power_integral(g2, xy, 4.0) == doctest::Approx(4.0).epsilon(1e-13));
}

TEST_CASE("energy seminorm basics") {
  const MeshHierarchy mesh = build_mesh_hierarchy(1, 4, 4);
  FemFunction zero{Level::fine, Vec::Zero(mesh.fine.num_interior())};
  CHECK(energy_sobolev_seminorm(mesh, zero, 2.0) == 0.0);
  CHECK_THROWS_AS(energy_sobolev_seminorm(mesh, zero, 0.5),
                  std::invalid_argument);

  // |c|^s homogeneity
  FemFunction u{Level::fine, random_interior(mesh.fine, 3)};
  FemFunction cu{Level::fine, Vec(-2.5 * u.coeffs)};
  for (double s : {1.0, 2.0, 3.5}) {
    const double lhs = energy_sobolev_seminorm(mesh, cu, s);
    const double rhs = std::pow(2.5, s) * energy_sobolev_seminorm(mesh, u, s);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("w1s norm and quadrature exactness") {
  const MeshHierarchy mesh = build_mesh_hierarchy(1, 4, 4);
  const Grid& g = mesh.fine;
  FemFunction zero{Level::fine, Vec::Zero(g.num_interior())};
  CHECK(w1s_norm(mesh, zero, 2.0) == 0.0);

  // single interior hat: closed form 2h/3 for the L2 part, 2/h for the
  // gradient part; cross-checked against a 10-point quadrature
  const double h = mesh.h();
  Vec hat = Vec::Zero(g.num_interior());
  hat[6] = 1.0;
  const Vec full = embed_full(g, hat);
  const double l2 = value_power_integral(g, full, 2.0);
  CHECK(l2 == doctest::Approx(2.0 * h / 3.0).epsilon(1e-14));
  const double l2_oracle = value_power_integral(g, full, 2.0, 19);
  CHECK(l2 == doctest::Approx(l2_oracle).epsilon(1e-14));
  const double expected = std::sqrt(2.0 * h / 3.0 + 2.0 / h);
  CHECK(w1s_norm(mesh, {Level::fine, hat}, 2.0) ==
        doctest::Approx(expected).epsilon(1e-14));

  // |c| homogeneity
  FemFunction u{Level::fine, random_interior(g, 11)};
  FemFunction cu{Level::fine, Vec(3.25 * u.coeffs)};
  for (double s : {1.0, 2.0, 4.0})
    CHECK(w1s_norm(mesh, cu, s) ==
          doctest::Approx(3.25 * w1s_norm(mesh, u, s)).epsilon(1e-12));
}

TEST_CASE("quadrature matches assembled mass matrices for s = 2") {
  for (int dim : {1, 2}) {
    const MeshHierarchy mesh = build_mesh_hierarchy(dim, 2, 2);
    const Grid& g = mesh.fine;
    const SpMat M = assemble_mass(g);
    const Vec u = random_interior(g, 17 + dim);
    const double quad = value_power_integral(g, embed_full(g, u), 2.0);
    CHECK(quad == doctest::Approx(u.dot(M * u)).epsilon(1e-13));
  }
}

TEST_CASE("gauss legendre rules are exact through degree 2n-1") {
  for (int n : {1, 2, 3, 5, 10}) {
    const Quadrature1D q = gauss_legendre_01(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double acc = 0.0;
      for (size_t i = 0; i < q.points.size(); ++i)
        acc += q.weights[i] * std::pow(q.points[i], k);
      CHECK(acc == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
  }
}

TEST_CASE("lumped masses on structured grids") {
  const MeshHierarchy m1 = build_mesh_hierarchy(1, 4, 4);
  const Vec l1 = lumped_masses(m1.fine);
  CHECK((l1.array() - m1.h()).abs().maxCoeff() < 1e-15);

  const MeshHierarchy m2 = build_mesh_hierarchy(2, 2, 4);
  const Vec l2 = lumped_masses(m2.fine);
  CHECK((l2.array() - m2.h() * m2.h()).abs().maxCoeff() < 1e-15);
}

TEST_CASE("stiffness matrix matches the five point stencil in 2D") {
  const MeshHierarchy mesh = build_mesh_hierarchy(2, 2, 2);
  const SpMat A = assemble_stiffness(mesh.fine);
  const Grid& g = mesh.fine;
  const int center = g.interior_index[g.node_id(2, 2)];
  const int left = g.interior_index[g.node_id(1, 2)];
  CHECK(A.coeff(center, center) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(A.coeff(center, left) == doctest::Approx(-1.0).epsilon(1e-14));
  // diagonal neighbors decouple on this triangulation
  const int diag = g.interior_index[g.node_id(1, 1)];
  CHECK(A.coeff(center, diag) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("prolongation is linear interpolation on the nested mesh") {
  const MeshHierarchy mesh = build_mesh_hierarchy(1, 4, 2);
  const SpMat P = prolongation_matrix(mesh);
  const Vec c = random_interior(mesh.coarse, 23);
  const Vec f = P * c;
  const Vec cf = embed_full(mesh.coarse, c);
  const Vec ff = embed_full(mesh.fine, f);
  // exact at coarse nodes, averaged at midpoints
  for (int I = 1; I < mesh.coarse.cells; ++I)
    CHECK(ff[2 * I] == doctest::Approx(cf[I]).epsilon(1e-15));
  for (int I = 0; I < mesh.coarse.cells; ++I)
    CHECK(ff[2 * I + 1] ==
          doctest::Approx(0.5 * (cf[I] + cf[I + 1])).epsilon(1e-14));
}
