#include "doctest.h"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <random>

#include "asmopt/analysis.hpp"
#include "asmopt/solvers.hpp"

using namespace asmopt;

namespace {

Vec random_vec(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// synthetic SPD quadratic with per-coordinate l1 weights
Objective synthetic_l1_quadratic(const std::vector<int>& sizes,
                                 std::uint64_t seed, double l1 = 0.3) {
  int n = 0;
  for (int m : sizes) n += m;
  std::mt19937_64 rng(seed);
  Mat B(n, n);
  std::normal_distribution<double> normal;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = normal(rng);
  const Mat A = B.transpose() * B / n + 0.5 * Mat::Identity(n, n);
  const Vec b = random_vec(n, rng);
  return make_block_separable(sizes, A, b, Vec::Constant(n, l1));
}

// oracle: the additive Schwarz preconditioner action assembled from dense
// local stiffness inverses
Mat schwarz_inverse(const Objective& lin, const SpaceDecomposition& dec) {
  const Mat A = Mat(static_cast<const QuadraticSmooth&>(*lin.smooth).matrix());
  Mat C = Mat::Zero(lin.dim(), lin.dim());
  for (int k = 0; k < dec.num_subdomains; ++k) {
    const auto& d = dec.subdomain_dofs[k];
    Mat Akk(d.size(), d.size());
    for (size_t a = 0; a < d.size(); ++a)
      for (size_t b = 0; b < d.size(); ++b) Akk(a, b) = A(d[a], d[b]);
    const Mat inv = Akk.inverse();
    for (size_t a = 0; a < d.size(); ++a)
      for (size_t b = 0; b < d.size(); ++b) C(d[a], d[b]) += inv(a, b);
  }
  return C;
}

} // namespace

TEST_CASE("abstract gradient method on the scalar quadratic") {
  const Objective obj = make_block_separable({1}, Mat::Identity(1, 1),
                                             Vec::Zero(1), Vec::Zero(1));
  AsmConfig cfg;
  cfg.budget = 10;
  cfg.reference_energy = 0.0;
  Vec u0(1);
  u0 << 1.0;
  const IterationTrace trace =
      gradient_method(obj, forward_backward_surrogate(obj, 0.5), u0, cfg);
  REQUIRE(trace.records.size() == 11);
  for (int n = 0; n <= 10; ++n) {
    const double un = std::pow(2.0, -n);
    CHECK(trace.records[n].energy ==
          doctest::Approx(0.5 * un * un).epsilon(1e-14));
  }
  CHECK(trace.final_iterate[0] == doctest::Approx(std::pow(2.0, -10)).epsilon(1e-14));

  // starting at the minimizer the trace is constant
  const IterationTrace fixed = gradient_method(
      obj, forward_backward_surrogate(obj, 0.5), Vec::Zero(1), cfg);
  for (const auto& r : fixed.records) CHECK(r.energy == 0.0);
}

TEST_CASE("forward-backward matches the soft threshold oracle per iterate") {
  const Objective obj = synthetic_l1_quadratic({4}, 91);
  const auto& quad = static_cast<const QuadraticSmooth&>(*obj.smooth);
  const double L = *obj.meta.lipschitz;
  const double tau = 1.0 / L;
  const GradientSurrogate fb = forward_backward_surrogate(obj, tau);

  std::mt19937_64 rng(17);
  Vec u = random_vec(obj.dim(), rng);
  Vec oracle = u;
  for (int n = 0; n < 50; ++n) {
    u = fb.argmin(u, obj.smooth->gradient(u));
    // independent per-coordinate prox computation
    const Vec g = Mat(quad.matrix()) * oracle - quad.linear_term();
    Vec z = oracle - tau * g;
    for (int i = 0; i < z.size(); ++i) {
      const double w = tau * obj.nonsmooth.weights[i];
      z[i] = z[i] > w ? z[i] - w : (z[i] < -w ? z[i] + w : 0.0);
    }
    oracle = z;
    CHECK((u - oracle).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("asm step equals the preconditioned richardson step") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective lin = make_linear_elliptic(mesh, Load::constant(1.0));
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  const auto surrogate = make_exact_surrogate(lin, dec);

  AsmConfig cfg;
  cfg.tau = tau0(dec);
  cfg.omega = 1.0;

  const Mat C = schwarz_inverse(lin, dec);
  const auto& quad = static_cast<const QuadraticSmooth&>(*lin.smooth);

  std::mt19937_64 rng(3);
  Vec u = random_vec(lin.dim(), rng);
  Vec v = u;
  for (int n = 0; n < 50; ++n) {
    u = asm_step(lin, *surrogate, cfg, u, nullptr);
    const Vec grad = Mat(quad.matrix()) * v - quad.linear_term();
    v = v - (cfg.tau / cfg.omega) * (C * grad);
    CHECK((u - v).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("asm iterate minimizes the explicit quadratic surrogate") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 2));
  const Objective lin = make_linear_elliptic(mesh, Load::constant(1.0));
  const SpaceDecomposition dec = build_decomposition(*mesh, {2}, 1, false);
  const auto surrogate = make_exact_surrogate(lin, dec);
  AsmConfig cfg;
  cfg.tau = 0.4;
  cfg.omega = 1.3;

  // M_{tau,omega}(u, v) = omega/(2 tau) <M (u - v), u - v> with M the
  // inverse of the assembled preconditioner action; its linearized argmin
  // solves (omega/tau) M (u - v) = -F'(v)
  const Mat C = schwarz_inverse(lin, dec);
  std::mt19937_64 rng(5);
  const Vec v = random_vec(lin.dim(), rng);
  const Vec grad = lin.smooth->gradient(v);
  const Vec stepped = asm_step(lin, *surrogate, cfg, v, nullptr);
  // first-order condition of the surrogate at the step:
  // (omega/tau) M (u - v) + F'(v) = 0 with M = C^{-1}
  const Vec residual =
      (cfg.omega / cfg.tau) * C.ldlt().solve(Vec(stepped - v)) + grad;
  CHECK(residual.lpNorm<Eigen::Infinity>() <=
        1e-10 * grad.lpNorm<Eigen::Infinity>());
  // and the argmin itself, assembled stably from the preconditioner action
  const Vec minimizer = v - (cfg.tau / cfg.omega) * (C * grad);
  CHECK((stepped - minimizer).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("asm fixed point and single subdomain exactness") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective lin = make_linear_elliptic(mesh, Load::constant(1.0));
  const auto& quad = static_cast<const QuadraticSmooth&>(*lin.smooth);
  const Vec u_star =
      Eigen::SimplicialLLT<SpMat>(quad.matrix()).solve(quad.linear_term());

  // N = 1, tau = 1: one exact step lands on the minimizer
  const SpaceDecomposition whole = build_decomposition(*mesh, {1}, 1, false);
  AsmConfig cfg;
  cfg.tau = 1.0;
  cfg.omega = 1.0;
  const Vec one_step =
      asm_step(lin, *make_exact_surrogate(lin, whole), cfg, Vec::Zero(lin.dim()),
               nullptr);
  CHECK((one_step - u_star).lpNorm<Eigen::Infinity>() <= 1e-10);

  // minimizer is a fixed point of the overlapping step
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  cfg.tau = tau0(dec);
  const Vec stay =
      asm_step(lin, *make_exact_surrogate(lin, dec), cfg, u_star, nullptr);
  CHECK((stay - u_star).lpNorm<Eigen::Infinity>() <= 10.0 * cfg.eps_local);
}

TEST_CASE("solve_local matches a direct factorization oracle") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective lin = make_linear_elliptic(mesh, Load::constant(1.0));
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  const Mat A = Mat(static_cast<const QuadraticSmooth&>(*lin.smooth).matrix());

  AsmConfig cfg;
  std::mt19937_64 rng(7);
  const Vec v = random_vec(lin.dim(), rng);
  const Vec grad = lin.smooth->gradient(v);
  for (int k = 0; k < dec.num_subdomains; ++k) {
    const auto& d = dec.subdomain_dofs[k];
    Mat Akk(d.size(), d.size());
    Vec gk(d.size());
    for (size_t a = 0; a < d.size(); ++a) {
      gk[a] = grad[d[a]];
      for (size_t b = 0; b < d.size(); ++b) Akk(a, b) = A(d[a], d[b]);
    }
    const Vec oracle = Akk.ldlt().solve(Vec(-gk));
    const Vec w = solve_local(lin, dec, k, v, cfg);
    CHECK((w - oracle).lpNorm<Eigen::Infinity>() <= 1e-10);
  }

  // zero local gradient and flat G: the local correction vanishes exactly
  const Objective hom = make_linear_elliptic(mesh, Load::constant(0.0));
  const Vec w0 = solve_local(hom, dec, 0, Vec::Zero(lin.dim()), cfg);
  CHECK(w0.lpNorm<Eigen::Infinity>() == 0.0);

  CHECK_THROWS_AS(solve_local(lin, dec, 9, v, cfg), std::out_of_range);
}

TEST_CASE("asm_step on the decomposition matches the surrogate path") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective lin = make_linear_elliptic(mesh, Load::constant(1.0));
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  AsmConfig cfg;
  cfg.tau = tau0(dec);
  cfg.omega = 1.0;
  std::mt19937_64 rng(8);
  const Vec u = random_vec(lin.dim(), rng);
  const Vec via_dec = asm_step(lin, dec, cfg, u);
  const auto surrogate = make_exact_surrogate(lin, dec);
  const Vec via_surrogate = asm_step(lin, *surrogate, cfg, u, nullptr);
  CHECK((via_dec - via_surrogate).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("exhausted local caps surface as solver errors") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective l1 = make_l1_obstacle(mesh, Load::constant(4.0), 1.0);
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  AsmConfig cfg;
  cfg.tau = tau0(dec);
  cfg.omega = 1.0;
  cfg.budget = 5;
  cfg.local_cap = 1;
  cfg.eps_local = 1e-14;
  CHECK_THROWS_AS(asm_solve(l1, dec, cfg, Vec::Zero(l1.dim())), SolverError);
}

TEST_CASE("nonsmooth local solve satisfies subgradient optimality") {
  // edge subdomains carry 3 dofs: m=4, r=3 with 4 blocks, one overlap layer
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 4, 3));
  const Objective l1 = make_l1_obstacle(mesh, Load::constant(1.0), 2.0);
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  REQUIRE(dec.subdomain_dofs[0].size() == 3);

  AsmConfig cfg;
  cfg.eps_local = 1e-12;
  std::mt19937_64 rng(11);
  const Vec v = random_vec(l1.dim(), rng);
  const Mat A = Mat(static_cast<const QuadraticSmooth&>(*l1.smooth).matrix());

  for (int k = 0; k < dec.num_subdomains; ++k) {
    const Vec w = solve_local(l1, dec, k, v, cfg);
    // exhaustive coordinate-wise subgradient check at z = v_k + w
    const auto& d = dec.subdomain_dofs[k];
    Vec z(d.size());
    for (size_t i = 0; i < d.size(); ++i) z[i] = v[d[i]] + w[i];
    Vec full = v;
    for (size_t i = 0; i < d.size(); ++i) full[d[i]] = z[i];
    const Vec grad = l1.smooth->gradient(full);
    for (size_t i = 0; i < d.size(); ++i) {
      const double g = grad[d[i]];
      const double s = l1.nonsmooth.weights[d[i]];
      if (z[i] > 1e-12)
        CHECK(std::abs(g + s) <= 1e-8);
      else if (z[i] < -1e-12)
        CHECK(std::abs(g - s) <= 1e-8);
      else
        CHECK(std::abs(g) <= s + 1e-8);
    }
  }
}

TEST_CASE("bcd equals asm on the product space decomposition") {
  const Objective obj = synthetic_l1_quadratic({3, 2, 4, 3}, 123);
  AsmConfig cfg;
  cfg.tau = 0.25;
  cfg.omega = *obj.meta.lipschitz;
  cfg.budget = 50;

  std::mt19937_64 rng(29);
  const Vec u0 = random_vec(obj.dim(), rng);
  const IterationTrace bcd = bcd_solve(obj, cfg, u0);
  const auto surrogate = make_bcd_surrogate(obj);
  const IterationTrace asm_trace = asm_solve(obj, *surrogate, cfg, u0);
  REQUIRE(bcd.records.size() == asm_trace.records.size());
  CHECK((bcd.final_iterate - asm_trace.final_iterate).lpNorm<Eigen::Infinity>() <=
        1e-12);
  for (size_t i = 0; i < bcd.records.size(); ++i)
    CHECK(std::abs(bcd.records[i].energy - asm_trace.records[i].energy) <=
          1e-12 * (1.0 + std::abs(bcd.records[i].energy)));
}

TEST_CASE("bcd specializations") {
  // G = 0, N = 1, tau = 1: plain gradient descent with step 1/L
  const int n = 5;
  std::mt19937_64 rng(31);
  Mat B(n, n);
  std::normal_distribution<double> normal;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = normal(rng);
  const Mat A = B.transpose() * B / n + Mat::Identity(n, n);
  const Vec b = random_vec(n, rng);
  const Objective obj = make_block_separable({n}, A, b, Vec::Zero(n));
  const double L = *obj.meta.lipschitz;

  AsmConfig cfg;
  cfg.tau = 1.0;
  cfg.omega = L;
  cfg.budget = 20;
  const Vec u0 = random_vec(n, rng);
  const IterationTrace trace = bcd_solve(obj, cfg, u0);
  Vec u = u0;
  for (int k = 0; k < 20; ++k) u = u - (A * u - b) / L;
  CHECK((trace.final_iterate - u).lpNorm<Eigen::Infinity>() <= 1e-12);

  // starting from the closed-form minimizer of the identity-quadratic l1
  // problem the trace is constant
  const Objective idl1 = make_block_separable(
      {n}, Mat::Identity(n, n), b, Vec::Constant(n, 0.3));
  Vec star(n);
  for (int i = 0; i < n; ++i)
    star[i] = b[i] > 0.3 ? b[i] - 0.3 : (b[i] < -0.3 ? b[i] + 0.3 : 0.0);
  cfg.omega = 1.0;
  cfg.tau = 1.0;
  const IterationTrace fixed = bcd_solve(idl1, cfg, star);
  for (const auto& r : fixed.records)
    CHECK(r.energy == doctest::Approx(fixed.records[0].energy).epsilon(1e-15));
  CHECK((fixed.final_iterate - star).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("one block problem reduces to the proximal gradient solution") {
  const Objective obj = synthetic_l1_quadratic({6}, 314);
  AsmConfig cfg;
  cfg.tau = 1.0;
  cfg.omega = *obj.meta.lipschitz;
  cfg.budget = 4000;
  const IterationTrace trace = bcd_solve(obj, cfg, Vec::Zero(obj.dim()));
  const Vec u = trace.final_iterate;
  // coordinate-wise subgradient optimality of the limit
  const Vec g = obj.smooth->gradient(u);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double s = obj.nonsmooth.weights[i];
    if (u[i] > 1e-10)
      CHECK(std::abs(g[i] + s) <= 1e-8);
    else if (u[i] < -1e-10)
      CHECK(std::abs(g[i] - s) <= 1e-8);
    else
      CHECK(std::abs(g[i]) <= s + 1e-8);
  }
}

TEST_CASE("budget zero produces only the initial record") {
  const Objective obj = synthetic_l1_quadratic({4}, 7);
  AsmConfig cfg;
  cfg.tau = 0.25;
  cfg.omega = *obj.meta.lipschitz;
  cfg.budget = 0;
  const IterationTrace trace = bcd_solve(obj, cfg, Vec::Zero(obj.dim()));
  CHECK(trace.records.size() == 1);
}

TEST_CASE("step bound validation") {
  const Objective obj = synthetic_l1_quadratic({2, 2}, 77);
  AsmConfig cfg;
  cfg.tau = 0.75; // above 1/N = 0.5
  cfg.omega = *obj.meta.lipschitz;
  CHECK_THROWS_AS(bcd_solve(obj, cfg, Vec::Zero(obj.dim())),
                  std::invalid_argument);
  cfg.tau = 0.5;
  cfg.omega = 0.5 * *obj.meta.lipschitz; // below omega0
  CHECK_THROWS_AS(bcd_solve(obj, cfg, Vec::Zero(obj.dim())),
                  std::invalid_argument);
}

TEST_CASE("asm on the l1 mesh problem converges monotonically") {
  // the load must dominate the l1 threshold or the minimizer is just zero
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective l1 = make_l1_obstacle(mesh, Load::constant(4.0), 1.0);
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  AsmConfig cfg;
  cfg.tau = tau0(dec);
  cfg.omega = 1.0;
  cfg.budget = 60;
  const IterationTrace trace = asm_solve(l1, dec, cfg, Vec::Zero(l1.dim()));
  const auto energies = trace.energies();
  for (size_t i = 1; i < energies.size(); ++i)
    CHECK(energies[i] <= energies[i - 1] + 1e-12 * (1.0 + std::abs(energies[i - 1])));
  // the energy strictly improves overall
  CHECK(energies.back() < energies.front());
}

TEST_CASE("assumption sampling for local stability") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective l1 = make_l1_obstacle(mesh, Load::constant(1.0), 1.0);
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  const auto exact = make_exact_surrogate(l1, dec);
  std::mt19937_64 rng(41);
  for (int t = 0; t < 25; ++t) {
    const Vec v = random_vec(l1.dim(), rng);
    for (int k = 0; k < exact->num_parts(); ++k) {
      const Vec w = random_vec(
          static_cast<int>(dec.subdomain_dofs[k].size()), rng);
      Vec z = v;
      for (size_t i = 0; i < dec.subdomain_dofs[k].size(); ++i)
        z[dec.subdomain_dofs[k][i]] += w[i];
      // exact solvers: both inequalities hold with equality structure
      CHECK(bregman(*l1.smooth, z, v) <=
            exact->omega0() * exact->d_k(k, w, v) + 1e-12);
      CHECK(l1.nonsmooth.value(z) <= exact->G_k(k, w, v) + 1e-12);
    }
  }

  const Objective block = synthetic_l1_quadratic({3, 3, 2}, 999);
  const auto bcd = make_bcd_surrogate(block);
  int offset = 0;
  for (int k = 0; k < bcd->num_parts(); ++k) {
    const int m = block.meta.block_sizes[k];
    for (int t = 0; t < 25; ++t) {
      const Vec v = random_vec(block.dim(), rng);
      const Vec w = random_vec(m, rng);
      Vec z = v;
      for (int i = 0; i < m; ++i) z[offset + i] += w[i];
      CHECK(bregman(*block.smooth, z, v) <=
            bcd->omega0() * bcd->d_k(k, w, v) + 1e-12);
      CHECK(block.nonsmooth.value(z) <= bcd->G_k(k, w, v) + 1e-12);
    }
    offset += m;
  }

  // constraint splitting: a locally feasible correction stays globally
  // feasible, so G(v + R_k^* w) <= G_k(w, v) on samples
  const FemFunction bump = nodal_interpolate(
      *mesh, Level::fine,
      [](double x, double) { return 0.25 - 2.0 * (x - 0.5) * (x - 0.5); });
  const Objective ob =
      make_obstacle_constrained(mesh, Load::constant(0.0), {bump});
  const auto cdsur = make_constraint_surrogate(ob, dec);
  for (int t = 0; t < 25; ++t) {
    Vec v = ob.nonsmooth.lower +
            random_vec(ob.dim(), rng).cwiseAbs(); // feasible outer iterate
    for (int k = 0; k < cdsur->num_parts(); ++k) {
      const Vec w = random_vec(
          static_cast<int>(dec.subdomain_dofs[k].size()), rng);
      Vec z = v;
      for (size_t i = 0; i < dec.subdomain_dofs[k].size(); ++i)
        z[dec.subdomain_dofs[k][i]] += w[i];
      CHECK(bregman(*ob.smooth, z, v) <=
            cdsur->omega0() * cdsur->d_k(k, w, v) + 1e-12);
      CHECK(ob.nonsmooth.value(z) <= cdsur->G_k(k, w, v) + 1e-12);
    }
  }
}

TEST_CASE("constraint decomposition stays feasible and converges") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const FemFunction bump = nodal_interpolate(
      *mesh, Level::fine,
      [](double x, double) { return 0.3 - std::abs(x - 0.5); });
  const Objective obj =
      make_obstacle_constrained(mesh, Load::constant(0.0), {bump});
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);

  AsmConfig cfg;
  cfg.tau = 0.25; // 1/N for the constraint splitting
  cfg.omega = 1.0;
  cfg.budget = 80;
  const Vec u0 = bump.coeffs.cwiseMax(0.0);
  const IterationTrace trace = constraint_decomposition_solve(obj, dec, cfg, u0);

  // feasible start, feasible iterates (the solver enforces the exact scan),
  // monotone energies, genuine decrease
  const auto energies = trace.energies();
  for (size_t i = 1; i < energies.size(); ++i)
    CHECK(energies[i] <=
          energies[i - 1] + 1e-12 * (1.0 + std::abs(energies[i - 1])));
  CHECK((trace.final_iterate.array() >= bump.coeffs.array()).all());
  CHECK(energies.back() < energies.front());

  // infeasible start is rejected
  Vec bad = u0;
  bad[7] = bump.coeffs[7] - 1.0;
  CHECK_THROWS_AS(constraint_decomposition_solve(obj, dec, cfg, bad),
                  std::invalid_argument);
}

TEST_CASE("constraint decomposition with an inactive obstacle matches asm") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 2));
  const FemFunction low{Level::fine,
                        Vec::Constant(mesh->fine.num_interior(), -1e6)};
  const Objective constrained =
      make_obstacle_constrained(mesh, Load::constant(1.0), {low});
  const Objective plain = make_linear_elliptic(mesh, Load::constant(1.0));
  const SpaceDecomposition dec = build_decomposition(*mesh, {2}, 1, false);

  AsmConfig cfg;
  cfg.tau = 0.5; // 1/N, admissible for both splittings
  cfg.omega = 1.0;
  cfg.budget = 20;
  cfg.eps_local = 1e-12;
  cfg.local_cap = 5000;
  const Vec u0 = Vec::Zero(plain.dim());
  const IterationTrace cd = constraint_decomposition_solve(constrained, dec, cfg, u0);
  const IterationTrace asm_trace = asm_solve(plain, dec, cfg, u0);
  CHECK((cd.final_iterate - asm_trace.final_iterate).lpNorm<Eigen::Infinity>() <=
        1e-8);

  // a feasible minimizer is a fixed point
  const auto& quad = static_cast<const QuadraticSmooth&>(*plain.smooth);
  const Vec u_star =
      Eigen::SimplicialLLT<SpMat>(quad.matrix()).solve(quad.linear_term());
  AsmConfig one = cfg;
  one.budget = 1;
  const IterationTrace fixed =
      constraint_decomposition_solve(constrained, dec, one, u_star);
  CHECK((fixed.final_iterate - u_star).lpNorm<Eigen::Infinity>() <=
        10.0 * cfg.eps_local);
}

TEST_CASE("solver runs are deterministic") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective l1 = make_l1_obstacle(mesh, Load::constant(1.0), 1.0);
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  AsmConfig cfg;
  cfg.tau = tau0(dec);
  cfg.omega = 1.0;
  cfg.budget = 25;
  const IterationTrace a = asm_solve(l1, dec, cfg, Vec::Zero(l1.dim()));
  const IterationTrace b = asm_solve(l1, dec, cfg, Vec::Zero(l1.dim()));
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i)
    CHECK(a.records[i].energy == b.records[i].energy);
  CHECK((a.final_iterate - b.final_iterate).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("two level asm accelerates the linear problem") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective lin = make_linear_elliptic(mesh, Load::constant(1.0));
  const auto& quad = static_cast<const QuadraticSmooth&>(*lin.smooth);
  const Vec u_star =
      Eigen::SimplicialLLT<SpMat>(quad.matrix()).solve(quad.linear_term());
  const double e_star = lin.energy(u_star);

  auto run = [&](bool two_level) {
    const SpaceDecomposition dec =
        build_decomposition(*mesh, {4}, 1, two_level);
    AsmConfig cfg;
    cfg.tau = tau0(dec);
    cfg.omega = 1.0;
    cfg.budget = 30;
    cfg.reference_energy = e_star;
    return asm_solve(lin, dec, cfg, Vec::Zero(lin.dim()));
  };
  const IterationTrace one = run(false);
  const IterationTrace two = run(true);
  CHECK(one.records.back().energy_error >= -1e-12);
  CHECK(two.records.back().energy_error >= -1e-12);
  // both contract; the coarse level must not break convergence
  CHECK(two.records.back().energy_error <= one.records[0].energy_error);
  const RateFit f1 = fit_rate(one, FitMode::linear);
  const RateFit f2 = fit_rate(two, FitMode::linear);
  CHECK(f1.rho < 1.0);
  CHECK(f2.rho < 1.0);
}

TEST_CASE("s-laplacian asm decreases energy with newton local solves") {
  auto mesh = std::make_shared<MeshHierarchy>(build_mesh_hierarchy(1, 8, 4));
  const Objective s4 = make_s_laplacian(mesh, 4.0, Load::constant(1.0));
  const SpaceDecomposition dec = build_decomposition(*mesh, {4}, 1, false);
  AsmConfig cfg;
  cfg.tau = tau0(dec);
  cfg.omega = 1.0;
  cfg.budget = 30;
  const IterationTrace trace = asm_solve(s4, dec, cfg, Vec::Zero(s4.dim()));
  const auto energies = trace.energies();
  for (size_t i = 1; i < energies.size(); ++i)
    CHECK(energies[i] <=
          energies[i - 1] + 1e-12 * (1.0 + std::abs(energies[i - 1])));
  CHECK(energies.back() < 0.0); // below the zero start
}
