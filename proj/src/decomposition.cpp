#include "asmopt/decomposition.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace asmopt {

namespace {

struct AxisBlocks {
  std::vector<int> begin; // in coarse cells, size n+1
};

AxisBlocks split_axis(int coarse_cells, int blocks) {
  AxisBlocks out;
  out.begin.resize(blocks + 1);
  for (int b = 0; b <= blocks; ++b)
    out.begin[b] = static_cast<int>(
        (static_cast<long long>(coarse_cells) * b) / blocks);
  return out;
}

bool ranges_intersect(int a0, int a1, int b0, int b1) {
  return a0 <= b1 && b0 <= a1;
}

// Expanded node range of a subdomain along one axis: dof nodes plus one
// element ring, clamped to the grid.
std::array<int, 2> expanded_range(int ea, int eb, int cells) {
  return {std::max(0, ea), std::min(cells, eb)};
}

} // namespace

Vec SpaceDecomposition::theta_full(int k) const {
  Vec out = Vec::Zero(fine_dofs);
  const auto& dofs = subdomain_dofs[k];
  for (size_t i = 0; i < dofs.size(); ++i) out[dofs[i]] = theta[k][i];
  return out;
}

SpaceDecomposition build_decomposition(const MeshHierarchy& mesh,
                                       const std::vector<int>& subdomains_per_axis,
                                       int overlap_layers, bool two_level) {
  const int dim = mesh.dim;
  if (static_cast<int>(subdomains_per_axis.size()) != dim)
    throw std::invalid_argument(
        "subdomain layout must have one entry per axis");
  for (int n : subdomains_per_axis) {
    if (n < 1) throw std::invalid_argument("subdomain counts must be >= 1");
    if (n > mesh.coarse_cells)
      throw std::invalid_argument(
          "more subdomains than coarse cells along an axis");
  }
  if (overlap_layers < 1)
    throw std::invalid_argument("overlap layers must be >= 1");

  const Grid& fg = mesh.fine;
  const int r = mesh.refinement;
  const int M = fg.cells;
  const int nx = subdomains_per_axis[0];
  const int ny = dim == 2 ? subdomains_per_axis[1] : 1;
  const int l = overlap_layers;

  SpaceDecomposition dec;
  dec.num_subdomains = nx * ny;
  dec.two_level = two_level;
  dec.overlap_layers = l;
  dec.delta = l * fg.h;
  dec.fine_dofs = fg.num_interior();

  const AxisBlocks bx = split_axis(mesh.coarse_cells, nx);
  const AxisBlocks by = split_axis(dim == 2 ? mesh.coarse_cells : 1,
                                   dim == 2 ? ny : 1);

  dec.core_cells.resize(dec.num_subdomains);
  dec.extended_cells.resize(dec.num_subdomains);
  for (int jy = 0; jy < ny; ++jy)
    for (int ix = 0; ix < nx; ++ix) {
      const int k = jy * nx + ix;
      const int cx0 = bx.begin[ix] * r, cx1 = bx.begin[ix + 1] * r;
      const int cy0 = dim == 2 ? by.begin[jy] * r : 0;
      const int cy1 = dim == 2 ? by.begin[jy + 1] * r : 1;
      dec.core_cells[k] = {cx0, cx1, cy0, cy1};
      dec.extended_cells[k] = {std::max(0, cx0 - l), std::min(M, cx1 + l),
                               dim == 2 ? std::max(0, cy0 - l) : 0,
                               dim == 2 ? std::min(M, cy1 + l) : 1};
    }

  // Same-color disjointness under the standard checkerboard coloring; a too
  // large overlap shows up here as two equal-color neighbors whose expanded
  // node sets intersect.
  auto standard_color = [&](int k) {
    const int ix = k % nx, jy = k / nx;
    return (ix % 2) + 2 * (jy % 2);
  };
  auto adjacent = [&](int a, int b) {
    const auto& ea = dec.extended_cells[a];
    const auto& eb = dec.extended_cells[b];
    const auto rxa = expanded_range(ea[0], ea[1], M);
    const auto rxb = expanded_range(eb[0], eb[1], M);
    if (!ranges_intersect(rxa[0], rxa[1], rxb[0], rxb[1])) return false;
    if (dim == 1) return true;
    const int My = M;
    const auto rya = expanded_range(ea[2], ea[3], My);
    const auto ryb = expanded_range(eb[2], eb[3], My);
    return ranges_intersect(rya[0], rya[1], ryb[0], ryb[1]);
  };
  for (int a = 0; a < dec.num_subdomains; ++a)
    for (int b = a + 1; b < dec.num_subdomains; ++b)
      if (standard_color(a) == standard_color(b) && adjacent(a, b))
        throw std::invalid_argument(
            "overlap too large for disjoint coloring: subdomains " +
            std::to_string(a) + " and " + std::to_string(b) +
            " share color " + std::to_string(standard_color(a)) +
            " but their overlapped regions touch; reduce overlap layers");

  // Greedy coloring on the adjacency graph; the structured layout keeps the
  // count at <= 2 in 1D and <= 4 in 2D.
  dec.color.assign(dec.num_subdomains, -1);
  int num_colors = 0;
  for (int k = 0; k < dec.num_subdomains; ++k) {
    std::vector<bool> used(dec.num_subdomains, false);
    for (int a = 0; a < k; ++a)
      if (adjacent(a, k)) used[dec.color[a]] = true;
    int c = 0;
    while (used[c]) ++c;
    dec.color[k] = c;
    num_colors = std::max(num_colors, c + 1);
  }
  dec.num_colors = num_colors;
  if (dec.num_colors > (dim == 1 ? 2 : 4))
    throw std::logic_error("structured coloring exceeded the color bound");

  // Subdomain dofs and the raw overlap-ramp weights.
  const int inf = std::numeric_limits<int>::max();
  dec.subdomain_dofs.resize(dec.num_subdomains);
  std::vector<std::vector<double>> raw(dec.num_subdomains);
  Vec weight_sum = Vec::Zero(fg.num_interior());
  for (int k = 0; k < dec.num_subdomains; ++k) {
    const auto& e = dec.extended_cells[k];
    const int lo_i = e[0] + 1, hi_i = e[1] - 1;
    const int lo_j = dim == 2 ? e[2] + 1 : 0;
    const int hi_j = dim == 2 ? e[3] - 1 : 0;
    for (int j = lo_j; j <= hi_j; ++j)
      for (int i = lo_i; i <= hi_i; ++i) {
        const int dof = fg.interior_index[fg.node_id(i, j)];
        if (dof < 0) continue;
        int dist = l;
        dist = std::min(dist, e[0] == 0 ? inf : i - e[0]);
        dist = std::min(dist, e[1] == M ? inf : e[1] - i);
        if (dim == 2) {
          dist = std::min(dist, e[2] == 0 ? inf : j - e[2]);
          dist = std::min(dist, e[3] == M ? inf : e[3] - j);
        }
        if (dist <= 0) continue;
        dec.subdomain_dofs[k].push_back(dof);
        raw[k].push_back(static_cast<double>(dist));
        weight_sum[dof] += static_cast<double>(dist);
      }
  }
  for (int d = 0; d < fg.num_interior(); ++d)
    if (!(weight_sum[d] > 0.0))
      throw std::logic_error("subdomains do not cover the fine space");

  dec.theta.resize(dec.num_subdomains);
  for (int k = 0; k < dec.num_subdomains; ++k) {
    dec.theta[k] = Vec(dec.subdomain_dofs[k].size());
    for (size_t i = 0; i < dec.subdomain_dofs[k].size(); ++i)
      dec.theta[k][i] = raw[k][i] / weight_sum[dec.subdomain_dofs[k][i]];
  }

  if (two_level) dec.coarse_prolongation = prolongation_matrix(mesh);
  return dec;
}

double tau0(const SpaceDecomposition& dec) {
  return dec.two_level ? 1.0 / (dec.num_colors + 1) : 1.0 / dec.num_colors;
}

Vec restrict_to(const SpaceDecomposition& dec, int k, const FemFunction& u) {
  if (k < 0 || k >= dec.num_subdomains)
    throw std::out_of_range("subdomain index out of range");
  if (u.level != Level::fine)
    throw std::invalid_argument("restriction expects a fine-level function");
  const auto& dofs = dec.subdomain_dofs[k];
  Vec out(dofs.size());
  for (size_t i = 0; i < dofs.size(); ++i) out[i] = u.coeffs[dofs[i]];
  return out;
}

FemFunction prolong_from(const SpaceDecomposition& dec, int k, const Vec& wk) {
  if (k < 0 || k >= dec.num_subdomains)
    throw std::out_of_range("subdomain index out of range");
  const auto& dofs = dec.subdomain_dofs[k];
  if (wk.size() != static_cast<Eigen::Index>(dofs.size()))
    throw std::invalid_argument("local vector length mismatch");
  Vec out = Vec::Zero(dec.fine_dofs);
  for (size_t i = 0; i < dofs.size(); ++i) out[dofs[i]] = wk[i];
  return FemFunction{Level::fine, out};
}

Decomposed stable_decompose_one_level(const MeshHierarchy& mesh,
                                      const SpaceDecomposition& dec,
                                      const FemFunction& w) {
  (void)mesh;
  Decomposed out;
  out.parts.resize(dec.num_subdomains);
  for (int k = 0; k < dec.num_subdomains; ++k) {
    const auto& dofs = dec.subdomain_dofs[k];
    Vec part(dofs.size());
    for (size_t i = 0; i < dofs.size(); ++i)
      part[i] = dec.theta[k][i] * w.coeffs[dofs[i]];
    out.parts[k] = std::move(part);
  }
  return out;
}

namespace {

Decomposed split_remainder(const SpaceDecomposition& dec, const Vec& w0,
                           const Vec& remainder) {
  Decomposed out;
  out.coarse_part = w0;
  out.parts.resize(dec.num_subdomains);
  for (int k = 0; k < dec.num_subdomains; ++k) {
    const auto& dofs = dec.subdomain_dofs[k];
    Vec part(dofs.size());
    for (size_t i = 0; i < dofs.size(); ++i)
      part[i] = dec.theta[k][i] * remainder[dofs[i]];
    out.parts[k] = std::move(part);
  }
  return out;
}

} // namespace

Decomposed stable_decompose_two_level_l2(const MeshHierarchy& mesh,
                                         const SpaceDecomposition& dec,
                                         const FemFunction& w) {
  if (!dec.two_level)
    throw std::invalid_argument("decomposition has no coarse level");
  const SpMat& P = dec.coarse_prolongation;
  const SpMat Mf = assemble_mass(mesh.fine);
  const SpMat coarse_mass = SpMat(P.transpose()) * Mf * P;
  Eigen::SimplicialLDLT<SpMat> solver(coarse_mass);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("coarse mass factorization failed");
  const Vec rhs = P.transpose() * (Mf * w.coeffs);
  const Vec w0 = solver.solve(rhs);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("coarse mass solve failed");
  const Vec remainder = w.coeffs - P * w0;
  return split_remainder(dec, w0, remainder);
}

Vec monotone_coarse_min(const MeshHierarchy& mesh, const Vec& fine_interior) {
  const Grid& fg = mesh.fine;
  const Grid& cg = mesh.coarse;
  const int r = mesh.refinement;
  const Vec full = embed_full(fg, fine_interior);
  Vec out(cg.num_interior());

  for (int cd = 0; cd < cg.num_interior(); ++cd) {
    const auto IJ = cg.node_ij(cg.interior_nodes[cd]);
    const int I = IJ[0], J = IJ[1];
    double m = std::numeric_limits<double>::infinity();
    if (mesh.dim == 1) {
      const int lo = std::max(1, (I - 1) * r);
      const int hi = std::min(fg.cells - 1, (I + 1) * r);
      for (int i = lo; i <= hi; ++i) m = std::min(m, full[i]);
    } else {
      // fine nodes inside the coarse triangles having (I,J) as a vertex
      const int lo_i = std::max(0, (I - 1) * r), hi_i = std::min(fg.cells, (I + 1) * r);
      const int lo_j = std::max(0, (J - 1) * r), hi_j = std::min(fg.cells, (J + 1) * r);
      for (int j = lo_j; j <= hi_j; ++j)
        for (int i = lo_i; i <= hi_i; ++i) {
          const int node = fg.node_id(i, j);
          if (fg.is_boundary[node]) continue;
          // offsets from the coarse node, in fine units
          const int di = i - I * r, dj = j - J * r;
          bool in_patch;
          if (di >= 0 && dj >= 0)
            in_patch = true; // cell (I,J): both triangles touch (I,J)
          else if (di <= 0 && dj <= 0)
            in_patch = true; // cell (I-1,J-1): both triangles
          else if (di > 0)
            in_patch = (dj >= di - r); // upper triangle of cell (I,J-1)
          else
            in_patch = (di >= dj - r); // lower triangle of cell (I-1,J)
          if (in_patch) m = std::min(m, full[node]);
        }
    }
    out[cd] = m;
  }
  return out;
}

Decomposed stable_decompose_two_level_nonsmooth(const MeshHierarchy& mesh,
                                                const SpaceDecomposition& dec,
                                                const FemFunction& w) {
  if (!dec.two_level)
    throw std::invalid_argument("decomposition has no coarse level");
  const Vec pos = w.coeffs.cwiseMax(0.0);
  const Vec neg = (-w.coeffs).cwiseMax(0.0);
  const Vec w0 = monotone_coarse_min(mesh, pos) - monotone_coarse_min(mesh, neg);
  const Vec remainder = w.coeffs - dec.coarse_prolongation * w0;
  return split_remainder(dec, w0, remainder);
}

FemFunction reconstruct(const MeshHierarchy& mesh,
                        const SpaceDecomposition& dec, const Decomposed& d) {
  Vec acc = Vec::Zero(mesh.fine.num_interior());
  for (int k = 0; k < dec.num_subdomains; ++k) {
    const auto& dofs = dec.subdomain_dofs[k];
    for (size_t i = 0; i < dofs.size(); ++i) acc[dofs[i]] += d.parts[k][i];
  }
  if (d.coarse_part) acc += dec.coarse_prolongation * (*d.coarse_part);
  return FemFunction{Level::fine, acc};
}

} // namespace asmopt
