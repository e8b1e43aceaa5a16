#pragma once

#include <array>
#include <optional>
#include <vector>

#include "asmopt/mesh.hpp"
#include "asmopt/types.hpp"

namespace asmopt {

/// Overlapping decomposition of the fine space into subdomain spaces, plus an
/// optional coarse level.
///
/// Subdomains are rectangular unions of coarse cells extended by
/// `overlap_layers` fine-element layers, so delta = overlap_layers * h
/// exactly. The partition of unity is a nodal ramp over the overlap layers
/// normalized to sum to one at every interior fine node.
struct SpaceDecomposition {
  int num_subdomains = 0; // N, excluding the coarse level
  bool two_level = false;
  int overlap_layers = 0; // l
  double delta = 0.0;     // l * h
  int num_colors = 0;     // N_c
  int fine_dofs = 0;      // interior node count of the fine level

  std::vector<std::vector<int>> subdomain_dofs; // fine interior dof ids
  std::vector<Vec> theta;                       // per k: weights at subdomain_dofs[k]
  std::vector<int> color;                       // per subdomain

  // core/extended fine-cell ranges per subdomain: {x0, x1, y0, y1}, half-open
  std::vector<std::array<int, 4>> core_cells;
  std::vector<std::array<int, 4>> extended_cells;

  SpMat coarse_prolongation; // fine interior x coarse interior, if two_level

  /// theta_k over all fine interior dofs (zero outside the subdomain).
  Vec theta_full(int k) const;
};

/// Builds an overlapping decomposition over the fine mesh.
///
/// `subdomains_per_axis` holds one entry in 1D and two in 2D; each axis is
/// split into that many contiguous blocks of coarse cells. Throws
/// std::invalid_argument when the layout is invalid or when the overlap is
/// too large for same-color subdomains to stay disjoint (the error names the
/// violating pair).
SpaceDecomposition build_decomposition(const MeshHierarchy& mesh,
                                       const std::vector<int>& subdomains_per_axis,
                                       int overlap_layers, bool two_level);

/// Step-size bound: 1/N_c for one-level, 1/(N_c + 1) for two-level.
double tau0(const SpaceDecomposition& dec);

/// Node-selection restriction onto subdomain k.
Vec restrict_to(const SpaceDecomposition& dec, int k, const FemFunction& u);

/// Extension by zero of a local vector into the fine space.
FemFunction prolong_from(const SpaceDecomposition& dec, int k, const Vec& wk);

/// One local vector per subdomain, plus the coarse part when two-level.
struct Decomposed {
  std::vector<Vec> parts;
  std::optional<Vec> coarse_part;
};

/// w_k holds theta_k * w at the subdomain nodes; sums back to w exactly.
Decomposed stable_decompose_one_level(const MeshHierarchy& mesh,
                                      const SpaceDecomposition& dec,
                                      const FemFunction& w);

/// Coarse part is the L2 projection of w onto the coarse space; the
/// remainder is split with the partition of unity.
Decomposed stable_decompose_two_level_l2(const MeshHierarchy& mesh,
                                         const SpaceDecomposition& dec,
                                         const FemFunction& w);

/// Coarse part built from monotone patch minima of the positive and negative
/// parts of w, suitable for pointwise-constrained and pointwise nonsmooth
/// energies; the remainder is split with the partition of unity.
Decomposed stable_decompose_two_level_nonsmooth(const MeshHierarchy& mesh,
                                                const SpaceDecomposition& dec,
                                                const FemFunction& w);

/// Sum of all parts (and the prolonged coarse part) as a fine function.
FemFunction reconstruct(const MeshHierarchy& mesh,
                        const SpaceDecomposition& dec, const Decomposed& d);

/// Monotone coarse interpolation: at each interior coarse node, the minimum
/// of v over the interior fine nodes of the coarse elements touching it.
/// Expects nodal v >= 0 (full fine interior coefficients); the result
/// satisfies 0 <= prolong(result) <= v at every interior fine node.
Vec monotone_coarse_min(const MeshHierarchy& mesh, const Vec& fine_interior);

} // namespace asmopt
