#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "asmopt/decomposition.hpp"
#include "asmopt/objectives.hpp"
#include "asmopt/types.hpp"

namespace asmopt {

/// Thrown when an iteration violates a solver invariant (energy increase,
/// local cap exceeded, infeasible update).
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LocalSolverKind { exact, bcd_surrogate, constraint_decomposition };

struct AsmConfig {
  double tau = 0.0;   // damping step, in (0, tau0]
  double omega = 1.0; // local weight, >= omega0 of the local solver
  LocalSolverKind local_solver = LocalSolverKind::exact;
  double eps_local = 1e-10; // local optimality / fixed-point residual
  int local_cap = 500;      // local iteration cap
  int budget = 100;         // outer iterations
  std::optional<double> reference_energy;   // enables energy errors
  std::optional<double> stop_energy_error;  // stop once error <= threshold
  bool record_iterates = false;             // keep all iterates in the trace
  // Skip the tau <= tau0 validation and the monotonicity guard, for
  // demonstrating what happens beyond the admissible step range.
  bool unsafe_step = false;
};

struct IterationRecord {
  int iter = 0;
  double energy = 0.0;
  double energy_error = 0.0; // NaN when no reference is set
  int local_iters_max = 0;
  double wall_ms = 0.0;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  Vec final_iterate;
  std::vector<Vec> iterates; // filled when AsmConfig::record_iterates

  std::vector<double> energy_errors() const;
  std::vector<double> energies() const;
};

struct LocalSolveResult {
  Vec w;
  int iterations = 0;
};

/// One part of an additive Schwarz splitting: the local problem solver for
/// the general model
///   min_w  F(v) + <F'(v), R_k^* w> + omega d_k(w, v) + G_k(w, v)
/// together with the prolongation R_k^* and the surrogate evaluators d_k,
/// G_k used by the analysis layer.
class LocalSurrogate {
 public:
  virtual ~LocalSurrogate() = default;
  virtual int num_parts() const = 0;
  virtual double omega0() const = 0;
  /// Largest admissible damping step for this splitting.
  virtual double step_bound() const = 0;
  virtual LocalSolveResult solve(int k, const Vec& v, const Vec& grad,
                                 const AsmConfig& cfg) const = 0;
  virtual void add_prolonged(int k, const Vec& w, Vec& accum) const = 0;
  virtual double d_k(int k, const Vec& w, const Vec& v) const = 0;
  virtual double G_k(int k, const Vec& w, const Vec& v) const = 0;
};

/// Exact local solvers: d_k(w,v) = D_F(v + R_k^* w, v), G_k(w,v) =
/// G(v + R_k^* w), omega0 = 1; the local problem is min_w E(v + R_k^* w).
/// When the decomposition is two-level the coarse space is part N.
std::unique_ptr<LocalSurrogate> make_exact_surrogate(
    const Objective& objective, const SpaceDecomposition& dec);

/// Block coordinate descent surrogate on a block-separable objective:
/// d_k = 1/2 ||w||^2, omega0 = L, step bound 1/N.
std::unique_ptr<LocalSurrogate> make_bcd_surrogate(const Objective& objective);

/// Constraint decomposition for one-obstacle problems: exact Bregman
/// distance with the decomposed constraint u_k >= (I_h(theta_k g))|_k,
/// step bound 1/N.
std::unique_ptr<LocalSurrogate> make_constraint_surrogate(
    const Objective& objective, const SpaceDecomposition& dec);

/// One additive Schwarz update u + tau * sum_k R_k^* w_k with the local
/// problems solved to cfg.eps_local.
Vec asm_step(const Objective& objective, const LocalSurrogate& surrogate,
             const AsmConfig& cfg, const Vec& u,
             int* max_local_iters = nullptr);

/// Convenience overload building the surrogate from cfg.local_solver.
Vec asm_step(const Objective& objective, const SpaceDecomposition& dec,
             const AsmConfig& cfg, const Vec& u);

IterationTrace asm_solve(const Objective& objective,
                         const LocalSurrogate& surrogate, const AsmConfig& cfg,
                         Vec u0);

IterationTrace asm_solve(const Objective& objective,
                         const SpaceDecomposition& dec, const AsmConfig& cfg,
                         Vec u0);

/// Solves the subdomain problem min_w E(v + R_k^* w) for one part.
Vec solve_local(const Objective& objective, const SpaceDecomposition& dec,
                int k, const Vec& v, const AsmConfig& cfg);

/// Parallel block coordinate descent on a block-separable objective;
/// produces the same iterates as asm_solve with the bcd surrogate.
IterationTrace bcd_solve(const Objective& objective, const AsmConfig& cfg,
                         Vec u0);

/// Constraint decomposition for the one-obstacle problem; every iterate is
/// kept nodally feasible.
IterationTrace constraint_decomposition_solve(const Objective& objective,
                                              const SpaceDecomposition& dec,
                                              const AsmConfig& cfg, Vec u0);

/// Abstract gradient method: u^{n+1} = argmin_u F(u^n) + <F'(u^n), u - u^n>
/// + B(u, u^n), with the argmin supplied by the surrogate.
struct GradientSurrogate {
  std::function<Vec(const Vec& v, const Vec& grad)> argmin;
};

IterationTrace gradient_method(const Objective& objective,
                               const GradientSurrogate& surrogate, Vec u0,
                               const AsmConfig& cfg);

/// B(u,v) = 1/(2 tau) ||u - v||^2 + G(u): the forward-backward step
/// prox_{tau G}(v - tau F'(v)).
GradientSurrogate forward_backward_surrogate(const Objective& objective,
                                             double tau);

/// Componentwise soft threshold: sign(z) * max(0, |z| - w).
Vec soft_threshold(const Vec& z, const Vec& weights);

} // namespace asmopt
