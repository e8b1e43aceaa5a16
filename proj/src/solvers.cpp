#include "asmopt/solvers.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace asmopt {

namespace {

using Clock = std::chrono::steady_clock;

double soft_threshold_scalar(double z, double w) {
  if (z > w) return z - w;
  if (z < -w) return z + w;
  return 0.0;
}

Vec gather(const Vec& global, const std::vector<int>& dofs) {
  Vec out(dofs.size());
  for (size_t i = 0; i < dofs.size(); ++i) out[i] = global[dofs[i]];
  return out;
}

void scatter_add(const Vec& local, const std::vector<int>& dofs, Vec& global) {
  for (size_t i = 0; i < dofs.size(); ++i) global[dofs[i]] += local[i];
}

SpMat sparse_submatrix(const SpMat& A, const std::vector<int>& dofs) {
  std::vector<int> local_of(A.rows(), -1);
  for (size_t i = 0; i < dofs.size(); ++i) local_of[dofs[i]] = static_cast<int>(i);
  std::vector<Triplet> trip;
  for (size_t j = 0; j < dofs.size(); ++j)
    for (SpMat::InnerIterator it(A, dofs[j]); it; ++it) {
      const int li = local_of[it.row()];
      if (li >= 0) trip.emplace_back(li, static_cast<int>(j), it.value());
    }
  SpMat out(dofs.size(), dofs.size());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// Cyclic coordinate descent for 1/2 z'Az + c'z + sum_i s_i |z_i| subject to
// optional lower bounds; stops when the largest coordinate move in a sweep
// is at most eps (the fixed-point residual of the proximal iteration).
LocalSolveResult coordinate_descent(const SpMat& A, const Vec& diag,
                                    const Vec& c, const Vec* abs_weights,
                                    const Vec* lower, Vec z, double eps,
                                    int cap, const char* what) {
  Vec rho = A * z + c;
  const int n = static_cast<int>(z.size());
  for (int sweep = 1; sweep <= cap; ++sweep) {
    double max_move = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = diag[i];
      const double c_eff = rho[i] - a * z[i];
      double zi = abs_weights
                      ? soft_threshold_scalar(-c_eff, (*abs_weights)[i]) / a
                      : -c_eff / a;
      if (lower) zi = std::max(zi, (*lower)[i]);
      const double move = zi - z[i];
      if (move != 0.0) {
        for (SpMat::InnerIterator it(A, i); it; ++it)
          rho[it.row()] += it.value() * move;
        z[i] = zi;
        max_move = std::max(max_move, std::abs(move));
      }
    }
    if (max_move <= eps) return {std::move(z), sweep};
  }
  throw SolverError(std::string(what) +
                    ": coordinate descent hit the local iteration cap");
}

// Damped Newton for a smooth local functional given by value/gradient/
// Hessian callbacks over the local coordinates.
template <typename ValueFn, typename GradFn, typename HessFn>
LocalSolveResult damped_newton(Eigen::Index local_dim, const ValueFn& value_fn,
                               const GradFn& grad_fn, const HessFn& hess_fn,
                               double eps, int cap, const char* what) {
  Vec w = Vec::Zero(local_dim);
  double value = value_fn(w);
  constexpr double t_min = 0x1p-60;
  for (int it = 0; it < cap; ++it) {
    const Vec g = grad_fn(w);
    if (g.norm() <= eps) return {std::move(w), it};
    SpMat H = hess_fn(w);
    // The Hessian degenerates where the solution gradient vanishes (and is
    // identically zero at u = 0 for s > 2); shifted factorizations keep the
    // direction a descent direction, the line search does the rest.
    const double scale =
        H.nonZeros() > 0
            ? Eigen::Map<const Eigen::ArrayXd>(H.valuePtr(), H.nonZeros())
                  .abs()
                  .maxCoeff()
            : 0.0;
    Eigen::SimplicialLLT<SpMat> llt;
    double shift = 0.0;
    for (int attempt = 0; attempt < 16; ++attempt) {
      llt.compute(H);
      if (llt.info() == Eigen::Success) break;
      shift = shift == 0.0 ? 1e-12 * (1.0 + scale) : shift * 100.0;
      SpMat I(H.rows(), H.cols());
      I.setIdentity();
      H = H + shift * I;
    }
    if (llt.info() != Eigen::Success)
      throw SolverError(std::string(what) + ": local Hessian factorization failed");
    const Vec step = llt.solve(-g);
    const double slope = g.dot(step);
    // once the predicted decrease falls below the value's fp resolution the
    // Armijo test is vacuous; take the plain Newton step
    const double fp_floor = 8.0 * std::numeric_limits<double>::epsilon() *
                            (1.0 + std::abs(value));
    if (-slope <= fp_floor) {
      w += step;
      value = value_fn(w);
      continue;
    }
    double t = 1.0;
    bool accepted = false;
    while (t > t_min) {
      const Vec w_try = w + t * step;
      const double value_try = value_fn(w_try);
      if (value_try <= value + 1e-4 * t * slope) {
        w = w_try;
        value = value_try;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted)
      throw SolverError(std::string(what) + ": local line search failed");
  }
  throw SolverError(std::string(what) + ": Newton hit the local iteration cap");
}

// ---------------------------------------------------------------------------
// Exact local solvers (optionally with a coarse part)

class ExactSurrogate final : public LocalSurrogate {
 public:
  ExactSurrogate(const Objective& objective, const SpaceDecomposition& dec)
      : obj_(objective),
        dofs_(dec.subdomain_dofs),
        two_level_(dec.two_level),
        step_bound_(tau0(dec)) {
    if (obj_.dim() != dec.fine_dofs)
      throw std::invalid_argument("objective and decomposition disagree");
    if (two_level_) {
      P_ = dec.coarse_prolongation;
      if (obj_.nonsmooth.kind != NonsmoothKind::none)
        throw std::invalid_argument(
            "two-level exact local solvers support smooth objectives only");
    }
    const bool quadratic = obj_.smooth->kind() == SmoothKind::quadratic;
    if (!quadratic && obj_.nonsmooth.kind != NonsmoothKind::none)
      throw std::invalid_argument(
          "exact local solvers for nonsmooth objectives require a quadratic "
          "smooth part");
    if (quadratic) {
      const auto& A =
          static_cast<const QuadraticSmooth&>(*obj_.smooth).matrix();
      local_matrices_.reserve(num_parts());
      for (const auto& d : dofs_) local_matrices_.push_back(sparse_submatrix(A, d));
      if (two_level_) local_matrices_.push_back(SpMat(P_.transpose()) * A * P_);
      for (const auto& m : local_matrices_)
        local_diag_.push_back(m.diagonal());
      if (obj_.nonsmooth.kind == NonsmoothKind::none) {
        for (const auto& m : local_matrices_) {
          auto llt = std::make_unique<Eigen::SimplicialLLT<SpMat>>(m);
          if (llt->info() != Eigen::Success)
            throw std::invalid_argument("local stiffness factorization failed");
          llt_.push_back(std::move(llt));
        }
      }
    }
  }

  int num_parts() const override {
    return static_cast<int>(dofs_.size()) + (two_level_ ? 1 : 0);
  }
  double omega0() const override { return 1.0; }
  double step_bound() const override { return step_bound_; }

  Vec prolong_vec(int k, const Vec& w) const {
    if (is_coarse(k)) return P_ * w;
    Vec out = Vec::Zero(obj_.dim());
    scatter_add(w, dofs_[k], out);
    return out;
  }

  // Local model: <F'(v), R_k^* w> + omega D_F(v + R_k^* w, v) + G(v + R_k^* w),
  // which for omega = 1 is exactly min_w E(v + R_k^* w).
  LocalSolveResult solve(int k, const Vec& v, const Vec& grad,
                         const AsmConfig& cfg) const override {
    const double omega = cfg.omega;
    if (obj_.smooth->kind() == SmoothKind::quadratic) {
      if (obj_.nonsmooth.kind == NonsmoothKind::none) {
        // omega A_kk w = -R_k F'(v)
        const Vec rhs = is_coarse(k) ? Vec(-(P_.transpose() * grad))
                                     : Vec(-gather(grad, dofs_[k]));
        return {Vec(llt_[k]->solve(rhs) / omega), 1};
      }
      // pointwise nonsmooth part: coordinate descent in z = v_k + w on
      // 1/2 z' (omega A_kk) z + (g_k - omega A_kk v_k)' z + sum s_i |z_i|
      const auto& d = dofs_[k];
      const SpMat Akk = omega * local_matrices_[k];
      const Vec diag = omega * local_diag_[k];
      const Vec vk = gather(v, d);
      const Vec c = gather(grad, d) - Akk * vk;
      const Vec* sw = nullptr;
      const Vec* lo = nullptr;
      Vec s_loc, lo_loc;
      if (obj_.nonsmooth.kind == NonsmoothKind::weighted_abs) {
        s_loc = gather(obj_.nonsmooth.weights, d);
        sw = &s_loc;
      } else {
        lo_loc = gather(obj_.nonsmooth.lower, d);
        lo = &lo_loc;
      }
      auto res = coordinate_descent(Akk, diag, c, sw, lo, vk, cfg.eps_local,
                                    cfg.local_cap, "exact local solve");
      res.w -= vk;
      return res;
    }
    // general smooth part, G = 0: damped Newton on the tilted functional
    // (1 - omega) <g, R_k^* w> + omega F(v + R_k^* w)
    const SmoothPart& F = *obj_.smooth;
    if (is_coarse(k)) {
      const Vec gc = P_.transpose() * grad;
      auto value_fn = [&](const Vec& w) {
        return omega * F.value(v + P_ * w) + (1.0 - omega) * gc.dot(w);
      };
      auto grad_fn = [&](const Vec& w) -> Vec {
        return omega * (P_.transpose() * F.gradient(v + P_ * w)) +
               (1.0 - omega) * gc;
      };
      auto hess_fn = [&](const Vec& w) -> SpMat {
        return omega *
               (SpMat(P_.transpose()) * F.hessian(v + P_ * w) * P_);
      };
      return damped_newton(P_.cols(), value_fn, grad_fn, hess_fn,
                           cfg.eps_local, cfg.local_cap, "coarse local solve");
    }
    const auto& d = dofs_[k];
    const Vec gk = gather(grad, d);
    auto embed = [&](const Vec& w) -> Vec {
      Vec z = v;
      for (size_t i = 0; i < d.size(); ++i) z[d[i]] += w[i];
      return z;
    };
    auto value_fn = [&](const Vec& w) {
      return omega * F.value(embed(w)) + (1.0 - omega) * gk.dot(w);
    };
    auto grad_fn = [&](const Vec& w) -> Vec {
      return omega * gather(F.gradient(embed(w)), d) + (1.0 - omega) * gk;
    };
    auto hess_fn = [&](const Vec& w) -> SpMat {
      return omega * sparse_submatrix(F.hessian(embed(w)), d);
    };
    return damped_newton(static_cast<Eigen::Index>(d.size()), value_fn,
                         grad_fn, hess_fn, cfg.eps_local, cfg.local_cap,
                         "exact local solve");
  }

  void add_prolonged(int k, const Vec& w, Vec& accum) const override {
    if (is_coarse(k))
      accum += P_ * w;
    else
      scatter_add(w, dofs_[k], accum);
  }

  double d_k(int k, const Vec& w, const Vec& v) const override {
    return bregman(*obj_.smooth, v + prolong_vec(k, w), v);
  }

  double G_k(int k, const Vec& w, const Vec& v) const override {
    return obj_.nonsmooth.value(v + prolong_vec(k, w));
  }

 private:
  bool is_coarse(int k) const {
    return two_level_ && k == static_cast<int>(dofs_.size());
  }

  Objective obj_;
  std::vector<std::vector<int>> dofs_;
  bool two_level_;
  double step_bound_;
  SpMat P_;
  std::vector<SpMat> local_matrices_;
  std::vector<Vec> local_diag_;
  std::vector<std::unique_ptr<Eigen::SimplicialLLT<SpMat>>> llt_;
};

// ---------------------------------------------------------------------------
// Block coordinate descent surrogate

class BcdSurrogate final : public LocalSurrogate {
 public:
  explicit BcdSurrogate(const Objective& objective) : obj_(objective) {
    if (obj_.meta.block_sizes.empty())
      throw std::invalid_argument("objective carries no block structure");
    if (!obj_.meta.lipschitz)
      throw std::invalid_argument("block objective must expose L");
    if (obj_.nonsmooth.kind == NonsmoothKind::lower_obstacle)
      throw std::invalid_argument("bcd surrogate expects separable l1 parts");
    int offset = 0;
    for (int m : obj_.meta.block_sizes) {
      std::vector<int> d(m);
      std::iota(d.begin(), d.end(), offset);
      dofs_.push_back(std::move(d));
      offset += m;
    }
    if (offset != obj_.dim())
      throw std::invalid_argument("block sizes do not cover the space");
  }

  int num_parts() const override { return static_cast<int>(dofs_.size()); }
  double omega0() const override { return *obj_.meta.lipschitz; }
  double step_bound() const override { return 1.0 / num_parts(); }

  LocalSolveResult solve(int k, const Vec& v, const Vec& grad,
                         const AsmConfig& cfg) const override {
    const auto& d = dofs_[k];
    Vec w(d.size());
    for (size_t i = 0; i < d.size(); ++i) {
      const int gi = d[i];
      const double s = obj_.nonsmooth.kind == NonsmoothKind::weighted_abs
                           ? obj_.nonsmooth.weights[gi]
                           : 0.0;
      const double z = soft_threshold_scalar(v[gi] - grad[gi] / cfg.omega,
                                             s / cfg.omega);
      w[i] = z - v[gi];
    }
    return {std::move(w), 1};
  }

  void add_prolonged(int k, const Vec& w, Vec& accum) const override {
    scatter_add(w, dofs_[k], accum);
  }

  double d_k(int, const Vec& w, const Vec&) const override {
    return 0.5 * w.squaredNorm();
  }

  double G_k(int k, const Vec& w, const Vec& v) const override {
    if (obj_.nonsmooth.kind == NonsmoothKind::none) return 0.0;
    Vec u = v;
    for (size_t i = 0; i < dofs_[k].size(); ++i) u[dofs_[k][i]] += w[i];
    return obj_.nonsmooth.value(u);
  }

 private:
  Objective obj_;
  std::vector<std::vector<int>> dofs_;
};

// ---------------------------------------------------------------------------
// Constraint decomposition surrogate

class ConstraintSurrogate final : public LocalSurrogate {
 public:
  ConstraintSurrogate(const Objective& objective,
                      const SpaceDecomposition& dec)
      : obj_(objective), dofs_(dec.subdomain_dofs) {
    if (obj_.nonsmooth.kind != NonsmoothKind::lower_obstacle)
      throw std::invalid_argument(
          "constraint decomposition expects a one-obstacle objective");
    if (obj_.smooth->kind() != SmoothKind::quadratic)
      throw std::invalid_argument(
          "constraint decomposition expects a quadratic smooth part");
    if (obj_.dim() != dec.fine_dofs)
      throw std::invalid_argument("objective and decomposition disagree");
    if (dec.two_level)
      throw std::invalid_argument(
          "constraint decomposition is implemented one-level");
    const auto& A = static_cast<const QuadraticSmooth&>(*obj_.smooth).matrix();
    for (int k = 0; k < dec.num_subdomains; ++k) {
      local_matrices_.push_back(sparse_submatrix(A, dofs_[k]));
      local_diag_.push_back(local_matrices_.back().diagonal());
      theta_.push_back(dec.theta[k]);
      lower_.push_back(gather(obj_.nonsmooth.lower, dofs_[k]));
    }
  }

  int num_parts() const override { return static_cast<int>(dofs_.size()); }
  double omega0() const override { return 1.0; }
  double step_bound() const override { return 1.0 / num_parts(); }

  LocalSolveResult solve(int k, const Vec& v, const Vec& grad,
                         const AsmConfig& cfg) const override {
    const auto& d = dofs_[k];
    const SpMat Akk = cfg.omega * local_matrices_[k];
    const Vec diag = cfg.omega * local_diag_[k];
    const Vec vk = gather(v, d);
    const Vec c = gather(grad, d) - Akk * vk;
    // decomposed constraint u_k >= I_h(theta g): in z = v_k + w this reads
    // z >= v + theta (g - v), which keeps z = v feasible whenever v >= g
    Vec lo(d.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      lo[i] = vk[i] + theta_[k][i] * (lower_[k][i] - vk[i]);
    auto res = coordinate_descent(Akk, diag, c, nullptr, &lo, vk,
                                  cfg.eps_local, cfg.local_cap,
                                  "constraint decomposition");
    res.w -= vk;
    return res;
  }

  void add_prolonged(int k, const Vec& w, Vec& accum) const override {
    scatter_add(w, dofs_[k], accum);
  }

  double d_k(int k, const Vec& w, const Vec& v) const override {
    Vec z = v;
    for (size_t i = 0; i < dofs_[k].size(); ++i) z[dofs_[k][i]] += w[i];
    return bregman(*obj_.smooth, z, v);
  }

  double G_k(int k, const Vec& w, const Vec& v) const override {
    for (size_t i = 0; i < dofs_[k].size(); ++i) {
      const int gi = dofs_[k][i];
      const double uk = theta_[k][i] * v[gi] + w[i];
      if (uk < theta_[k][i] * obj_.nonsmooth.lower[gi])
        return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

 private:
  Objective obj_;
  std::vector<std::vector<int>> dofs_;
  std::vector<SpMat> local_matrices_;
  std::vector<Vec> local_diag_;
  std::vector<Vec> theta_;
  std::vector<Vec> lower_;
};

void validate_config(const AsmConfig& cfg, const LocalSurrogate& surrogate) {
  if (!(cfg.tau > 0.0) ||
      (!cfg.unsafe_step && cfg.tau > surrogate.step_bound() + 1e-12))
    throw std::invalid_argument(
        "step tau must lie in (0, tau0]; tau0 = " +
        std::to_string(surrogate.step_bound()) + " for this splitting");
  if (cfg.omega < surrogate.omega0() * (1.0 - 1e-12))
    throw std::invalid_argument("omega must be >= omega0 = " +
                                std::to_string(surrogate.omega0()));
  if (cfg.budget < 0) throw std::invalid_argument("budget must be >= 0");
  if (!(cfg.eps_local > 0.0))
    throw std::invalid_argument("local tolerance must be positive");
}

// Rounding noise can push a combined iterate a few ulps below the obstacle
// even though the exact-arithmetic update is feasible by convexity; project
// such nodes back and treat anything larger as a genuine failure.
void enforce_feasible(Vec& u, const Vec& lower, const Vec& prev) {
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u[i] < lower[i]) {
      const double slack =
          64.0 * std::numeric_limits<double>::epsilon() *
          (std::abs(lower[i]) + std::abs(prev[i]) + 1.0);
      if (u[i] >= lower[i] - slack)
        u[i] = lower[i];
      else
        throw SolverError("infeasible update at node " + std::to_string(i));
    }
  }
}

using StepFn = std::function<Vec(const Vec& u, int& max_local_iters)>;

IterationTrace run_iterations(const Objective& objective, const AsmConfig& cfg,
                              Vec u0, const StepFn& step) {
  double energy = objective.energy(u0);
  if (!std::isfinite(energy))
    throw std::invalid_argument("initial iterate is not in dom G");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto error_of = [&](double e) {
    return cfg.reference_energy ? e - *cfg.reference_energy : nan;
  };

  IterationTrace trace;
  trace.records.push_back({0, energy, error_of(energy), 0, 0.0});
  Vec u = std::move(u0);
  if (cfg.record_iterates) trace.iterates.push_back(u);
  for (int n = 1; n <= cfg.budget; ++n) {
    const auto t0 = Clock::now();
    int max_local = 0;
    u = step(u, max_local);
    const double next = objective.energy(u);
    if (!cfg.unsafe_step && next > energy + 1e-12 * (1.0 + std::abs(energy)))
      throw SolverError("energy increased at iteration " + std::to_string(n));
    energy = next;
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    trace.records.push_back({n, energy, error_of(energy), max_local, ms});
    if (cfg.record_iterates) trace.iterates.push_back(u);
    if (cfg.stop_energy_error && cfg.reference_energy &&
        energy - *cfg.reference_energy <= *cfg.stop_energy_error)
      break;
  }
  trace.final_iterate = std::move(u);
  return trace;
}

} // namespace

std::vector<double> IterationTrace::energy_errors() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.energy_error);
  return out;
}

std::vector<double> IterationTrace::energies() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.energy);
  return out;
}

std::unique_ptr<LocalSurrogate> make_exact_surrogate(
    const Objective& objective, const SpaceDecomposition& dec) {
  return std::make_unique<ExactSurrogate>(objective, dec);
}

std::unique_ptr<LocalSurrogate> make_bcd_surrogate(const Objective& objective) {
  return std::make_unique<BcdSurrogate>(objective);
}

std::unique_ptr<LocalSurrogate> make_constraint_surrogate(
    const Objective& objective, const SpaceDecomposition& dec) {
  return std::make_unique<ConstraintSurrogate>(objective, dec);
}

Vec asm_step(const Objective& objective, const LocalSurrogate& surrogate,
             const AsmConfig& cfg, const Vec& u, int* max_local_iters) {
  const Vec grad = objective.smooth->gradient(u);
  Vec accum = Vec::Zero(u.size());
  int max_local = 0;
  for (int k = 0; k < surrogate.num_parts(); ++k) {
    LocalSolveResult res = surrogate.solve(k, u, grad, cfg);
    max_local = std::max(max_local, res.iterations);
    surrogate.add_prolonged(k, res.w, accum);
  }
  Vec next = u + cfg.tau * accum;
  if (objective.nonsmooth.kind == NonsmoothKind::lower_obstacle)
    enforce_feasible(next, objective.nonsmooth.lower, u);
  if (max_local_iters) *max_local_iters = max_local;
  return next;
}

namespace {

std::unique_ptr<LocalSurrogate> surrogate_for(const Objective& objective,
                                              const SpaceDecomposition& dec,
                                              const AsmConfig& cfg) {
  switch (cfg.local_solver) {
    case LocalSolverKind::exact:
      return make_exact_surrogate(objective, dec);
    case LocalSolverKind::bcd_surrogate:
      return make_bcd_surrogate(objective);
    case LocalSolverKind::constraint_decomposition:
      return make_constraint_surrogate(objective, dec);
  }
  throw std::invalid_argument("unknown local solver kind");
}

} // namespace

Vec asm_step(const Objective& objective, const SpaceDecomposition& dec,
             const AsmConfig& cfg, const Vec& u) {
  const auto surrogate = surrogate_for(objective, dec, cfg);
  validate_config(cfg, *surrogate);
  return asm_step(objective, *surrogate, cfg, u, nullptr);
}

IterationTrace asm_solve(const Objective& objective,
                         const LocalSurrogate& surrogate, const AsmConfig& cfg,
                         Vec u0) {
  validate_config(cfg, surrogate);
  return run_iterations(objective, cfg, std::move(u0),
                        [&](const Vec& u, int& max_local) {
                          return asm_step(objective, surrogate, cfg, u,
                                          &max_local);
                        });
}

IterationTrace asm_solve(const Objective& objective,
                         const SpaceDecomposition& dec, const AsmConfig& cfg,
                         Vec u0) {
  const auto surrogate = surrogate_for(objective, dec, cfg);
  return asm_solve(objective, *surrogate, cfg, std::move(u0));
}

Vec solve_local(const Objective& objective, const SpaceDecomposition& dec,
                int k, const Vec& v, const AsmConfig& cfg) {
  const ExactSurrogate surrogate(objective, dec);
  if (k < 0 || k >= surrogate.num_parts())
    throw std::out_of_range("subdomain index out of range");
  if (!objective.nonsmooth.feasible(v))
    throw std::invalid_argument("iterate is not in dom G");
  const Vec grad = objective.smooth->gradient(v);
  return surrogate.solve(k, v, grad, cfg).w;
}

IterationTrace bcd_solve(const Objective& objective, const AsmConfig& cfg,
                         Vec u0) {
  const BcdSurrogate surrogate(objective);
  validate_config(cfg, surrogate);
  // Alg.: v_k = argmin <F'(u), u_k - u_k^n> + omega/2 ||u_k - u_k^n||^2
  //       + G^k(u_k), then u^{n+1} = (1 - tau) u^n + tau v
  return run_iterations(
      objective, cfg, std::move(u0), [&](const Vec& u, int& max_local) {
        max_local = 1;
        const Vec grad = objective.smooth->gradient(u);
        Vec v(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) {
          const double s =
              objective.nonsmooth.kind == NonsmoothKind::weighted_abs
                  ? objective.nonsmooth.weights[i]
                  : 0.0;
          v[i] = soft_threshold_scalar(u[i] - grad[i] / cfg.omega,
                                       s / cfg.omega);
        }
        return Vec((1.0 - cfg.tau) * u + cfg.tau * v);
      });
}

IterationTrace constraint_decomposition_solve(const Objective& objective,
                                              const SpaceDecomposition& dec,
                                              const AsmConfig& cfg, Vec u0) {
  const ConstraintSurrogate surrogate(objective, dec);
  validate_config(cfg, surrogate);
  if (!objective.nonsmooth.feasible(u0))
    throw std::invalid_argument("initial iterate violates the obstacle");
  return run_iterations(
      objective, cfg, std::move(u0), [&](const Vec& u, int& max_local) {
        Vec next = asm_step(objective, surrogate, cfg, u, &max_local);
        if (!objective.nonsmooth.feasible(next))
          throw SolverError("constraint decomposition produced an infeasible iterate");
        return next;
      });
}

IterationTrace gradient_method(const Objective& objective,
                               const GradientSurrogate& surrogate, Vec u0,
                               const AsmConfig& cfg) {
  if (!surrogate.argmin) throw std::invalid_argument("empty surrogate");
  return run_iterations(objective, cfg, std::move(u0),
                        [&](const Vec& u, int& max_local) {
                          max_local = 1;
                          return surrogate.argmin(
                              u, objective.smooth->gradient(u));
                        });
}

GradientSurrogate forward_backward_surrogate(const Objective& objective,
                                             double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  const NonsmoothPart G = objective.nonsmooth;
  GradientSurrogate out;
  out.argmin = [G, tau](const Vec& v, const Vec& grad) -> Vec {
    const Vec z = v - tau * grad;
    switch (G.kind) {
      case NonsmoothKind::none:
        return z;
      case NonsmoothKind::weighted_abs:
        return soft_threshold(z, Vec(tau * G.weights));
      case NonsmoothKind::lower_obstacle:
        return z.cwiseMax(G.lower);
    }
    return z;
  };
  return out;
}

Vec soft_threshold(const Vec& z, const Vec& weights) {
  Vec out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    out[i] = soft_threshold_scalar(z[i], weights[i]);
  return out;
}

} // namespace asmopt
