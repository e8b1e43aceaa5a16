#include "asmopt/analysis.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>

namespace asmopt {

double kappa_asm(double omega, double c0, double q, double tau) {
  if (!(omega > 0.0) || !(c0 > 0.0))
    throw std::invalid_argument("omega and C0 must be positive");
  if (!(q > 1.0)) throw std::invalid_argument("q must exceed 1");
  if (!(tau > 0.0) || tau > 1.0)
    throw std::invalid_argument("tau must lie in (0, 1]");
  return omega * std::pow(c0, q) / std::pow(tau, q - 1.0);
}

double constant_Cq(double q, double theta) {
  if (!(q > 1.0)) throw std::invalid_argument("q must exceed 1");
  if (!(theta > 0.0) || theta > 1.0)
    throw std::invalid_argument("theta must lie in (0, 1]");
  const double inner = q * (std::pow(2.0, q - 1.0) - 1.0) / (q - 1.0);
  return std::pow(std::max(theta, inner), q - 1.0);
}

double constant_Cpq(double p, double q, double theta) {
  if (!(q > 1.0)) throw std::invalid_argument("q must exceed 1");
  if (!(p > q)) throw std::invalid_argument("requires p > q");
  if (!(theta > 0.0) || theta > 1.0)
    throw std::invalid_argument("theta must lie in (0, 1]");
  const double beta = p * (q - 1.0) / (p - q);
  const double inner = q * (std::pow(2.0, beta) - 1.0) / (q - 1.0);
  return std::pow(p, q / (p - q)) * std::pow(std::max(theta, inner), beta);
}

double lemma_recurrence_bound(double a0, double C, double gamma, int n) {
  if (!(a0 > 0.0)) throw std::invalid_argument("a0 must be positive");
  if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
  if (!(gamma > 1.0)) throw std::invalid_argument("gamma must exceed 1");
  if (n < 0) throw std::invalid_argument("n must be nonnegative");
  const double beta = 1.0 / (gamma - 1.0);
  const double cap = std::pow((std::pow(2.0, beta) - 1.0) / C, beta);
  return std::max(a0, cap) / std::pow(n + 1.0, beta);
}

QMinResult lemma_qmin(double a, double b, double q, double theta) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("a and b must be positive");
  if (!(q > 1.0)) throw std::invalid_argument("q must exceed 1");
  if (!(theta > 0.0) || theta > 1.0)
    throw std::invalid_argument("theta must lie in (0, 1]");
  if (a * std::pow(theta, q - 1.0) - b <= 0.0) {
    return {theta, a / q * std::pow(theta, q) - b * theta};
  }
  const double t = std::pow(b / a, 1.0 / (q - 1.0));
  return {t, -b * t * (1.0 - 1.0 / q)};
}

namespace {

// Sample directions for the empirical constants: alternately white nodal
// noise and stiffness-smoothed noise, the latter biasing toward the smooth
// functions that saturate decomposition constants.
class DirectionSampler {
 public:
  DirectionSampler(const Objective& objective, std::uint64_t seed)
      : rng_(seed), normal_(0.0, 1.0), dim_(objective.dim()) {
    if (objective.mesh) {
      const SpMat A = assemble_stiffness(objective.mesh->fine);
      smoother_ = std::make_unique<Eigen::SimplicialLLT<SpMat>>(A);
      if (smoother_->info() != Eigen::Success)
        throw std::runtime_error("stiffness factorization failed");
    }
  }

  Vec draw(int index) {
    Vec d(dim_);
    for (int i = 0; i < dim_; ++i) d[i] = normal_(rng_);
    if (smoother_ && index % 2 == 1) d = smoother_->solve(d);
    return d;
  }

  double uniform() { return uniform_(rng_); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  int dim_;
  std::unique_ptr<Eigen::SimplicialLLT<SpMat>> smoother_;
};

Vec project_domain(const Objective& objective, Vec u) {
  if (objective.nonsmooth.kind == NonsmoothKind::lower_obstacle)
    return u.cwiseMax(objective.nonsmooth.lower);
  return u;
}

} // namespace

double estimate_C0(const Objective& objective, const SpaceDecomposition& dec,
                   const Vec& center, const C0Options& opts) {
  if (opts.samples <= 0)
    throw std::invalid_argument("sample count must be positive");
  if (!objective.mesh)
    throw std::invalid_argument("C0 estimation requires a mesh objective");
  if (opts.decomposer != DecomposerKind::one_level && !dec.two_level)
    throw std::invalid_argument("two-level decomposer on a one-level split");
  const MeshHierarchy& mesh = *objective.mesh;
  const double q = objective.meta.q;

  DirectionSampler sampler(objective, opts.seed);
  auto draw_point = [&](int index) {
    Vec d = sampler.draw(index);
    const double norm = error_norm(objective, d);
    const double scale =
        norm > 0.0 ? opts.radius * sampler.uniform() / norm : 0.0;
    return project_domain(objective, center + scale * d);
  };

  double best = 0.0;
  int used = 0;
  for (int s = 0; s < opts.samples; ++s) {
    const Vec u = draw_point(2 * s);
    const Vec v = draw_point(2 * s + 1);
    const Vec w = u - v;
    const double denom =
        opts.energy_norm
            ? std::sqrt(2.0 * bregman(*objective.smooth, v + w, v))
            : error_norm(objective, w);
    if (!(denom > 1e-14)) continue; // skip u == v

    const FemFunction wf{Level::fine, w};
    Decomposed parts;
    switch (opts.decomposer) {
      case DecomposerKind::one_level:
        parts = stable_decompose_one_level(mesh, dec, wf);
        break;
      case DecomposerKind::two_level_l2:
        parts = stable_decompose_two_level_l2(mesh, dec, wf);
        break;
      case DecomposerKind::two_level_nonsmooth:
        parts = stable_decompose_two_level_nonsmooth(mesh, dec, wf);
        break;
    }

    double sum_d = 0.0;
    for (int k = 0; k < dec.num_subdomains; ++k) {
      Vec part = Vec::Zero(dec.fine_dofs);
      const auto& dofs = dec.subdomain_dofs[k];
      for (size_t i = 0; i < dofs.size(); ++i) part[dofs[i]] = parts.parts[k][i];
      sum_d += bregman(*objective.smooth, v + part, v);
    }
    if (parts.coarse_part)
      sum_d += bregman(*objective.smooth,
                       v + dec.coarse_prolongation * (*parts.coarse_part), v);

    best = std::max(best, std::pow(q * sum_d / std::pow(denom, q), 1.0 / q));
    ++used;
  }
  if (used == 0) throw std::runtime_error("all C0 samples degenerate");
  return best;
}

SpectralCheck linear_spectral_check(const Objective& objective,
                                    const SpaceDecomposition& dec) {
  if (objective.smooth->kind() != SmoothKind::quadratic ||
      objective.nonsmooth.kind != NonsmoothKind::none)
    throw std::invalid_argument("spectral check expects a quadratic objective");
  if (!objective.mesh || objective.dim() != dec.fine_dofs)
    throw std::invalid_argument("objective and decomposition disagree");
  const auto& quad = static_cast<const QuadraticSmooth&>(*objective.smooth);
  const SpMat& A = quad.matrix();
  const int n = static_cast<int>(A.rows());

  // C = sum_k R_k^* A_kk^{-1} R_k (+ coarse term), applied to unit vectors
  Mat C = Mat::Zero(n, n);
  auto add_part = [&](const std::vector<int>& dofs, const SpMat& local) {
    Eigen::SimplicialLLT<SpMat> llt(local);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("local stiffness factorization failed");
    Mat dense = Mat(llt.solve(Mat(Mat::Identity(dofs.size(), dofs.size()))));
    for (size_t a = 0; a < dofs.size(); ++a)
      for (size_t b = 0; b < dofs.size(); ++b)
        C(dofs[a], dofs[b]) += dense(a, b);
  };
  for (int k = 0; k < dec.num_subdomains; ++k) {
    std::vector<int> loc(n, -1);
    const auto& dofs = dec.subdomain_dofs[k];
    for (size_t i = 0; i < dofs.size(); ++i) loc[dofs[i]] = static_cast<int>(i);
    std::vector<Triplet> trip;
    for (size_t j = 0; j < dofs.size(); ++j)
      for (SpMat::InnerIterator it(A, dofs[j]); it; ++it)
        if (loc[it.row()] >= 0)
          trip.emplace_back(loc[it.row()], static_cast<int>(j), it.value());
    SpMat Akk(dofs.size(), dofs.size());
    Akk.setFromTriplets(trip.begin(), trip.end());
    add_part(dofs, Akk);
  }
  if (dec.two_level) {
    const SpMat& P = dec.coarse_prolongation;
    const SpMat A00 = SpMat(P.transpose()) * A * P;
    Eigen::SimplicialLLT<SpMat> llt(A00);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("coarse stiffness factorization failed");
    const Mat Pd = Mat(P);
    C += Pd * llt.solve(Mat(Pd.transpose()));
  }

  const Mat Ad = Mat(A);
  const Mat T = C * Ad;

  // power iteration from a seeded random vector (no mode is missed), with
  // the A-norm eigenresidual as the stop; `form` is the A-selfadjoint
  // operator whose Rayleigh quotient is measured
  auto power_iterate = [&](const std::function<Vec(const Vec&)>& apply,
                           const Mat& form, int& used) {
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = normal(rng);
    x /= std::sqrt(x.dot(Ad * x));
    for (used = 1; used <= 50000; ++used) {
      Vec y = apply(x);
      y /= std::sqrt(y.dot(Ad * y));
      x = y;
      const double lambda = x.dot(Ad * (form * x)) / x.dot(Ad * x);
      const Vec r = form * x - lambda * x;
      if (std::sqrt(r.dot(Ad * r)) <= 1e-10 * std::abs(lambda)) return lambda;
    }
    throw std::runtime_error("eigenvalue iteration did not converge");
  };

  SpectralCheck out;
  int it_max = 0, it_min = 0;
  out.lambda_max = power_iterate([&](const Vec& x) { return Vec(T * x); }, T,
                                 it_max);
  const Eigen::PartialPivLU<Mat> lu(T);
  out.lambda_min =
      power_iterate([&](const Vec& x) { return Vec(lu.solve(x)); }, T, it_min);
  out.iterations = it_max + it_min;

  // The theory bound uses the stable-decomposition constant in the energy
  // norm. For the quadratic case the partition-of-unity decomposer is a
  // linear map, so its constant is the largest Rayleigh quotient of
  // S = sum_k L_k' A L_k against A and is computed exactly; it always
  // dominates the optimal constant 1/lambda_min.
  const MeshHierarchy& mesh = *objective.mesh;
  std::vector<Mat> part_maps(dec.num_subdomains + (dec.two_level ? 1 : 0),
                             Mat::Zero(n, n));
  for (int j = 0; j < n; ++j) {
    Vec e = Vec::Zero(n);
    e[j] = 1.0;
    const FemFunction ef{Level::fine, e};
    const Decomposed parts =
        dec.two_level ? stable_decompose_two_level_l2(mesh, dec, ef)
                      : stable_decompose_one_level(mesh, dec, ef);
    for (int k = 0; k < dec.num_subdomains; ++k)
      for (size_t i = 0; i < dec.subdomain_dofs[k].size(); ++i)
        part_maps[k](dec.subdomain_dofs[k][i], j) = parts.parts[k][i];
    if (dec.two_level)
      part_maps[dec.num_subdomains].col(j) =
          dec.coarse_prolongation * (*parts.coarse_part);
  }
  Mat S = Mat::Zero(n, n);
  for (const Mat& Lk : part_maps) S += Lk.transpose() * Ad * Lk;
  const Eigen::LLT<Mat> allt(Ad);
  int it_c0 = 0;
  const Mat AinvS = allt.solve(S);
  const double c0_sq = power_iterate(
      [&](const Vec& x) { return Vec(AinvS * x); }, AinvS, it_c0);
  out.c0_hat = std::sqrt(c0_sq);
  out.bound = 1.0 * c0_sq / tau0(dec);
  return out;
}

RateFit fit_rate(const IterationTrace& trace, FitMode mode,
                 std::optional<FitWindow> window) {
  return fit_rate(trace.energy_errors(), mode, window);
}

RateFit fit_rate(const std::vector<double>& zetas, FitMode mode,
                 std::optional<FitWindow> window) {
  RateFit fit;
  fit.mode = mode;

  // truncate at the numerical floor
  int valid = 0;
  while (valid < static_cast<int>(zetas.size()) &&
         std::isfinite(zetas[valid]) && zetas[valid] >= 1e-14)
    ++valid;
  fit.floor_truncated = valid < static_cast<int>(zetas.size());

  FitWindow w;
  if (window) {
    w = *window;
    if (w.end > valid) {
      w.end = valid;
      fit.floor_truncated = true;
    }
  } else {
    w.begin = valid / 2;
    w.end = valid;
  }
  if (w.end - w.begin < 5)
    throw std::invalid_argument("fit window too short (< 5 points)");
  fit.window_begin = w.begin;
  fit.window_end = w.end;

  std::vector<double> logz;
  logz.reserve(w.end - w.begin);
  for (int i = w.begin; i < w.end; ++i) logz.push_back(std::log(zetas[i]));

  const int m = static_cast<int>(logz.size());
  if (mode == FitMode::linear) {
    double mean_ratio = 0.0;
    for (int i = 0; i + 1 < m; ++i) mean_ratio += logz[i + 1] - logz[i];
    mean_ratio /= (m - 1);
    fit.rho = std::exp(mean_ratio);
    double intercept = 0.0;
    for (int i = 0; i < m; ++i) intercept += logz[i] - mean_ratio * i;
    intercept /= m;
    double ss = 0.0;
    for (int i = 0; i < m; ++i) {
      const double r = logz[i] - intercept - mean_ratio * i;
      ss += r * r;
    }
    fit.residual = std::sqrt(ss / m);
    fit.slope = 0.0;
    fit.non_convergent = fit.rho >= 1.0 - 1e-12;
  } else {
    // least squares of log zeta against log(n+1)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
      const double x = std::log(static_cast<double>(w.begin + i + 1));
      sx += x;
      sy += logz[i];
      sxx += x * x;
      sxy += x * logz[i];
    }
    const double denom = m * sxx - sx * sx;
    fit.slope = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
    const double intercept = (sy - fit.slope * sx) / m;
    double ss = 0.0;
    for (int i = 0; i < m; ++i) {
      const double x = std::log(static_cast<double>(w.begin + i + 1));
      const double r = logz[i] - intercept - fit.slope * x;
      ss += r * r;
    }
    fit.residual = std::sqrt(ss / m);
    fit.rho = 0.0;
    fit.non_convergent = fit.slope >= -1e-12;
  }
  return fit;
}

double estimate_mu(const Objective& objective, const Vec& u_star,
                   double energy_star, double p,
                   const std::vector<Vec>& samples) {
  double mu = std::numeric_limits<double>::infinity();
  for (const Vec& u : samples) {
    const double dist = error_norm(objective, u - u_star);
    if (!(dist > 1e-12)) continue;
    const double gap = objective.energy(u) - energy_star;
    if (!(gap > 0.0)) continue;
    mu = std::min(mu, p * gap / std::pow(dist, p));
  }
  if (!std::isfinite(mu))
    throw std::runtime_error("sharpness estimation found no usable samples");
  return mu;
}

double estimate_R0(const Objective& objective, const Vec& u_star,
                   const std::vector<Vec>& samples) {
  double r0 = 0.0;
  for (const Vec& u : samples)
    r0 = std::max(r0, error_norm(objective, u - u_star));
  return r0;
}

double optimality_residual(const Objective& objective, const Vec& u) {
  const Vec g = objective.smooth->gradient(u);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double r = 0.0;
    switch (objective.nonsmooth.kind) {
      case NonsmoothKind::none:
        r = std::abs(g[i]);
        break;
      case NonsmoothKind::weighted_abs: {
        const double s = objective.nonsmooth.weights[i];
        if (u[i] > 0.0)
          r = std::abs(g[i] + s);
        else if (u[i] < 0.0)
          r = std::abs(g[i] - s);
        else
          r = std::max(0.0, std::abs(g[i]) - s);
        break;
      }
      case NonsmoothKind::lower_obstacle:
        if (u[i] > objective.nonsmooth.lower[i])
          r = std::abs(g[i]);
        else
          r = std::max(0.0, -g[i]);
        break;
    }
    worst = std::max(worst, r);
  }
  return worst;
}

SublinearBoundCheck check_sublinear_bound(const std::vector<double>& zetas,
                                          double p, double q, double tau,
                                          double kappa_hat, double mu_hat) {
  if (!(p > q)) throw std::invalid_argument("requires p > q");
  SublinearBoundCheck out;
  const double ratio_pow =
      std::pow(std::pow(kappa_hat, p) / std::pow(mu_hat, q), 1.0 / (p - q));
  const double beta = p * (q - 1.0) / (p - q);
  out.threshold =
      std::pow(p, q / (p - q)) * std::pow(tau, beta) * ratio_pow;
  out.amplitude = constant_Cpq(p, q, tau) * ratio_pow;

  int burn_in = 0;
  while (burn_in < static_cast<int>(zetas.size()) &&
         zetas[burn_in] >= out.threshold)
    ++burn_in;
  out.burn_in = burn_in;

  out.holds = true;
  for (int j = 0; burn_in + j < static_cast<int>(zetas.size()); ++j) {
    const double bound = out.amplitude / std::pow(j + 1.0, beta);
    const double zeta = zetas[burn_in + j];
    if (bound > 0.0) out.max_ratio = std::max(out.max_ratio, zeta / bound);
    if (zeta > bound * (1.0 + 1e-9)) out.holds = false;
  }
  return out;
}

} // namespace asmopt
