#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "asmopt/decomposition.hpp"
#include "asmopt/objectives.hpp"
#include "asmopt/solvers.hpp"
#include "asmopt/types.hpp"

namespace asmopt {

/// kappa = omega * C0^q / tau^(q-1).
double kappa_asm(double omega, double c0, double q, double tau);

/// C_{q,theta} = (max{theta, q (2^(q-1) - 1) / (q - 1)})^(q-1).
double constant_Cq(double q, double theta);

/// C_{p,q,theta} = p^(q/(p-q)) (max{theta, q (2^beta - 1)/(q - 1)})^beta
/// with beta = p(q-1)/(p-q); requires p > q.
double constant_Cpq(double p, double q, double theta);

/// For a_n - a_{n+1} >= C a_n^gamma: a_n <= max{a0, ((2^b - 1)/C)^b}/(n+1)^b
/// with b = 1/(gamma - 1).
double lemma_recurrence_bound(double a0, double C, double gamma, int n);

/// Minimum of g(t) = (a/q) t^q - b t over [0, theta], with its argmin.
struct QMinResult {
  double argmin = 0.0;
  double value = 0.0;
};
QMinResult lemma_qmin(double a, double b, double q, double theta);

enum class DecomposerKind { one_level, two_level_l2, two_level_nonsmooth };

struct C0Options {
  int samples = 64;
  double radius = 1.0;
  std::uint64_t seed = 1234;
  DecomposerKind decomposer = DecomposerKind::one_level;
  // measure ||u - v|| in the energy norm sqrt(2 D_F) instead of the
  // objective's W^{1,s} norm (the classical linear theory is stated in the
  // energy norm)
  bool energy_norm = false;
};

/// Empirical stable-decomposition constant: the max over sampled pairs
/// (u, v) in a ball around `center` of (q sum_k D_F(v + w_k, v) / ||u -
/// v||^q)^(1/q), with the w_k produced by the chosen decomposer. A lower
/// bound for the true C0.
double estimate_C0(const Objective& objective, const SpaceDecomposition& dec,
                   const Vec& center, const C0Options& opts);

struct SpectralCheck {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double bound = 0.0; // omega0 * C0_hat^2 / tau0
  double c0_hat = 0.0;
  int iterations = 0;
};

/// Assembles the additive Schwarz preconditioner action C = sum_k R_k^*
/// A_kk^{-1} R_k for a quadratic objective and computes the extreme
/// eigenvalues of C A in the A-inner product by power/inverse iteration.
/// The reported C0 is the partition-of-unity decomposer's exact
/// energy-norm constant (the largest Rayleigh quotient of its part maps
/// against A), so the bound always dominates the optimal constant.
SpectralCheck linear_spectral_check(const Objective& objective,
                                    const SpaceDecomposition& dec);

enum class FitMode { linear, sublinear };

struct FitWindow {
  int begin = 0;
  int end = 0; // half-open, indices into the trace records
};

struct RateFit {
  FitMode mode = FitMode::linear;
  double rho = 0.0;      // linear contraction factor
  double slope = 0.0;    // sublinear log-log slope
  double residual = 0.0; // RMS residual of the fit in log space
  int window_begin = 0;
  int window_end = 0;
  bool floor_truncated = false;
  bool non_convergent = false;
};

/// Fits the tail decay of the energy errors; the default window is the last
/// half of the trace, truncated where zeta falls below 1e-14.
RateFit fit_rate(const IterationTrace& trace, FitMode mode,
                 std::optional<FitWindow> window = {});
RateFit fit_rate(const std::vector<double>& zetas, FitMode mode,
                 std::optional<FitWindow> window = {});

/// One experiment's rate analysis: the fitted decay, the exponent the
/// theory predicts, and the empirical constants entering the bounds.
struct RateReport {
  std::string problem_id;
  double p = 2.0, q = 2.0;
  double tau = 0.0, omega = 1.0;
  RateFit fit;
  double predicted_exponent = 0.0;   // p(q-1)/(p-q) when p > q, else 0
  double predicted_contraction = 0.0; // linear-rate prediction when p == q
  double kappa_hat = 0.0;
  double c0_hat = 0.0;
  double mu_hat = 0.0;
  double r0_hat = 0.0;
};

/// Empirical sharpness constant: min over samples of
/// p (E(u) - E*) / ||u - u*||^p.
double estimate_mu(const Objective& objective, const Vec& u_star,
                   double energy_star, double p,
                   const std::vector<Vec>& samples);

/// Max distance ||u - u*|| over the samples.
double estimate_R0(const Objective& objective, const Vec& u_star,
                   const std::vector<Vec>& samples);

/// Largest violation of the first-order optimality condition over
/// coordinate directions (0 at an exact minimizer).
double optimality_residual(const Objective& objective, const Vec& u);

struct SublinearBoundCheck {
  bool holds = false;
  int burn_in = 0;     // first index where zeta drops below the threshold
  double max_ratio = 0.0; // max over the tail of zeta / bound
  double threshold = 0.0;
  double amplitude = 0.0;
};

/// Checks the p > q energy-error bound with empirical constants: past the
/// burn-in index the tail must satisfy
///   zeta_{burn_in + j} <= C_{p,q,tau} (kappa^p / mu^q)^(1/(p-q)) / (j+1)^beta
/// with beta = p(q-1)/(p-q).
SublinearBoundCheck check_sublinear_bound(const std::vector<double>& zetas,
                                          double p, double q, double tau,
                                          double kappa_hat, double mu_hat);

} // namespace asmopt
