#include "asmopt/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <set>

namespace asmopt {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double now_ms(const Clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void require_keys(const Json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

std::optional<double> parse_step_field(const Json& j, const std::string& key,
                                       const std::string& auto_word) {
  if (!j.contains(key)) return {};
  const Json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == auto_word) return {};
    throw ConfigError("'" + key + "' must be a number or \"" + auto_word +
                      "\"");
  }
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

} // namespace

ExperimentConfig parse_experiment_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be an object");
  require_keys(j,
               {"problem", "s", "lambda", "load", "obstacle", "bcd_sizes",
                "bcd_l1", "mesh", "decomposition", "solver", "reference",
                "fit", "seed", "output_dir", "override_tau"},
               "configuration");
  ExperimentConfig cfg;
  if (!j.contains("problem")) throw ConfigError("missing 'problem'");
  cfg.problem = j.at("problem").get<std::string>();
  static const std::set<std::string> problems{"linear", "slap", "l1obstacle",
                                              "obstacle", "bcd"};
  if (!problems.count(cfg.problem))
    throw ConfigError("unknown problem '" + cfg.problem + "'");

  cfg.s = get_or(j, "s", cfg.s);
  cfg.lambda = get_or(j, "lambda", cfg.lambda);
  cfg.load = get_or(j, "load", cfg.load);
  cfg.obstacle = get_or<std::string>(j, "obstacle", cfg.obstacle);
  if (cfg.obstacle != "bump" && cfg.obstacle != "hat")
    throw ConfigError("obstacle must be 'bump' or 'hat'");
  cfg.bcd_sizes = get_or(j, "bcd_sizes", cfg.bcd_sizes);
  cfg.bcd_l1 = get_or(j, "bcd_l1", cfg.bcd_l1);
  cfg.fit = get_or<std::string>(j, "fit", cfg.fit);
  if (cfg.fit != "auto" && cfg.fit != "linear" && cfg.fit != "sublinear")
    throw ConfigError("fit must be auto, linear, or sublinear");
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
  cfg.override_tau = get_or(j, "override_tau", cfg.override_tau);

  if (j.contains("mesh")) {
    const Json& m = j.at("mesh");
    require_keys(m, {"d", "m", "r"}, "mesh");
    cfg.mesh.d = get_or(m, "d", cfg.mesh.d);
    cfg.mesh.m = get_or(m, "m", cfg.mesh.m);
    cfg.mesh.r = get_or(m, "r", cfg.mesh.r);
  }
  if (j.contains("decomposition")) {
    const Json& d = j.at("decomposition");
    require_keys(d, {"layout", "overlap_layers", "two_level"},
                 "decomposition");
    cfg.decomposition.layout =
        get_or(d, "layout", cfg.decomposition.layout);
    cfg.decomposition.overlap_layers =
        get_or(d, "overlap_layers", cfg.decomposition.overlap_layers);
    cfg.decomposition.two_level =
        get_or(d, "two_level", cfg.decomposition.two_level);
  }
  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    require_keys(s, {"kind", "tau", "omega", "budget", "eps_local",
                     "local_cap"},
                 "solver");
    cfg.solver.kind = get_or<std::string>(s, "kind", cfg.solver.kind);
    static const std::set<std::string> kinds{
        "asm-exact", "constraint-decomposition", "bcd", "asm-bcd",
        "forward-backward"};
    if (!kinds.count(cfg.solver.kind))
      throw ConfigError("unknown solver kind '" + cfg.solver.kind + "'");
    cfg.solver.tau = parse_step_field(s, "tau", "tau0");
    cfg.solver.omega = parse_step_field(s, "omega", "omega0");
    cfg.solver.budget = get_or(s, "budget", cfg.solver.budget);
    cfg.solver.eps_local = get_or(s, "eps_local", cfg.solver.eps_local);
    cfg.solver.local_cap = get_or(s, "local_cap", cfg.solver.local_cap);
    if (cfg.solver.budget < 0) throw ConfigError("budget must be >= 0");
  }
  if (j.contains("reference")) {
    const Json& r = j.at("reference");
    require_keys(r, {"budget_factor", "eps_local", "certify_tol"},
                 "reference");
    cfg.reference.budget_factor =
        get_or(r, "budget_factor", cfg.reference.budget_factor);
    cfg.reference.eps_local = get_or(r, "eps_local", cfg.reference.eps_local);
    cfg.reference.certify_tol =
        get_or(r, "certify_tol", cfg.reference.certify_tol);
  }

  // cross-field checks
  if (cfg.problem == "slap" && (!(cfg.s > 1.0) || cfg.s == 2.0))
    throw ConfigError("slap requires s > 1 and s != 2");
  if (cfg.problem == "l1obstacle" && cfg.lambda < 0.0)
    throw ConfigError("lambda must be >= 0");
  const bool block_kind = cfg.solver.kind == "bcd" ||
                          cfg.solver.kind == "asm-bcd" ||
                          cfg.solver.kind == "forward-backward";
  if (cfg.problem == "bcd" && !block_kind)
    throw ConfigError("the bcd problem runs with solver kinds bcd, asm-bcd, "
                      "or forward-backward");
  if (cfg.problem != "bcd" && block_kind)
    throw ConfigError("solver kind '" + cfg.solver.kind +
                      "' applies to the bcd problem only");
  if (cfg.solver.kind == "constraint-decomposition" &&
      cfg.problem != "obstacle")
    throw ConfigError("constraint decomposition applies to the obstacle "
                      "problem only");
  if (cfg.problem == "bcd" && cfg.bcd_sizes.empty())
    throw ConfigError("bcd_sizes must be nonempty");
  if (cfg.decomposition.two_level &&
      (cfg.problem == "l1obstacle" || cfg.problem == "obstacle"))
    throw ConfigError("two-level local solvers are supported for smooth "
                      "objectives only");
  return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["problem"] = cfg.problem;
  j["s"] = cfg.s;
  j["lambda"] = cfg.lambda;
  j["load"] = cfg.load;
  j["obstacle"] = cfg.obstacle;
  j["bcd_sizes"] = cfg.bcd_sizes;
  j["bcd_l1"] = cfg.bcd_l1;
  j["mesh"] = Json{{"d", cfg.mesh.d}, {"m", cfg.mesh.m}, {"r", cfg.mesh.r}};
  Json dec;
  dec["layout"] = cfg.decomposition.layout;
  dec["overlap_layers"] = cfg.decomposition.overlap_layers;
  dec["two_level"] = cfg.decomposition.two_level;
  j["decomposition"] = dec;
  Json s;
  s["kind"] = cfg.solver.kind;
  if (cfg.solver.tau)
    s["tau"] = *cfg.solver.tau;
  else
    s["tau"] = "tau0";
  if (cfg.solver.omega)
    s["omega"] = *cfg.solver.omega;
  else
    s["omega"] = "omega0";
  s["budget"] = cfg.solver.budget;
  s["eps_local"] = cfg.solver.eps_local;
  s["local_cap"] = cfg.solver.local_cap;
  j["solver"] = s;
  j["reference"] = Json{{"budget_factor", cfg.reference.budget_factor},
                        {"eps_local", cfg.reference.eps_local},
                        {"certify_tol", cfg.reference.certify_tol}};
  j["fit"] = cfg.fit;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["override_tau"] = cfg.override_tau;
  return j;
}

namespace {

struct BuiltProblem {
  Objective objective;
  std::shared_ptr<const MeshHierarchy> mesh; // null for block problems
  std::optional<SpaceDecomposition> dec;
  double step_bound = 1.0;  // tau0 of the chosen splitting
  double omega0 = 1.0;
  Vec u0;
};

FemFunction obstacle_function(const MeshHierarchy& mesh,
                              const std::string& shape) {
  const bool planar = mesh.dim == 2;
  if (shape == "hat") {
    return nodal_interpolate(mesh, Level::fine, [planar](double x, double y) {
      const double d = std::abs(x - 0.5) + (planar ? std::abs(y - 0.5) : 0.0);
      return 0.3 - d;
    });
  }
  return nodal_interpolate(mesh, Level::fine, [planar](double x, double y) {
    const double r2 = (x - 0.5) * (x - 0.5) +
                      (planar ? (y - 0.5) * (y - 0.5) : 0.0);
    return 0.25 - 2.0 * r2;
  });
}

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  BuiltProblem out;
  if (cfg.problem == "bcd") {
    const int n = [&] {
      int acc = 0;
      for (int m : cfg.bcd_sizes) acc += m;
      return acc;
    }();
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> normal;
    Mat B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = normal(rng);
    const Mat A = B.transpose() * B / n + 0.5 * Mat::Identity(n, n);
    Vec b(n);
    for (int i = 0; i < n; ++i) b[i] = normal(rng);
    out.objective = make_block_separable(cfg.bcd_sizes, A, b,
                                         Vec::Constant(n, cfg.bcd_l1));
    const double L = *out.objective.meta.lipschitz;
    if (cfg.solver.kind == "forward-backward") {
      out.step_bound = 1.0 / L;
      out.omega0 = 1.0;
    } else {
      out.step_bound = 1.0 / static_cast<int>(cfg.bcd_sizes.size());
      out.omega0 = L;
    }
    out.u0 = Vec::Zero(n);
    return out;
  }

  out.mesh = std::make_shared<MeshHierarchy>(
      build_mesh_hierarchy(cfg.mesh.d, cfg.mesh.m, cfg.mesh.r));
  const Load load = Load::constant(cfg.load);
  if (cfg.problem == "linear")
    out.objective = make_linear_elliptic(out.mesh, load);
  else if (cfg.problem == "slap")
    out.objective = make_s_laplacian(out.mesh, cfg.s, load);
  else if (cfg.problem == "l1obstacle")
    out.objective = make_l1_obstacle(out.mesh, load, cfg.lambda);
  else
    out.objective = make_obstacle_constrained(
        out.mesh, load, {obstacle_function(*out.mesh, cfg.obstacle)});

  std::vector<int> layout = cfg.decomposition.layout;
  if (layout.empty())
    layout = cfg.mesh.d == 1 ? std::vector<int>{4} : std::vector<int>{2, 2};
  try {
    out.dec = build_decomposition(*out.mesh, layout,
                                  cfg.decomposition.overlap_layers,
                                  cfg.decomposition.two_level);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (cfg.solver.kind == "constraint-decomposition") {
    out.step_bound = 1.0 / out.dec->num_subdomains;
    out.omega0 = 1.0;
  } else {
    out.step_bound = tau0(*out.dec);
    out.omega0 = 1.0;
  }

  if (cfg.problem == "obstacle")
    out.u0 = out.objective.nonsmooth.lower.cwiseMax(0.0);
  else
    out.u0 = Vec::Zero(out.objective.dim());
  return out;
}

IterationTrace dispatch_solve(const ExperimentConfig& cfg,
                              const BuiltProblem& built,
                              const AsmConfig& asm_cfg, const Vec& u0) {
  if (cfg.solver.kind == "bcd")
    return bcd_solve(built.objective, asm_cfg, u0);
  if (cfg.solver.kind == "asm-bcd") {
    const auto surrogate = make_bcd_surrogate(built.objective);
    return asm_solve(built.objective, *surrogate, asm_cfg, u0);
  }
  if (cfg.solver.kind == "forward-backward")
    return gradient_method(built.objective,
                           forward_backward_surrogate(built.objective,
                                                      asm_cfg.tau),
                           u0, asm_cfg);
  if (cfg.solver.kind == "constraint-decomposition")
    return constraint_decomposition_solve(built.objective, *built.dec,
                                          asm_cfg, u0);
  return asm_solve(built.objective, *built.dec, asm_cfg, u0);
}

void write_trace_csv(const fs::path& path, const IterationTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iter,energy,energy_error,local_iters_max,wall_ms\n";
  char buf[160];
  for (const auto& r : trace.records) {
    // wall_ms is written as 0 so reruns are byte-identical; measured
    // timings live in summary.json
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%d,%.17g\n", r.iter,
                  r.energy, r.energy_error, r.local_iters_max, 0.0);
    out << buf;
  }
}

void write_plot_script(const fs::path& path) {
  std::ofstream out(path);
  out << R"(#!/usr/bin/env python3
"""Plot the energy-error decay of a trace.csv (same directory)."""
import csv
import os
import sys

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "trace.csv"))))
iters = [int(r["iter"]) for r in rows]
errors = [float(r["energy_error"]) for r in rows]

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    for n, z in zip(iters, errors):
        print(n, z)
    sys.exit(0)

plt.semilogy(iters, [max(z, 1e-300) for z in errors], marker=".")
plt.xlabel("iteration")
plt.ylabel("energy error")
plt.grid(True, which="both", alpha=0.3)
plt.tight_layout()
plt.savefig(os.path.join(here, "trace.png"), dpi=150)
print("wrote", os.path.join(here, "trace.png"))
)";
}

Json fit_to_json(const RateFit& fit) {
  Json j;
  j["mode"] = fit.mode == FitMode::linear ? "linear" : "sublinear";
  if (fit.mode == FitMode::linear)
    j["rho"] = fit.rho;
  else
    j["slope"] = fit.slope;
  j["residual"] = fit.residual;
  j["window"] = Json::array({fit.window_begin, fit.window_end});
  j["floor_truncated"] = fit.floor_truncated;
  j["non_convergent"] = fit.non_convergent;
  return j;
}

} // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  const auto t_start = Clock::now();
  Json summary;
  summary["schema_version"] = 1;
  summary["tool"] = Json{{"name", "asmopt"}, {"version", "0.1.0"}};
  summary["config"] = config_to_json(cfg);

  if (cfg.output_dir.empty()) {
    log << "error: no output directory configured\n";
    return 2;
  }

  BuiltProblem built;
  try {
    built = build_problem(cfg);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  }

  const double tau = cfg.solver.tau ? *cfg.solver.tau : built.step_bound;
  const double omega = cfg.solver.omega ? *cfg.solver.omega : built.omega0;
  if (tau > built.step_bound + 1e-12 && !cfg.override_tau) {
    log << "config error: tau = " << tau << " exceeds the step bound tau0 = "
        << built.step_bound
        << " (1/N_c one-level, 1/(N_c+1) two-level, 1/N for block and "
           "constraint splittings); pass --override-tau to run anyway\n";
    return 2;
  }
  if (omega < built.omega0 * (1.0 - 1e-12)) {
    log << "config error: omega = " << omega << " is below omega0 = "
        << built.omega0 << "\n";
    return 2;
  }

  AsmConfig asm_cfg;
  asm_cfg.tau = tau;
  asm_cfg.omega = omega;
  asm_cfg.eps_local = cfg.solver.eps_local;
  asm_cfg.local_cap = cfg.solver.local_cap;
  // guards stay active unless the step genuinely exceeds the bound
  asm_cfg.unsafe_step =
      cfg.override_tau && tau > built.step_bound + 1e-12;
  summary["resolved"] = Json{{"tau", tau},
                             {"omega", omega},
                             {"tau0", built.step_bound},
                             {"omega0", built.omega0}};

  // reference minimizer: the same solver with tightened tolerances for
  // chunks of 10x the budget, extended (warm-started) until the coordinate
  // optimality residual certifies it
  const auto t_ref = Clock::now();
  Vec u_star;
  double e_star = 0.0;
  {
    AsmConfig ref_cfg = asm_cfg;
    ref_cfg.unsafe_step = false;
    ref_cfg.tau = std::min(tau, built.step_bound);
    ref_cfg.eps_local = cfg.reference.eps_local;
    // below the gradient regularization scale the s < 2 local residual is
    // noise; do not chase tolerances past it
    if (cfg.problem == "slap" && cfg.s < 2.0)
      ref_cfg.eps_local = std::max(ref_cfg.eps_local, 1e-10);
    ref_cfg.budget =
        std::max(cfg.solver.budget * cfg.reference.budget_factor, 200);
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    Vec warm = built.u0;
    try {
      if (built.mesh && built.objective.nonsmooth.kind == NonsmoothKind::none) {
        // smooth mesh problems: one global exact solve (the single-subspace
        // instance of the same splitting) reaches the minimizer directly,
        // where the damped outer iteration would only crawl there
        const std::vector<int> whole(cfg.mesh.d, 1);
        const SpaceDecomposition all =
            build_decomposition(*built.mesh, whole, 1, false);
        AsmConfig global = ref_cfg;
        global.tau = 1.0;
        global.omega = 1.0;
        global.budget = 1;
        global.local_cap = 100000;
        const auto surrogate = make_exact_surrogate(built.objective, all);
        int local_iters = 0;
        warm = asm_step(built.objective, *surrogate, global, warm,
                        &local_iters);
        iterations = local_iters;
        residual = optimality_residual(built.objective, warm);
      } else {
        // block problems converge much faster under the plain
        // forward-backward step 1/L than under the damped block splitting;
        // nonsmooth mesh problems extend the tight damped solve in chunks
        const bool block_ref = cfg.problem == "bcd";
        GradientSurrogate fb;
        if (block_ref)
          fb = forward_backward_surrogate(
              built.objective, 1.0 / *built.objective.meta.lipschitz);
        for (int chunk = 0; chunk < 8; ++chunk) {
          const IterationTrace ref =
              block_ref ? gradient_method(built.objective, fb, warm, ref_cfg)
                        : dispatch_solve(cfg, built, ref_cfg, warm);
          warm = ref.final_iterate;
          iterations += static_cast<int>(ref.records.size()) - 1;
          residual = optimality_residual(built.objective, warm);
          if (residual <= cfg.reference.certify_tol) break;
        }
      }
    } catch (const std::exception& e) {
      log << "reference solve failed: " << e.what() << "\n";
      return 4;
    }
    u_star = warm;
    e_star = built.objective.energy(u_star);
    summary["reference"] = Json{{"energy", e_star},
                                {"optimality_residual", residual},
                                {"iterations", iterations},
                                {"certify_tol", cfg.reference.certify_tol}};
    if (!(residual <= cfg.reference.certify_tol)) {
      log << "reference solve failed certification: residual " << residual
          << " > " << cfg.reference.certify_tol << "\n";
      return 4;
    }
  }
  const double ref_ms = now_ms(t_ref);

  // main run
  const auto t_solve = Clock::now();
  asm_cfg.budget = cfg.solver.budget;
  asm_cfg.reference_energy = e_star;
  asm_cfg.record_iterates = true;
  IterationTrace trace;
  try {
    trace = dispatch_solve(cfg, built, asm_cfg, built.u0);
  } catch (const SolverError& e) {
    log << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  }
  const double solve_ms = now_ms(t_solve);

  // rate analysis
  const auto t_analysis = Clock::now();
  RateReport report;
  report.problem_id = built.objective.meta.problem_id;
  report.p = built.objective.meta.p;
  report.q = built.objective.meta.q;
  report.tau = tau;
  report.omega = omega;

  std::mt19937_64 rng(cfg.seed + 17);
  std::normal_distribution<double> normal;
  std::vector<Vec> samples = trace.iterates;
  const double e0 = trace.records.front().energy;
  for (int t = 0; t < 24; ++t) {
    Vec d(built.objective.dim());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = normal(rng);
    if (built.objective.nonsmooth.kind == NonsmoothKind::lower_obstacle)
      d = d.cwiseAbs(); // keep obstacle samples feasible
    const double nd = error_norm(built.objective, d);
    if (!(nd > 0.0)) continue;
    double scale = 1.0 / nd;
    Vec u = u_star + scale * d;
    int halvings = 0;
    while (built.objective.energy(u) > e0 && halvings++ < 60) {
      scale *= 0.5;
      u = u_star + scale * d;
    }
    if (halvings < 60) samples.push_back(u);
  }
  try {
    report.mu_hat = estimate_mu(built.objective, u_star, e_star, report.p,
                                samples);
  } catch (const std::exception&) {
    report.mu_hat = 0.0;
  }
  report.r0_hat = estimate_R0(built.objective, u_star, samples);

  if (built.dec) {
    C0Options c0;
    c0.samples = 48;
    c0.seed = cfg.seed + 29;
    c0.radius = std::max(1.0, (2.0 / tau - 1.0) * report.r0_hat);
    c0.decomposer = built.dec->two_level
                        ? (built.objective.nonsmooth.kind == NonsmoothKind::none
                               ? DecomposerKind::two_level_l2
                               : DecomposerKind::two_level_nonsmooth)
                        : DecomposerKind::one_level;
    report.c0_hat = estimate_C0(built.objective, *built.dec, u_star, c0);
  } else {
    // block splitting: sum_k ||w_k||^2 = ||w||^2 gives C0 = sqrt(N) exactly
    report.c0_hat = std::sqrt(static_cast<double>(cfg.bcd_sizes.size()));
  }
  report.kappa_hat = kappa_asm(omega, report.c0_hat, report.q, tau);

  const bool sharp_linear = report.p == report.q;
  if (sharp_linear && report.mu_hat > 0.0)
    report.predicted_contraction =
        1.0 - (1.0 - 1.0 / report.q) *
                  std::min(tau, std::pow(report.mu_hat /
                                             (report.q * report.kappa_hat),
                                         1.0 / (report.q - 1.0)));
  if (!sharp_linear)
    report.predicted_exponent =
        report.p * (report.q - 1.0) / (report.p - report.q);

  const FitMode mode = cfg.fit == "linear"
                           ? FitMode::linear
                           : cfg.fit == "sublinear"
                                 ? FitMode::sublinear
                                 : (sharp_linear ? FitMode::linear
                                                 : FitMode::sublinear);
  std::optional<std::string> fit_error;
  try {
    report.fit = fit_rate(trace, mode);
  } catch (const std::exception& e) {
    fit_error = e.what();
  }

  Json rate;
  rate["problem"] = report.problem_id;
  rate["p"] = report.p;
  rate["q"] = report.q;
  rate["tau"] = report.tau;
  rate["omega"] = report.omega;
  if (fit_error)
    rate["fit_error"] = *fit_error;
  else
    rate["fit"] = fit_to_json(report.fit);
  if (sharp_linear)
    rate["predicted_contraction"] = report.predicted_contraction;
  else
    rate["predicted_exponent"] = report.predicted_exponent;
  rate["kappa_hat"] = report.kappa_hat;
  rate["c0_hat"] = report.c0_hat;
  rate["mu_hat"] = report.mu_hat;
  rate["r0_hat"] = report.r0_hat;
  summary["rate"] = rate;

  if (!sharp_linear && report.mu_hat > 0.0) {
    const SublinearBoundCheck bc =
        check_sublinear_bound(trace.energy_errors(), report.p, report.q, tau,
                              report.kappa_hat, report.mu_hat);
    summary["bound_check"] = Json{{"holds", bc.holds},
                                  {"burn_in", bc.burn_in},
                                  {"max_ratio", bc.max_ratio},
                                  {"threshold", bc.threshold},
                                  {"amplitude", bc.amplitude}};
  }
  const double analysis_ms = now_ms(t_analysis);

  // artifacts
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    log << "error: cannot create output directory " << dir << "\n";
    return 2;
  }
  write_trace_csv(dir / "trace.csv", trace);
  write_plot_script(dir / "plot.py");

  summary["trace"] =
      Json{{"rows", trace.records.size()},
           {"csv", "trace.csv"},
           {"final_energy", trace.records.back().energy},
           {"final_energy_error", trace.records.back().energy_error}};
  summary["timing_ms"] = Json{{"total", now_ms(t_start)},
                              {"reference", ref_ms},
                              {"solve", solve_ms},
                              {"analysis", analysis_ms}};
  std::ofstream sj(dir / "summary.json");
  sj << summary.dump(2) << "\n";

  log << "wrote " << (dir / "trace.csv").string() << " ("
      << trace.records.size() << " rows)\n";
  return 0;
}

namespace {

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("json parse error: ") + e.what());
  }
}

ExperimentConfig apply_options(ExperimentConfig cfg, const RunOptions& opts,
                               const std::string& fallback_dir) {
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.budget) cfg.solver.budget = *opts.budget;
  if (opts.override_tau) cfg.override_tau = true;
  if (opts.out_dir)
    cfg.output_dir = *opts.out_dir;
  else if (cfg.output_dir.empty())
    cfg.output_dir = fallback_dir;
  return cfg;
}

} // namespace

std::string default_output_root() {
  if (const char* env = std::getenv("ASMOPT_OUT")) return env;
  return "asmopt_out";
}

int run_experiment_file(const std::string& path, const RunOptions& opts,
                        std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = parse_experiment_config(load_json(path));
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  }
  const std::string stem = fs::path(path).stem().string();
  cfg = apply_options(cfg, opts, default_output_root() + "/" + stem);
  return run_experiment(cfg, log);
}

int run_suite_file(const std::string& path, const RunOptions& opts,
                   std::ostream& log) {
  Json suite;
  try {
    suite = load_json(path);
    require_keys(suite, {"experiments", "sweeps"}, "suite");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  }

  const std::string root =
      opts.out_dir ? *opts.out_dir
                   : default_output_root() + "/" +
                         fs::path(path).stem().string();
  RunOptions entry_opts = opts;
  entry_opts.out_dir.reset();

  Json aggregate;
  aggregate["schema_version"] = 1;
  aggregate["entries"] = Json::array();
  aggregate["sweeps"] = Json::array();
  int failures = 0;

  auto run_one = [&](const Json& cj, const std::string& name) -> Json {
    Json entry;
    entry["name"] = name;
    entry["dir"] = root + "/" + name;
    int code = 0;
    try {
      ExperimentConfig cfg = parse_experiment_config(cj);
      cfg = apply_options(cfg, entry_opts, "");
      cfg.output_dir = root + "/" + name;
      code = run_experiment(cfg, log);
    } catch (const ConfigError& e) {
      log << "config error in " << name << ": " << e.what() << "\n";
      code = 2;
    }
    entry["exit_code"] = code;
    if (code == 0) {
      const Json s = load_json(root + "/" + name + "/summary.json");
      if (s.contains("rate") && s["rate"].contains("fit")) {
        const Json& fit = s["rate"]["fit"];
        entry["mode"] = fit["mode"];
        if (fit.contains("rho")) entry["rho"] = fit["rho"];
        if (fit.contains("slope")) entry["slope"] = fit["slope"];
      }
    } else {
      ++failures;
    }
    aggregate["entries"].push_back(entry);
    return entry;
  };

  if (suite.contains("experiments")) {
    int idx = 0;
    for (const Json& cj : suite["experiments"]) {
      char name[32];
      std::snprintf(name, sizeof(name), "exp_%03d", idx++);
      run_one(cj, name);
    }
  }

  if (suite.contains("sweeps")) {
    for (const Json& sw : suite["sweeps"]) {
      try {
        require_keys(sw, {"name", "base", "pointer", "values", "tolerance"},
                     "sweep");
        const std::string sname = sw.at("name").get<std::string>();
        const std::string pointer = sw.at("pointer").get<std::string>();
        const double tol =
            sw.contains("tolerance") ? sw.at("tolerance").get<double>() : 0.02;
        Json sweep_report;
        sweep_report["name"] = sname;
        sweep_report["pointer"] = pointer;
        sweep_report["tolerance"] = tol;
        Json values = Json::array();
        Json rhos = Json::array();
        Json slopes = Json::array();
        bool monotone = true;
        bool have_all_rhos = true;
        double prev_rho = -1.0;
        for (const Json& value : sw.at("values")) {
          Json cj = sw.at("base");
          cj[Json::json_pointer(pointer)] = value;
          const std::string ename =
              sname + "_" + (value.is_string() ? value.get<std::string>()
                                               : value.dump());
          const Json entry = run_one(cj, ename);
          values.push_back(value);
          rhos.push_back(entry.contains("rho") ? entry["rho"]
                                               : Json(nullptr));
          slopes.push_back(entry.contains("slope") ? entry["slope"]
                                                   : Json(nullptr));
          if (entry.contains("rho")) {
            const double rho = entry["rho"].get<double>();
            if (prev_rho >= 0.0 && rho > prev_rho + tol) monotone = false;
            prev_rho = rho;
          } else {
            have_all_rhos = false;
          }
        }
        sweep_report["values"] = values;
        sweep_report["rho"] = rhos;
        sweep_report["slope"] = slopes;
        if (have_all_rhos)
          sweep_report["non_increasing_within_tol"] = monotone;
        aggregate["sweeps"].push_back(sweep_report);
      } catch (const std::exception& e) {
        log << "sweep error: " << e.what() << "\n";
        ++failures;
      }
    }
  }

  aggregate["failures"] = failures;
  std::error_code ec;
  fs::create_directories(root, ec);
  std::ofstream out(fs::path(root) / "aggregate.json");
  out << aggregate.dump(2) << "\n";
  if (failures > 0)
    log << "warning: " << failures << " suite entr"
        << (failures == 1 ? "y" : "ies") << " failed\n";
  log << "wrote " << (fs::path(root) / "aggregate.json").string() << "\n";
  return 0;
}

int validate_config_file(const std::string& path, std::ostream& log) {
  try {
    parse_experiment_config(load_json(path));
  } catch (const ConfigError& e) {
    log << "invalid: " << e.what() << "\n";
    return 2;
  }
  log << "ok\n";
  return 0;
}

} // namespace asmopt
