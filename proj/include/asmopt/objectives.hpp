#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "asmopt/mesh.hpp"
#include "asmopt/types.hpp"

namespace asmopt {

enum class SmoothKind { quadratic, s_laplacian };

/// Differentiable convex part F of an energy E = F + G.
class SmoothPart {
 public:
  virtual ~SmoothPart() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& u) const = 0;
  virtual Vec gradient(const Vec& u) const = 0;
  virtual SpMat hessian(const Vec& u) const = 0;
  virtual SmoothKind kind() const = 0;
};

/// F(u) = 1/2 u'Au - b'u with sparse SPD A.
class QuadraticSmooth final : public SmoothPart {
 public:
  QuadraticSmooth(SpMat A, Vec b);
  int dim() const override { return static_cast<int>(b_.size()); }
  double value(const Vec& u) const override;
  Vec gradient(const Vec& u) const override;
  SpMat hessian(const Vec&) const override { return A_; }
  SmoothKind kind() const override { return SmoothKind::quadratic; }
  const SpMat& matrix() const { return A_; }
  const Vec& linear_term() const { return b_; }

 private:
  SpMat A_;
  Vec b_;
};

/// F(u) = (1/s) * integral (|grad u|^2 + eps^2)^(s/2) - l'u on the fine mesh.
/// eps regularizes the gradient singularity at |grad u| = 0 and defaults to
/// 0 for s > 2 and 1e-10 for 1 < s < 2.
class SLaplacianSmooth final : public SmoothPart {
 public:
  SLaplacianSmooth(std::shared_ptr<const MeshHierarchy> mesh, double s,
                   Vec load, double eps);
  int dim() const override;
  double value(const Vec& u) const override;
  Vec gradient(const Vec& u) const override;
  SpMat hessian(const Vec& u) const override;
  SmoothKind kind() const override { return SmoothKind::s_laplacian; }
  double exponent() const { return s_; }
  double regularization() const { return eps_; }

 private:
  std::shared_ptr<const MeshHierarchy> mesh_;
  double s_;
  Vec load_;
  double eps_;
  std::vector<P1Element> elements_;
};

enum class NonsmoothKind { none, weighted_abs, lower_obstacle };

/// Pointwise nonsmooth part G: zero, a weighted l1 sum, or the indicator of
/// the nodal constraint u >= lower (infinity off the feasible set).
struct NonsmoothPart {
  NonsmoothKind kind = NonsmoothKind::none;
  Vec weights; // weighted_abs: per-dof s_x >= 0
  Vec lower;   // lower_obstacle: nodal bound

  double value(const Vec& u) const;
  bool feasible(const Vec& u) const;
};

struct ObjectiveMeta {
  double p = 2.0;             // sharpness exponent when known
  double q = 2.0;             // smoothness exponent when known
  double norm_exponent = 2.0; // s of the W^{1,s} norm used for rates
  std::optional<double> lipschitz; // L of F' when known (block problems)
  std::vector<int> block_sizes;    // block-separable problems
  std::string problem_id;
};

/// Convex energy E = F + G over interior dofs (mesh problems) or R^n
/// (block-separable problems; mesh is null).
struct Objective {
  std::shared_ptr<const SmoothPart> smooth;
  NonsmoothPart nonsmooth;
  ObjectiveMeta meta;
  std::shared_ptr<const MeshHierarchy> mesh;

  int dim() const { return smooth->dim(); }
  double energy(const Vec& u) const {
    return smooth->value(u) + nonsmooth.value(u);
  }
};

/// Load term <f, u>: either an already-assembled dual vector over interior
/// dofs, or a callable integrated through the P1 interpolant of f.
struct Load {
  static Load vector(Vec dual);
  static Load function(std::function<double(double, double)> f);
  static Load constant(double c);

  std::optional<Vec> dual;
  std::function<double(double, double)> callable;
};

Vec resolve_load(const MeshHierarchy& mesh, const Load& f);

Objective make_linear_elliptic(std::shared_ptr<const MeshHierarchy> mesh,
                               const Load& f);

/// s > 1, s != 2 (the quadratic case is make_linear_elliptic).
Objective make_s_laplacian(std::shared_ptr<const MeshHierarchy> mesh, double s,
                           const Load& f, std::optional<double> eps = {});

Objective make_l1_obstacle(std::shared_ptr<const MeshHierarchy> mesh,
                           const Load& f, double lambda);

struct ObstacleData {
  FemFunction lower; // fine-level nodal obstacle
};

Objective make_obstacle_constrained(std::shared_ptr<const MeshHierarchy> mesh,
                                    const Load& f, const ObstacleData& data);

/// Product-space quadratic with per-coordinate l1 weights; A must be SPD.
Objective make_block_separable(const std::vector<int>& sizes, const Mat& A,
                               const Vec& b, const Vec& l1_weights);

/// D_F(u, v) = F(u) - F(v) - <F'(v), u - v>.
double bregman(const SmoothPart& f, const Vec& u, const Vec& v);

/// W^{1,s} norm of a fine-interior vector for mesh problems, Euclidean norm
/// for block problems (the norm the objective's rate constants refer to).
double error_norm(const Objective& objective, const Vec& v);

} // namespace asmopt
