#include "asmopt/objectives.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace asmopt {

QuadraticSmooth::QuadraticSmooth(SpMat A, Vec b) : A_(std::move(A)), b_(std::move(b)) {
  if (A_.rows() != A_.cols() || A_.rows() != b_.size())
    throw std::invalid_argument("quadratic data dimensions disagree");
}

double QuadraticSmooth::value(const Vec& u) const {
  return 0.5 * u.dot(A_ * u) - b_.dot(u);
}

Vec QuadraticSmooth::gradient(const Vec& u) const { return A_ * u - b_; }

SLaplacianSmooth::SLaplacianSmooth(std::shared_ptr<const MeshHierarchy> mesh,
                                   double s, Vec load, double eps)
    : mesh_(std::move(mesh)), s_(s), load_(std::move(load)), eps_(eps) {
  if (load_.size() != mesh_->fine.num_interior())
    throw std::invalid_argument("load vector length mismatch");
  elements_ = p1_elements(mesh_->fine);
}

int SLaplacianSmooth::dim() const { return mesh_->fine.num_interior(); }

double SLaplacianSmooth::value(const Vec& u) const {
  const Grid& g = mesh_->fine;
  const Vec full = embed_full(g, u);
  const double eps2 = eps_ * eps_;
  double acc = 0.0;
  for (const auto& e : elements_) {
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (int a = 0; a < e.nv; ++a) grad += full[e.nodes[a]] * e.grads.col(a);
    acc += e.measure * std::pow(grad.squaredNorm() + eps2, 0.5 * s_);
  }
  return acc / s_ - load_.dot(u);
}

Vec SLaplacianSmooth::gradient(const Vec& u) const {
  const Grid& g = mesh_->fine;
  const Vec full = embed_full(g, u);
  const double eps2 = eps_ * eps_;
  Vec out = Vec::Zero(g.num_interior());
  for (const auto& e : elements_) {
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (int a = 0; a < e.nv; ++a) grad += full[e.nodes[a]] * e.grads.col(a);
    const double base = grad.squaredNorm() + eps2;
    if (base == 0.0) continue; // zero-gradient element, s > 2 limit
    const double coef = e.measure * std::pow(base, 0.5 * s_ - 1.0);
    for (int a = 0; a < e.nv; ++a) {
      const int dof = g.interior_index[e.nodes[a]];
      if (dof >= 0) out[dof] += coef * grad.dot(e.grads.col(a));
    }
  }
  return out - load_;
}

SpMat SLaplacianSmooth::hessian(const Vec& u) const {
  const Grid& g = mesh_->fine;
  const Vec full = embed_full(g, u);
  const double eps2 = eps_ * eps_;
  std::vector<Triplet> triplets;
  for (const auto& e : elements_) {
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (int a = 0; a < e.nv; ++a) grad += full[e.nodes[a]] * e.grads.col(a);
    const double base = grad.squaredNorm() + eps2;
    if (base == 0.0) continue;
    const double c1 = std::pow(base, 0.5 * s_ - 1.0);
    const double c2 = (s_ - 2.0) * std::pow(base, 0.5 * s_ - 2.0);
    std::array<double, 3> m{};
    for (int a = 0; a < e.nv; ++a) m[a] = grad.dot(e.grads.col(a));
    for (int a = 0; a < e.nv; ++a) {
      const int ia = g.interior_index[e.nodes[a]];
      if (ia < 0) continue;
      for (int b = 0; b < e.nv; ++b) {
        const int ib = g.interior_index[e.nodes[b]];
        if (ib < 0) continue;
        const double h =
            e.measure *
            (c2 * m[a] * m[b] + c1 * e.grads.col(a).dot(e.grads.col(b)));
        triplets.emplace_back(ia, ib, h);
      }
    }
  }
  SpMat H(g.num_interior(), g.num_interior());
  H.setFromTriplets(triplets.begin(), triplets.end());
  return H;
}

double NonsmoothPart::value(const Vec& u) const {
  switch (kind) {
    case NonsmoothKind::none:
      return 0.0;
    case NonsmoothKind::weighted_abs:
      return weights.dot(u.cwiseAbs());
    case NonsmoothKind::lower_obstacle:
      return feasible(u) ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

bool NonsmoothPart::feasible(const Vec& u) const {
  if (kind != NonsmoothKind::lower_obstacle) return true;
  return (u.array() >= lower.array()).all();
}

Load Load::vector(Vec dual) {
  Load out;
  out.dual = std::move(dual);
  return out;
}

Load Load::function(std::function<double(double, double)> f) {
  Load out;
  out.callable = std::move(f);
  return out;
}

Load Load::constant(double c) {
  return function([c](double, double) { return c; });
}

Vec resolve_load(const MeshHierarchy& mesh, const Load& f) {
  if (f.dual) {
    if (f.dual->size() != mesh.fine.num_interior())
      throw std::invalid_argument("load vector length mismatch");
    return *f.dual;
  }
  if (!f.callable) throw std::invalid_argument("empty load");
  const FemFunction fn = nodal_interpolate(mesh, Level::fine, f.callable);
  return assemble_mass(mesh.fine) * fn.coeffs;
}

Objective make_linear_elliptic(std::shared_ptr<const MeshHierarchy> mesh,
                               const Load& f) {
  Objective obj;
  obj.mesh = mesh;
  obj.smooth = std::make_shared<QuadraticSmooth>(assemble_stiffness(mesh->fine),
                                                 resolve_load(*mesh, f));
  obj.meta.p = 2.0;
  obj.meta.q = 2.0;
  obj.meta.norm_exponent = 2.0;
  obj.meta.problem_id = "linear";
  return obj;
}

Objective make_s_laplacian(std::shared_ptr<const MeshHierarchy> mesh, double s,
                           const Load& f, std::optional<double> eps) {
  if (!(s > 1.0) || s == 2.0)
    throw std::invalid_argument(
        "s-Laplacian requires s > 1 and s != 2 (use the linear elliptic "
        "objective for s = 2)");
  const double eps_value = eps ? *eps : (s > 2.0 ? 0.0 : 1e-10);
  Objective obj;
  obj.mesh = mesh;
  obj.smooth = std::make_shared<SLaplacianSmooth>(mesh, s,
                                                  resolve_load(*mesh, f),
                                                  eps_value);
  if (s > 2.0) {
    obj.meta.p = s;
    obj.meta.q = 2.0;
  } else {
    obj.meta.p = 2.0;
    obj.meta.q = s;
  }
  obj.meta.norm_exponent = s;
  obj.meta.problem_id = "slap";
  return obj;
}

Objective make_l1_obstacle(std::shared_ptr<const MeshHierarchy> mesh,
                           const Load& f, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("l1 weight must be >= 0");
  Objective obj;
  obj.mesh = mesh;
  obj.smooth = std::make_shared<QuadraticSmooth>(assemble_stiffness(mesh->fine),
                                                 resolve_load(*mesh, f));
  obj.nonsmooth.kind = NonsmoothKind::weighted_abs;
  obj.nonsmooth.weights = lambda * lumped_masses(mesh->fine);
  obj.meta.p = 2.0;
  obj.meta.q = 2.0;
  obj.meta.problem_id = "l1obstacle";
  return obj;
}

Objective make_obstacle_constrained(std::shared_ptr<const MeshHierarchy> mesh,
                                    const Load& f, const ObstacleData& data) {
  if (data.lower.level != Level::fine)
    throw std::invalid_argument("obstacle must live on the fine level");
  if (data.lower.coeffs.size() != mesh->fine.num_interior())
    throw std::invalid_argument("obstacle length mismatch");
  if (!data.lower.coeffs.allFinite())
    throw std::invalid_argument("obstacle must be finite");
  Objective obj;
  obj.mesh = mesh;
  obj.smooth = std::make_shared<QuadraticSmooth>(assemble_stiffness(mesh->fine),
                                                 resolve_load(*mesh, f));
  obj.nonsmooth.kind = NonsmoothKind::lower_obstacle;
  obj.nonsmooth.lower = data.lower.coeffs;
  obj.meta.p = 2.0;
  obj.meta.q = 2.0;
  obj.meta.problem_id = "obstacle";
  return obj;
}

Objective make_block_separable(const std::vector<int>& sizes, const Mat& A,
                               const Vec& b, const Vec& l1_weights) {
  const int n = std::accumulate(sizes.begin(), sizes.end(), 0);
  if (sizes.empty() || n <= 0)
    throw std::invalid_argument("block sizes must be positive");
  for (int m : sizes)
    if (m <= 0) throw std::invalid_argument("block sizes must be positive");
  if (A.rows() != n || A.cols() != n || b.size() != n ||
      l1_weights.size() != n)
    throw std::invalid_argument("block-separable data dimensions disagree");
  if (!A.isApprox(A.transpose(), 1e-12))
    throw std::invalid_argument("quadratic matrix must be symmetric");
  Eigen::LLT<Mat> llt(A);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("quadratic matrix must be positive definite");
  if ((l1_weights.array() < 0.0).any())
    throw std::invalid_argument("l1 weights must be nonnegative");

  Objective obj;
  obj.smooth = std::make_shared<QuadraticSmooth>(A.sparseView(), b);
  obj.nonsmooth.kind = NonsmoothKind::weighted_abs;
  obj.nonsmooth.weights = l1_weights;
  obj.meta.p = 2.0;
  obj.meta.q = 2.0;
  obj.meta.block_sizes = sizes;
  Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
  obj.meta.lipschitz = es.eigenvalues().maxCoeff();
  obj.meta.problem_id = "bcd";
  return obj;
}

double bregman(const SmoothPart& f, const Vec& u, const Vec& v) {
  return f.value(u) - f.value(v) - f.gradient(v).dot(u - v);
}

double error_norm(const Objective& objective, const Vec& v) {
  if (!objective.mesh) return v.norm();
  return w1s_norm(*objective.mesh, FemFunction{Level::fine, v},
                  objective.meta.norm_exponent);
}

} // namespace asmopt
