#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace asmopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

} // namespace asmopt
