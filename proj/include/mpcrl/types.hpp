#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace mpcrl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using TripletList = std::vector<Triplet>;

}  // namespace mpcrl
