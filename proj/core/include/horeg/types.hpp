#pragma once

#include <Eigen/Dense>

namespace horeg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

}  // namespace horeg
