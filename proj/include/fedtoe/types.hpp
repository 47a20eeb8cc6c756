#pragma once

#include <Eigen/Dense>

namespace fedtoe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Eigen::Index;

}  // namespace fedtoe
