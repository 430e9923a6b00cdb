#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sppm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Disjoint index sets covering 0..n-1.
using Partition = std::vector<std::vector<int>>;

}  // namespace sppm
