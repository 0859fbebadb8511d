#pragma once

#include <vector>

#include <Eigen/Dense>

namespace stagpatch {

struct Assignment {
  std::vector<int> row_to_col;
  double cost = 0.0;
};

// Minimum total cost assignment of every row to a distinct column
// (rows <= cols), Hungarian method with potentials.
Assignment min_cost_assignment(const Eigen::MatrixXd& cost);

}  // namespace stagpatch
