#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace wmixnet::detail {

/// f(x, grad, hess): value at x; fills grad and hess when they are non-null.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*, Eigen::MatrixXd*)>;

struct NewtonResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped, projected Newton ascent with step halving. Coordinates with
/// free[k] == false never move. The box [lower, upper] is enforced by
/// clamping. Every accepted step weakly increases f.
NewtonResult maximize(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                      const Eigen::VectorXd& upper, const std::vector<bool>& free, int max_iterations,
                      double tolerance);

}  // namespace wmixnet::detail
