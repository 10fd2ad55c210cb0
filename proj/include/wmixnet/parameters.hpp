#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace wmixnet {

/// Mixing proportions plus the law-specific connectivity parameters.
///
/// `connectivity` holds pi (Bernoulli), lambda (Poisson) or mu (Gaussian).
/// `beta` is set for homogeneous covariate effects; `block_beta` holds one
/// coefficient vector per ordered block (q,l), stored at q * Q + l, for
/// heterogeneous effects.
struct Parameters {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd connectivity;
  std::optional<double> sigma2;
  std::optional<Eigen::VectorXd> beta;
  std::vector<Eigen::VectorXd> block_beta;

  int groups() const { return static_cast<int>(alpha.size()); }

  const Eigen::VectorXd& block_coefficients(int q, int l) const {
    return block_beta[static_cast<std::size_t>(q * groups() + l)];
  }
  Eigen::VectorXd& block_coefficients(int q, int l) {
    return block_beta[static_cast<std::size_t>(q * groups() + l)];
  }
};

}  // namespace wmixnet
