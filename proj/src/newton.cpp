#include "newton.hpp"

#include <algorithm>
#include <cmath>

namespace wmixnet::detail {

namespace {

// Solves (-H + lambda I) d = g on the free coordinates, raising lambda until
// the damped matrix is positive definite.
Eigen::VectorXd ascent_direction(const Eigen::MatrixXd& hess, const Eigen::VectorXd& grad) {
  const Eigen::Index m = grad.size();
  Eigen::MatrixXd neg = -hess;
  Eigen::LLT<Eigen::MatrixXd> llt(neg);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd d = llt.solve(grad);
    if (d.allFinite()) return d;
  }
  double scale = neg.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) scale = 1.0;
  for (double lambda = 1e-8 * scale; lambda < 1e30; lambda *= 10.0) {
    Eigen::MatrixXd damped = neg + lambda * Eigen::MatrixXd::Identity(m, m);
    Eigen::LLT<Eigen::MatrixXd> damped_llt(damped);
    if (damped_llt.info() == Eigen::Success) {
      Eigen::VectorXd d = damped_llt.solve(grad);
      if (d.allFinite()) return d;
    }
  }
  return grad;
}

}  // namespace

NewtonResult maximize(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                      const Eigen::VectorXd& upper, const std::vector<bool>& free, int max_iterations,
                      double tolerance) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (free[static_cast<std::size_t>(k)]) idx.push_back(k);
  }
  const auto project = [&](Eigen::VectorXd& x) {
    for (Eigen::Index k : idx) x(k) = std::clamp(x(k), lower(k), upper(k));
  };

  NewtonResult res;
  res.x = std::move(x0);
  project(res.x);
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd hess(n, n);
  res.value = f(res.x, &grad, &hess);
  if (idx.empty()) {
    res.converged = true;
    return res;
  }

  const auto m = static_cast<Eigen::Index>(idx.size());
  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    Eigen::VectorXd g(m);
    Eigen::MatrixXd h(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      g(a) = grad(idx[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < m; ++b) h(a, b) = hess(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    const Eigen::VectorXd d = ascent_direction(h, g);

    bool accepted = false;
    Eigen::VectorXd candidate = res.x;
    double candidate_value = res.value;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      candidate = res.x;
      for (Eigen::Index a = 0; a < m; ++a) candidate(idx[static_cast<std::size_t>(a)]) += t * d(a);
      project(candidate);
      candidate_value = f(candidate, nullptr, nullptr);
      if (std::isfinite(candidate_value) && candidate_value >= res.value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // no ascent left at working precision
      res.converged = true;
      break;
    }

    const double step = (candidate - res.x).cwiseAbs().maxCoeff();
    const double size = res.x.cwiseAbs().maxCoeff();
    res.x = std::move(candidate);
    res.value = f(res.x, &grad, &hess);
    if (step <= tolerance * (1.0 + size)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace wmixnet::detail
