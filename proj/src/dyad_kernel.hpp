#pragma once

#include <memory>

#include <Eigen/Dense>

#include "wmixnet/model_spec.hpp"
#include "wmixnet/network.hpp"
#include "wmixnet/parameters.hpp"

namespace wmixnet::detail {

/// Evaluates the dyad part of the variational objective for fixed
/// parameters, L_ij(q,l) = log f_ql(w_ij | y_ij).
class DyadKernel {
 public:
  virtual ~DyadKernel() = default;

  /// P_iq = sum_{j != i} sum_l tau_jl [L_ij(q,l) + (directed ? L_ji(l,q) : 0)],
  /// the derivative of the dyad term with respect to tau_iq.
  virtual Eigen::MatrixXd potentials(const Eigen::MatrixXd& tau) const = 0;

  /// Row i of potentials(tau).
  virtual Eigen::RowVectorXd node_potential(const Eigen::MatrixXd& tau, Eigen::Index i) const = 0;

  /// sum over modeled dyads of sum_ql tau_iq tau_jl L_ij(q,l).
  virtual double dyad_term(const Eigen::MatrixXd& tau) const = 0;
};

/// Picks the cheapest exact representation for spec: matrix products over
/// dyad statistics when the log-density is linear in them, a dense
/// per-dyad tensor otherwise.
std::unique_ptr<DyadKernel> make_kernel(const ModelSpec& spec, const Network& network, const Parameters& params);

/// Always the dense tensor; used to cross-check the fast path.
std::unique_ptr<DyadKernel> make_dense_kernel(const ModelSpec& spec, const Network& network,
                                              const Parameters& params);

}  // namespace wmixnet::detail
