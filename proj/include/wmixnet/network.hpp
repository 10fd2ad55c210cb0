#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "wmixnet/model_spec.hpp"

namespace wmixnet {

using SparseWeights = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Weighted network with optional per-dyad covariates. Nodes are 0-based.
///
/// Weights are stored sparsely as ordered entries: an undirected network
/// built through NetworkBuilder::set_weight holds both (i,j) and (j,i), so
/// the weight matrix is symmetric. Covariates, when p > 0, are stored for
/// every ordered off-diagonal dyad. The diagonal is never stored.
///
/// A Network is immutable once built and may be shared across threads.
class Network {
 public:
  Network() = default;

  std::size_t size() const { return n_; }
  bool directed() const { return directed_; }
  std::size_t covariate_dim() const { return p_; }
  bool has_covariates() const { return p_ > 0; }

  double weight(std::size_t i, std::size_t j) const { return weights_.coeff(i, j); }
  const SparseWeights& weights() const { return weights_; }
  Eigen::MatrixXd dense_weights() const { return Eigen::MatrixXd(weights_); }

  /// Covariate vector of the ordered dyad (i,j). Empty when p = 0 or i == j.
  std::span<const double> covariate(std::size_t i, std::size_t j) const;

  /// Number of dyads the likelihood runs over: n(n-1) directed, n(n-1)/2 undirected.
  double dyad_count() const;

  /// Calls fn(i, j) for every modeled dyad: ordered i != j when directed,
  /// i < j when undirected.
  template <typename Fn>
  void for_each_dyad(Fn&& fn) const {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = directed_ ? 0 : i + 1; j < n_; ++j) {
        if (i != j) fn(i, j);
      }
    }
  }

 private:
  friend class NetworkBuilder;

  std::size_t n_ = 0;
  bool directed_ = false;
  std::size_t p_ = 0;
  SparseWeights weights_;
  std::vector<std::vector<double>> covariates_;  // n*n ordered dyads, empty if p == 0
};

/// Accumulates dyads, then produces an immutable Network.
class NetworkBuilder {
 public:
  NetworkBuilder(std::size_t n, bool directed, std::size_t covariate_dim = 0);

  /// Sets w(i,j), and w(j,i) too when the network is undirected. Zero weights
  /// are not stored. Self-loops throw std::invalid_argument.
  NetworkBuilder& set_weight(std::size_t i, std::size_t j, double w);

  /// Sets exactly one orientation, even for undirected networks.
  NetworkBuilder& set_entry(std::size_t i, std::size_t j, double w);

  /// Sets Y(i,j), and Y(j,i) when undirected. The arity is not checked here
  /// so that validate() can report it.
  NetworkBuilder& set_covariates(std::size_t i, std::size_t j, std::vector<double> y);

  /// Covariates on exactly one orientation.
  NetworkBuilder& set_covariate_entry(std::size_t i, std::size_t j, std::vector<double> y);

  std::size_t size() const { return n_; }
  bool directed() const { return directed_; }

  Network build() const;

 private:
  void check_dyad(std::size_t i, std::size_t j) const;

  std::size_t n_;
  bool directed_;
  std::size_t p_;
  std::vector<Eigen::Triplet<double>> entries_;
  std::vector<std::vector<double>> covariates_;
};

struct Violation {
  std::size_t i = 0;  // 0-based dyad, when the violation concerns one
  std::size_t j = 0;
  std::string message;
};

/// Checks the Network invariants; empty iff the network is valid.
std::vector<Violation> validate(const Network& network);

/// Hard assignment of nodes to Q groups.
struct HardPartition {
  std::vector<int> labels;
  int groups = 0;

  /// True when some group in 0..Q-1 has no member.
  bool degenerate() const;
  std::vector<std::size_t> group_sizes() const;
};

/// Variational membership matrix: n x Q, rows on the simplex.
class SoftAssignment {
 public:
  SoftAssignment() = default;

  /// Takes ownership of tau, clamps entries below floor and renormalizes rows.
  explicit SoftAssignment(Eigen::MatrixXd tau, double floor = 1e-10);

  /// Uniform rows.
  static SoftAssignment uniform(std::size_t n, int groups);

  /// tau_iq = 1-(Q-1)eps on the assigned group, eps elsewhere.
  static SoftAssignment soften(const HardPartition& partition, double eps);

  /// Trusts that rows already lie on the simplex (checked to 1e-10); no
  /// rescaling, so row sums are kept bit-for-bit.
  static SoftAssignment from_normalized(Eigen::MatrixXd tau);

  /// Exact one-hot rows, no flooring.
  static SoftAssignment one_hot(const HardPartition& partition);

  const Eigen::MatrixXd& matrix() const { return tau_; }
  std::size_t size() const { return static_cast<std::size_t>(tau_.rows()); }
  int groups() const { return static_cast<int>(tau_.cols()); }
  double operator()(std::size_t i, int q) const { return tau_(static_cast<Eigen::Index>(i), q); }

 private:
  Eigen::MatrixXd tau_;
};

/// Clamps entries below floor to floor, then renormalizes every row to sum 1.
void floor_and_normalize_rows(Eigen::MatrixXd& tau, double floor);

/// MAP labels, ties toward the lowest group index.
HardPartition harden(const SoftAssignment& soft);

/// Removes a fitted covariate effect from the weights: Poisson divides by
/// exp(beta'Y), Gaussian subtracts beta'Y, Bernoulli divides by
/// logistic(beta'Y) without clamping. The result has no covariates.
Network residual_network(const Network& network, std::span<const double> beta, const ModelSpec& spec);

/// Subnetwork induced by the given nodes (in the given order), covariates kept.
Network induced_subnetwork(const Network& network, std::span<const std::size_t> nodes);

inline double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace wmixnet
