#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

#include "wmixnet/network.hpp"
#include "wmixnet/variational_em.hpp"

namespace wmixnet {

struct SpectralResult {
  HardPartition partition;
  bool all_zero = false;  // no edges: the partition is a round-robin placeholder
};

/// Absolute-value spectral clustering.
///
/// Builds L = D^{-1/2} A D^{-1/2} from the weights (symmetrized as
/// (A + A')/2 when directed; degrees are sums of |A_ij| floored at 1e-10),
/// embeds the nodes with the Q eigenvectors of largest |eigenvalue|,
/// normalizes the embedding rows and runs seeded k-means++ with 10 restarts.
/// Labels are renumbered by first appearance. Throws std::invalid_argument
/// when Q > n or Q < 1.
SpectralResult absolute_spectral_clustering(const Network& network, int groups, std::uint64_t seed);

/// Seeded k-means++ with Lloyd iterations, best of `restarts` by
/// within-cluster sum of squares (ties to the earliest restart).
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10);

/// Coefficients of a one-group covariate fit, used to form the residual
/// network before spectral clustering.
Eigen::VectorXd one_group_covariate_effect(const Network& network, const ModelSpec& spec);

/// Spectral clustering of the raw network, or of the residual network when
/// spec uses covariates, softened with eps = 0.1 / Q.
SoftAssignment initial_tau(const Network& network, const ModelSpec& spec, int groups, std::uint64_t seed);

/// The target group has fewer than two members.
class UnsplittableGroup : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Splits one group of a (Q-1)-group fit in two by spectral clustering of
/// the (residual) subnetwork induced by its members. The second half gets the
/// new label Q-1; every other node keeps its hardened label.
SoftAssignment split_init(const FitResult& previous, int target_group, const Network& network, std::uint64_t seed);

/// Merges groups a and b of a (Q+1)-group fit by adding their tau columns;
/// the merged column takes the smaller index and later columns shift left.
SoftAssignment merge_init(const FitResult& previous, int group_a, int group_b);

/// Column merge on a bare tau matrix.
SoftAssignment merge_columns(const SoftAssignment& tau, int group_a, int group_b);

}  // namespace wmixnet
