#pragma once

#include <cstdint>
#include <optional>

#include "wmixnet/edge_model.hpp"
#include "wmixnet/network.hpp"

namespace wmixnet {

enum class CovariateSampler { standard_normal, bernoulli_half };

struct CovariateDistribution {
  CovariateSampler sampler = CovariateSampler::standard_normal;
  std::size_t dim = 1;
};

struct SampledNetwork {
  Network network;
  HardPartition truth;
};

/// Simulates the block model: Z_i ~ M(1, alpha) i.i.d., covariates per dyad
/// from `covariates`, then w_ij ~ F_{Z_i Z_j}(Y_ij). Undirected networks
/// draw each unordered dyad once. Every node and dyad has its own random
/// stream derived from the seed, so the result does not depend on the
/// iteration order.
SampledNetwork sample_network(const ModelSpec& spec, const Parameters& params, std::size_t n,
                              const std::optional<CovariateDistribution>& covariates, bool directed,
                              std::uint64_t seed);

/// Parameters with `within` on the connectivity diagonal and `between`
/// elsewhere, uniform alpha, sigma2 for Gaussian laws and every covariate
/// coefficient set to `beta`.
Parameters planted_parameters(const ModelSpec& spec, int groups, double within, double between,
                              std::size_t covariate_dim = 0, double beta = 0.0, double sigma2 = 1.0);

}  // namespace wmixnet
