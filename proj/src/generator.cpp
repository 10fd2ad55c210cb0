#include "wmixnet/generator.hpp"

#include <random>
#include <stdexcept>

#include "wmixnet/random.hpp"

namespace wmixnet {

namespace {

enum Stream : std::uint64_t { kMembership = 1, kCovariate = 2, kEdge = 3 };

int draw_group(const Eigen::VectorXd& alpha, Rng& rng) {
  double u = rng.uniform();
  for (Eigen::Index q = 0; q + 1 < alpha.size(); ++q) {
    u -= alpha(q);
    if (u < 0.0) return static_cast<int>(q);
  }
  return static_cast<int>(alpha.size() - 1);
}

std::vector<double> draw_covariates(const CovariateDistribution& dist, Rng& rng) {
  std::vector<double> y(dist.dim);
  if (dist.sampler == CovariateSampler::standard_normal) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : y) v = normal(rng);
  } else {
    for (double& v : y) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  return y;
}

}  // namespace

SampledNetwork sample_network(const ModelSpec& spec, const Parameters& params, std::size_t n,
                              const std::optional<CovariateDistribution>& covariates, bool directed,
                              std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("need at least one node");
  if (spec.uses_covariates() != covariates.has_value()) {
    throw std::invalid_argument("a covariate sampler is required exactly when the model uses covariates");
  }
  const std::size_t p = covariates ? covariates->dim : 0;
  if (covariates && p == 0) throw std::invalid_argument("covariate dimension must be positive");
  check_parameters(spec, params, p, directed);

  SampledNetwork out;
  out.truth.groups = params.groups();
  out.truth.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {kMembership, i}));
    out.truth.labels[i] = draw_group(params.alpha, rng);
  }

  NetworkBuilder builder(n, directed, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = directed ? 0 : i + 1; j < n; ++j) {
      if (i == j) continue;
      std::vector<double> y;
      if (covariates) {
        Rng rng(derive_seed(seed, {kCovariate, i, j}));
        y = draw_covariates(*covariates, rng);
      }
      Rng rng(derive_seed(seed, {kEdge, i, j}));
      const double w = sample_edge(spec, out.truth.labels[i], out.truth.labels[j], y, params, rng);
      if (w != 0.0) builder.set_weight(i, j, w);
      if (covariates) builder.set_covariates(i, j, std::move(y));
    }
  }
  out.network = builder.build();
  return out;
}

Parameters planted_parameters(const ModelSpec& spec, int groups, double within, double between,
                              std::size_t covariate_dim, double beta, double sigma2) {
  Parameters p;
  p.alpha = Eigen::VectorXd::Constant(groups, 1.0 / groups);
  p.connectivity = Eigen::MatrixXd::Constant(groups, groups, between);
  p.connectivity.diagonal().setConstant(within);
  if (spec.family == Family::gaussian) p.sigma2 = sigma2;
  const auto dim = static_cast<Eigen::Index>(covariate_dim);
  if (spec.covariates == CovariateMode::homogeneous) p.beta = Eigen::VectorXd::Constant(dim, beta);
  if (spec.covariates == CovariateMode::heterogeneous) {
    p.block_beta.assign(static_cast<std::size_t>(groups * groups), Eigen::VectorXd::Constant(dim, beta));
  }
  return p;
}

}  // namespace wmixnet
