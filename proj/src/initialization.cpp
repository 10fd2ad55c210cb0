#include "wmixnet/initialization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "wmixnet/random.hpp"

namespace wmixnet {

namespace {

constexpr double kDegreeFloor = 1e-10;
constexpr int kLloydIterations = 300;

std::vector<int> relabel_by_first_appearance(const std::vector<int>& labels, int k) {
  std::vector<int> map(static_cast<std::size_t>(k), -1);
  int next = 0;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int& m = map[static_cast<std::size_t>(labels[i])];
    if (m < 0) m = next++;
    out[i] = m;
  }
  return out;
}

struct KMeansRun {
  std::vector<int> labels;
  double inertia = 0.0;
};

KMeansRun kmeans_once(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);

  // k-means++ seeding
  auto first = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n));
  centers.row(0) = x.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  Eigen::VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index pick = -1;
    const double total = d2.sum();
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= d2(i);
        if (u < 0.0 && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (d2(i) > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // every point coincides with a center: take a distinct unused point
      std::vector<Eigen::Index> unused;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) unused.push_back(i);
      pick = unused[static_cast<std::size_t>(rng.uniform() * static_cast<double>(unused.size()))];
    }
    centers.row(c) = x.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  KMeansRun run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < kLloydIterations; ++iter) {
    bool changed = false;
    Eigen::VectorXd dist(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist(i) = best_d;
      if (run.labels[static_cast<std::size_t>(i)] != best) {
        run.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    // refill empty clusters with the point farthest from its center
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : run.labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])] > 1 &&
            (counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])] <= 1 || dist(i) > dist(far)))
          far = i;
      }
      if (counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])] <= 1) continue;
      --counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])];
      run.labels[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
      dist(far) = 0.0;
      changed = true;
    }
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centers.row(run.labels[static_cast<std::size_t>(i)]) += x.row(i);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) /= counts[static_cast<std::size_t>(c)];
    }
    if (!changed) break;
  }
  run.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    run.inertia += (x.row(i) - centers.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return run;
}

Network clustering_input(const Network& network, const ModelSpec& spec, const Eigen::VectorXd& beta) {
  if (!spec.uses_covariates()) return network;
  return residual_network(network, std::span<const double>(beta.data(), static_cast<std::size_t>(beta.size())), spec);
}

}  // namespace

std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts) {
  if (k < 1 || k > points.rows()) throw std::invalid_argument("k-means needs 1 <= k <= number of points");
  KMeansRun best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    KMeansRun run = kmeans_once(points, k, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return relabel_by_first_appearance(best.labels, k);
}

SpectralResult absolute_spectral_clustering(const Network& network, int groups, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(network.size());
  if (groups < 1) throw std::invalid_argument("need at least one group");
  if (groups > n) {
    throw std::invalid_argument("cannot cluster " + std::to_string(n) + " nodes into " + std::to_string(groups) +
                                " groups");
  }
  SpectralResult out;
  out.partition.groups = groups;
  if (groups == 1) {
    out.partition.labels.assign(static_cast<std::size_t>(n), 0);
    return out;
  }
  Eigen::MatrixXd a = network.dense_weights();
  if (network.directed()) a = 0.5 * (a + a.transpose()).eval();
  if (a.cwiseAbs().maxCoeff() == 0.0) {
    out.all_zero = true;
    out.partition.labels.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out.partition.labels[static_cast<std::size_t>(i)] = static_cast<int>(i % groups);
    return out;
  }
  const Eigen::VectorXd inv_sqrt_degree =
      a.cwiseAbs().rowwise().sum().unaryExpr([](double d) { return 1.0 / std::sqrt(std::max(d, kDegreeFloor)); });
  const Eigen::MatrixXd lap = inv_sqrt_degree.asDiagonal() * a * inv_sqrt_degree.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
  const Eigen::VectorXd& values = eig.eigenvalues();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    const double ax = std::abs(values(x));
    const double ay = std::abs(values(y));
    if (ax != ay) return ax > ay;
    return values(x) > values(y);
  });

  Eigen::MatrixXd embedding(n, groups);
  for (int c = 0; c < groups; ++c) embedding.col(c) = eig.eigenvectors().col(order[static_cast<std::size_t>(c)]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 0.0) embedding.row(i) /= norm;
  }
  out.partition.labels = kmeans(embedding, groups, seed);
  return out;
}

Eigen::VectorXd one_group_covariate_effect(const Network& network, const ModelSpec& spec) {
  if (!spec.uses_covariates()) return {};
  const Parameters one = m_step(spec, network, SoftAssignment::uniform(network.size(), 1));
  return spec.covariates == CovariateMode::homogeneous ? *one.beta : one.block_coefficients(0, 0);
}

SoftAssignment initial_tau(const Network& network, const ModelSpec& spec, int groups, std::uint64_t seed) {
  if (groups < 1) throw std::invalid_argument("need at least one group");
  const Network input = clustering_input(network, spec, one_group_covariate_effect(network, spec));
  const SpectralResult sc = absolute_spectral_clustering(input, groups, seed);
  return SoftAssignment::soften(sc.partition, 0.1 / groups);
}

SoftAssignment split_init(const FitResult& previous, int target_group, const Network& network, std::uint64_t seed) {
  const int prev_q = previous.groups;
  if (target_group < 0 || target_group >= prev_q) throw std::invalid_argument("target group out of range");
  const HardPartition hard = harden(previous.tau);
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < hard.labels.size(); ++i)
    if (hard.labels[i] == target_group) members.push_back(i);
  if (members.size() < 2) {
    throw UnsplittableGroup("group " + std::to_string(target_group) + " has " + std::to_string(members.size()) +
                            " member(s) and cannot be split");
  }
  const ModelSpec& spec = previous.spec;
  Eigen::VectorXd beta;
  if (spec.covariates == CovariateMode::homogeneous && previous.params.beta) {
    beta = *previous.params.beta;
  } else if (spec.uses_covariates()) {
    beta = one_group_covariate_effect(network, spec);
  }
  const Network sub = clustering_input(induced_subnetwork(network, members), spec, beta);
  const SpectralResult halves = absolute_spectral_clustering(sub, 2, seed);

  HardPartition next = hard;
  next.groups = prev_q + 1;
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (halves.partition.labels[m] == 1) next.labels[members[m]] = prev_q;
  }
  return SoftAssignment::soften(next, 0.1 / next.groups);
}

SoftAssignment merge_columns(const SoftAssignment& tau, int group_a, int group_b) {
  const int Q = tau.groups();
  if (group_a == group_b || group_a < 0 || group_b < 0 || group_a >= Q || group_b >= Q) {
    throw std::invalid_argument("merge needs two distinct valid groups");
  }
  const int keep = std::min(group_a, group_b);
  const int drop = std::max(group_a, group_b);
  const Eigen::MatrixXd& t = tau.matrix();
  Eigen::MatrixXd out(t.rows(), Q - 1);
  for (int q = 0, c = 0; q < Q; ++q) {
    if (q == drop) continue;
    out.col(c) = t.col(q);
    if (q == keep) out.col(c) += t.col(drop);
    ++c;
  }
  return SoftAssignment::from_normalized(std::move(out));
}

SoftAssignment merge_init(const FitResult& previous, int group_a, int group_b) {
  return merge_columns(previous.tau, group_a, group_b);
}

}  // namespace wmixnet
