#include "wmixnet/network.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace wmixnet {

std::span<const double> Network::covariate(std::size_t i, std::size_t j) const {
  if (p_ == 0) return {};
  return covariates_[i * n_ + j];
}

double Network::dyad_count() const {
  const double n = static_cast<double>(n_);
  return directed_ ? n * (n - 1.0) : n * (n - 1.0) / 2.0;
}

NetworkBuilder::NetworkBuilder(std::size_t n, bool directed, std::size_t covariate_dim)
    : n_(n), directed_(directed), p_(covariate_dim) {
  if (n == 0) throw std::invalid_argument("network must have at least one node");
  if (p_ > 0) covariates_.assign(n * n, {});
}

void NetworkBuilder::check_dyad(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) throw std::out_of_range("node index out of range");
  if (i == j) throw std::invalid_argument("self-loops are not stored");
}

NetworkBuilder& NetworkBuilder::set_entry(std::size_t i, std::size_t j, double w) {
  check_dyad(i, j);
  entries_.emplace_back(static_cast<int>(i), static_cast<int>(j), w);
  return *this;
}

NetworkBuilder& NetworkBuilder::set_weight(std::size_t i, std::size_t j, double w) {
  set_entry(i, j, w);
  if (!directed_) set_entry(j, i, w);
  return *this;
}

NetworkBuilder& NetworkBuilder::set_covariate_entry(std::size_t i, std::size_t j, std::vector<double> y) {
  check_dyad(i, j);
  if (p_ == 0) throw std::invalid_argument("network was declared without covariates");
  covariates_[i * n_ + j] = std::move(y);
  return *this;
}

NetworkBuilder& NetworkBuilder::set_covariates(std::size_t i, std::size_t j, std::vector<double> y) {
  if (!directed_) set_covariate_entry(j, i, y);
  return set_covariate_entry(i, j, std::move(y));
}

Network NetworkBuilder::build() const {
  Network net;
  net.n_ = n_;
  net.directed_ = directed_;
  net.p_ = p_;
  net.weights_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  // Later writes to the same dyad win.
  net.weights_.setFromTriplets(entries_.begin(), entries_.end(), [](double, double latest) { return latest; });
  net.weights_.prune(0.0);
  net.weights_.makeCompressed();
  net.covariates_ = covariates_;
  return net;
}

std::vector<Violation> validate(const Network& network) {
  std::vector<Violation> out;
  const std::size_t n = network.size();
  const auto& w = network.weights();
  for (Eigen::Index i = 0; i < w.outerSize(); ++i) {
    for (SparseWeights::InnerIterator it(w, i); it; ++it) {
      const auto r = static_cast<std::size_t>(it.row());
      const auto c = static_cast<std::size_t>(it.col());
      if (r == c) {
        out.push_back({r, c, "self-loop stored"});
      } else if (!std::isfinite(it.value())) {
        out.push_back({r, c, "non-finite weight"});
      } else if (!network.directed() && r < c && w.coeff(it.col(), it.row()) != it.value()) {
        out.push_back({r, c, "asymmetric weight in undirected network"});
      } else if (!network.directed() && r > c && w.coeff(it.col(), it.row()) == 0.0) {
        // the mirror is absent, so the r < c branch never sees this pair
        out.push_back({c, r, "asymmetric weight in undirected network"});
      }
    }
  }
  if (network.has_covariates()) {
    const std::size_t p = network.covariate_dim();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto y = network.covariate(i, j);
        if (y.size() != p) {
          out.push_back({i, j, "covariate arity " + std::to_string(y.size()) + ", expected " + std::to_string(p)});
          continue;
        }
        if (!network.directed() && i < j) {
          const auto yt = network.covariate(j, i);
          if (yt.size() == p && !std::equal(y.begin(), y.end(), yt.begin())) {
            out.push_back({i, j, "asymmetric covariates in undirected network"});
          }
        }
      }
    }
  }
  return out;
}

bool HardPartition::degenerate() const {
  const auto sizes = group_sizes();
  return std::any_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 0; });
}

std::vector<std::size_t> HardPartition::group_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(groups), 0);
  for (int l : labels) ++sizes.at(static_cast<std::size_t>(l));
  return sizes;
}

void floor_and_normalize_rows(Eigen::MatrixXd& tau, double floor) {
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    auto row = tau.row(i);
    row = row.cwiseMax(floor);
    row /= row.sum();
  }
}

SoftAssignment::SoftAssignment(Eigen::MatrixXd tau, double floor) : tau_(std::move(tau)) {
  if (tau_.cols() < 1) throw std::invalid_argument("soft assignment needs at least one group");
  floor_and_normalize_rows(tau_, floor);
}

SoftAssignment SoftAssignment::uniform(std::size_t n, int groups) {
  return SoftAssignment(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), groups, 1.0 / groups));
}

SoftAssignment SoftAssignment::soften(const HardPartition& partition, double eps) {
  const int Q = partition.groups;
  Eigen::MatrixXd tau = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(partition.labels.size()), Q, eps);
  for (std::size_t i = 0; i < partition.labels.size(); ++i) {
    tau(static_cast<Eigen::Index>(i), partition.labels[i]) = 1.0 - (Q - 1) * eps;
  }
  return SoftAssignment(std::move(tau), 0.0);
}

SoftAssignment SoftAssignment::from_normalized(Eigen::MatrixXd tau) {
  if (tau.cols() < 1) throw std::invalid_argument("soft assignment needs at least one group");
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    if (std::abs(tau.row(i).sum() - 1.0) > 1e-10 || tau.row(i).minCoeff() < 0.0) {
      throw std::invalid_argument("row " + std::to_string(i) + " of tau is not on the simplex");
    }
  }
  SoftAssignment s;
  s.tau_ = std::move(tau);
  return s;
}

SoftAssignment SoftAssignment::one_hot(const HardPartition& partition) {
  SoftAssignment s;
  s.tau_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(partition.labels.size()), partition.groups);
  for (std::size_t i = 0; i < partition.labels.size(); ++i) {
    s.tau_(static_cast<Eigen::Index>(i), partition.labels[i]) = 1.0;
  }
  return s;
}

HardPartition harden(const SoftAssignment& soft) {
  HardPartition out;
  out.groups = soft.groups();
  out.labels.resize(soft.size());
  const auto& tau = soft.matrix();
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    int best = 0;
    for (int q = 1; q < tau.cols(); ++q) {
      if (tau(i, q) > tau(i, best)) best = q;
    }
    out.labels[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

Network residual_network(const Network& network, std::span<const double> beta, const ModelSpec& spec) {
  if (beta.size() != network.covariate_dim()) {
    throw std::invalid_argument("beta has length " + std::to_string(beta.size()) + " but the network has " +
                                std::to_string(network.covariate_dim()) + " covariates");
  }
  const std::size_t n = network.size();
  NetworkBuilder out(n, network.directed());
  const Eigen::MatrixXd w = network.dense_weights();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto y = network.covariate(i, j);
      const double eta = std::inner_product(beta.begin(), beta.end(), y.begin(), 0.0);
      const double wij = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      double r = wij;
      switch (spec.family) {
        case Family::poisson: r = wij / std::exp(eta); break;
        case Family::gaussian: r = wij - eta; break;
        case Family::bernoulli: r = wij / logistic(eta); break;
      }
      if (r != 0.0) out.set_entry(i, j, r);
    }
  }
  return out.build();
}

Network induced_subnetwork(const Network& network, std::span<const std::size_t> nodes) {
  const std::size_t m = nodes.size();
  NetworkBuilder out(m, network.directed(), network.covariate_dim());
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      const double w = network.weight(nodes[a], nodes[b]);
      if (w != 0.0) out.set_entry(a, b, w);
      if (network.has_covariates()) {
        const auto y = network.covariate(nodes[a], nodes[b]);
        out.set_covariate_entry(a, b, {y.begin(), y.end()});
      }
    }
  }
  return out.build();
}

}  // namespace wmixnet
