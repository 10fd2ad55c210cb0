#include "dyad_kernel.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "wmixnet/edge_model.hpp"

namespace wmixnet::detail {

namespace {

// One dyad statistic S (n x n, zero diagonal) with its Q x Q coefficient
// matrix A, contributing S_ij * A(q,l) to L_ij(q,l).
struct Statistic {
  enum class Kind { off_diagonal_ones, sparse, dense };
  Kind kind;
  SparseWeights sparse;
  SparseWeights sparse_t;
  Eigen::MatrixXd dense;
  Eigen::MatrixXd coeff;
};

Statistic ones(Eigen::MatrixXd coeff) {
  return Statistic{Statistic::Kind::off_diagonal_ones, {}, {}, {}, std::move(coeff)};
}

Statistic sparse(SparseWeights s, Eigen::MatrixXd coeff) {
  SparseWeights t = s.transpose();
  return Statistic{Statistic::Kind::sparse, std::move(s), std::move(t), {}, std::move(coeff)};
}

Statistic dense(Eigen::MatrixXd s, Eigen::MatrixXd coeff) {
  s.diagonal().setZero();
  return Statistic{Statistic::Kind::dense, {}, {}, std::move(s), std::move(coeff)};
}

// log f_ql(w) = sum_k S_k(i,j) A_k(q,l)
class LinearKernel final : public DyadKernel {
 public:
  LinearKernel(bool directed, std::vector<Statistic> stats) : directed_(directed), stats_(std::move(stats)) {}

  Eigen::MatrixXd potentials(const Eigen::MatrixXd& tau) const override {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(tau.rows(), tau.cols());
    const Eigen::RowVectorXd s = tau.colwise().sum();
    for (const auto& st : stats_) {
      const Eigen::MatrixXd st_tau = apply(st, tau, s, false);
      out.noalias() += st_tau * st.coeff.transpose();
      if (directed_) {
        const Eigen::MatrixXd stt_tau = apply(st, tau, s, true);
        out.noalias() += stt_tau * st.coeff;
      }
    }
    return out;
  }

  Eigen::RowVectorXd node_potential(const Eigen::MatrixXd& tau, Eigen::Index i) const override {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(tau.cols());
    const Eigen::RowVectorXd s = tau.colwise().sum();
    for (const auto& st : stats_) {
      out.noalias() += apply_row(st, tau, s, i, false) * st.coeff.transpose();
      if (directed_) out.noalias() += apply_row(st, tau, s, i, true) * st.coeff;
    }
    return out;
  }

  double dyad_term(const Eigen::MatrixXd& tau) const override {
    const Eigen::RowVectorXd s = tau.colwise().sum();
    double total = 0.0;
    for (const auto& st : stats_) {
      const Eigen::MatrixXd blocks = tau.transpose() * apply(st, tau, s, false);
      total += blocks.cwiseProduct(st.coeff).sum();
    }
    return directed_ ? total : 0.5 * total;
  }

 private:
  static Eigen::MatrixXd apply(const Statistic& st, const Eigen::MatrixXd& tau, const Eigen::RowVectorXd& s,
                               bool transposed) {
    switch (st.kind) {
      case Statistic::Kind::off_diagonal_ones: return Eigen::VectorXd::Ones(tau.rows()) * s - tau;
      case Statistic::Kind::sparse: return (transposed ? st.sparse_t : st.sparse) * tau;
      case Statistic::Kind::dense:
        if (transposed) return st.dense.transpose() * tau;
        return st.dense * tau;
    }
    return {};
  }

  static Eigen::RowVectorXd apply_row(const Statistic& st, const Eigen::MatrixXd& tau, const Eigen::RowVectorXd& s,
                                      Eigen::Index i, bool transposed) {
    switch (st.kind) {
      case Statistic::Kind::off_diagonal_ones: return s - tau.row(i);
      case Statistic::Kind::sparse: {
        const SparseWeights& m = transposed ? st.sparse_t : st.sparse;
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(tau.cols());
        for (SparseWeights::InnerIterator it(m, i); it; ++it) r.noalias() += it.value() * tau.row(it.col());
        return r;
      }
      case Statistic::Kind::dense:
        if (transposed) return st.dense.col(i).transpose() * tau;
        return st.dense.row(i) * tau;
    }
    return {};
  }

  bool directed_;
  std::vector<Statistic> stats_;
};

class DenseKernel final : public DyadKernel {
 public:
  DenseKernel(const ModelSpec& spec, const Network& network, const Parameters& params)
      : n_(static_cast<Eigen::Index>(network.size())), q_(params.groups()), directed_(network.directed()) {
    const auto QQ = static_cast<std::size_t>(q_ * q_);
    table_.assign(static_cast<std::size_t>(n_ * n_) * QQ, 0.0);
    const Eigen::MatrixXd w = network.dense_weights();
    network.for_each_dyad([&](std::size_t i, std::size_t j) {
      const auto y = network.covariate(i, j);
      const double wij = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      double* lij = at(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      double* lji = at(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      for (int q = 0; q < q_; ++q) {
        for (int l = 0; l < q_; ++l) {
          const double v = log_density_unchecked(spec, wij, q, l, y, params);
          lij[q * q_ + l] = v;
          if (!directed_) lji[l * q_ + q] = v;
        }
      }
    });
  }

  Eigen::MatrixXd potentials(const Eigen::MatrixXd& tau) const override {
    Eigen::MatrixXd out(n_, q_);
    for (Eigen::Index i = 0; i < n_; ++i) out.row(i) = node_potential(tau, i);
    return out;
  }

  Eigen::RowVectorXd node_potential(const Eigen::MatrixXd& tau, Eigen::Index i) const override {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(q_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (j == i) continue;
      const double* lij = at(i, j);
      const double* lji = at(j, i);
      for (int q = 0; q < q_; ++q) {
        double acc = 0.0;
        for (int l = 0; l < q_; ++l) {
          acc += tau(j, l) * lij[q * q_ + l];
          if (directed_) acc += tau(j, l) * lji[l * q_ + q];
        }
        out(q) += acc;
      }
    }
    return out;
  }

  double dyad_term(const Eigen::MatrixXd& tau) const override {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = directed_ ? 0 : i + 1; j < n_; ++j) {
        if (i == j) continue;
        const double* lij = at(i, j);
        for (int q = 0; q < q_; ++q)
          for (int l = 0; l < q_; ++l) total += tau(i, q) * tau(j, l) * lij[q * q_ + l];
      }
    }
    return total;
  }

 private:
  double* at(Eigen::Index i, Eigen::Index j) { return table_.data() + (i * n_ + j) * q_ * q_; }
  const double* at(Eigen::Index i, Eigen::Index j) const { return table_.data() + (i * n_ + j) * q_ * q_; }

  Eigen::Index n_;
  int q_;
  bool directed_;
  std::vector<double> table_;
};

SparseWeights map_nonzeros(const SparseWeights& w, double (*fn)(double, double), double arg) {
  SparseWeights out = w;
  for (Eigen::Index i = 0; i < out.outerSize(); ++i)
    for (SparseWeights::InnerIterator it(out, i); it; ++it) it.valueRef() = fn(it.value(), arg);
  return out;
}

Eigen::MatrixXd log_clamped(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double v) { return std::log(std::max(v, kProbabilityFloor)); });
}

// eta_ij = beta'y_ij, zero diagonal.
Eigen::MatrixXd linear_predictors(const Network& network, const Eigen::VectorXd& beta) {
  const auto n = static_cast<Eigen::Index>(network.size());
  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto y = network.covariate(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      double e = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) e += beta(static_cast<Eigen::Index>(k)) * y[k];
      eta(i, j) = e;
    }
  }
  return eta;
}

}  // namespace

std::unique_ptr<DyadKernel> make_dense_kernel(const ModelSpec& spec, const Network& network,
                                              const Parameters& params) {
  return std::make_unique<DenseKernel>(spec, network, params);
}

std::unique_ptr<DyadKernel> make_kernel(const ModelSpec& spec, const Network& network, const Parameters& params) {
  const int Q = params.groups();
  const Eigen::MatrixXd all_ones = Eigen::MatrixXd::Ones(Q, Q);
  const Eigen::MatrixXd& conn = params.connectivity;
  const bool directed = network.directed();
  std::vector<Statistic> stats;

  if (spec.covariates == CovariateMode::none) {
    switch (spec.family) {
      case Family::bernoulli: {
        const Eigen::MatrixXd log_p1 = log_clamped(conn);
        const Eigen::MatrixXd log_p0 = log_clamped((1.0 - conn.array()).matrix());
        stats.push_back(sparse(network.weights(), log_p1 - log_p0));
        stats.push_back(ones(log_p0));
        break;
      }
      case Family::poisson: {
        stats.push_back(sparse(network.weights(), log_clamped(conn)));
        stats.push_back(ones(-conn));
        stats.push_back(sparse(map_nonzeros(network.weights(), [](double w, double) { return -std::lgamma(w + 1.0); }, 0.0),
                               all_ones));
        break;
      }
      case Family::gaussian: {
        const double s2 = *params.sigma2;
        stats.push_back(sparse(network.weights(), conn / s2));
        stats.push_back(ones((-conn.array().square() / (2.0 * s2) - 0.5 * std::log(2.0 * std::numbers::pi * s2)).matrix()));
        stats.push_back(sparse(map_nonzeros(network.weights(), [](double w, double s) { return -w * w / (2.0 * s); }, s2),
                               all_ones));
        break;
      }
    }
    return std::make_unique<LinearKernel>(directed, std::move(stats));
  }

  if (spec.covariates == CovariateMode::homogeneous && spec.family == Family::poisson) {
    const Eigen::MatrixXd eta = linear_predictors(network, *params.beta);
    const Eigen::MatrixXd w = network.dense_weights();
    Eigen::MatrixXd c = w.cwiseProduct(eta) - w.unaryExpr([](double v) { return std::lgamma(v + 1.0); });
    stats.push_back(sparse(network.weights(), log_clamped(conn)));
    stats.push_back(dense(eta.array().exp().matrix(), -conn));
    stats.push_back(dense(std::move(c), all_ones));
    return std::make_unique<LinearKernel>(directed, std::move(stats));
  }

  if (spec.covariates == CovariateMode::homogeneous && spec.family == Family::gaussian) {
    const double s2 = *params.sigma2;
    const Eigen::MatrixXd r = network.dense_weights() - linear_predictors(network, *params.beta);
    stats.push_back(dense(r, conn / s2));
    stats.push_back(ones((-conn.array().square() / (2.0 * s2) - 0.5 * std::log(2.0 * std::numbers::pi * s2)).matrix()));
    stats.push_back(dense(-r.cwiseProduct(r) / (2.0 * s2), all_ones));
    return std::make_unique<LinearKernel>(directed, std::move(stats));
  }

  return make_dense_kernel(spec, network, params);
}

}  // namespace wmixnet::detail
