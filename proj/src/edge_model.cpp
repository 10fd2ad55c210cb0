#include "wmixnet/edge_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "newton.hpp"

namespace wmixnet {

namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

class BernoulliLaw final : public EdgeLaw {
 public:
  Family family() const override { return Family::bernoulli; }
  bool in_support(double w) const override { return w == 0.0 || w == 1.0; }

  double success(double conn, double eta, bool covariates) const {
    return covariates ? conn * logistic(eta) : conn;
  }

  double log_density(double w, double conn, double eta, double, bool covariates) const override {
    const double p = success(conn, eta, covariates);
    return w != 0.0 ? std::log(std::max(p, kProbabilityFloor)) : std::log(std::max(1.0 - p, kProbabilityFloor));
  }

  double sample(double conn, double eta, double, bool covariates, Rng& rng) const override {
    return rng.uniform() < success(conn, eta, covariates) ? 1.0 : 0.0;
  }

  double to_intercept(double conn) const override { return conn; }
  double from_intercept(double a) const override { return a; }
  double min_intercept() const override { return kProbabilityFloor; }
  double max_intercept() const override { return 1.0; }

  // p = a * g(eta), g the logistic function.
  LocalTerms local_terms(double w, double a, double eta, bool with_derivatives) const override {
    const double g = logistic(eta);
    const double p = clamp_probability(a * g);
    LocalTerms t;
    t.value = w != 0.0 ? std::log(p) : std::log(1.0 - p);
    if (!with_derivatives) return t;
    const double d1 = w / p - (1.0 - w) / (1.0 - p);
    const double d2 = -w / (p * p) - (1.0 - w) / ((1.0 - p) * (1.0 - p));
    const double gg = g * (1.0 - g);
    const double p_a = g;
    const double p_e = a * gg;
    t.d_a = d1 * p_a;
    t.d_eta = d1 * p_e;
    t.d_aa = d2 * p_a * p_a;
    t.d_a_eta = d2 * p_a * p_e + d1 * gg;
    t.d_eta_eta = d2 * p_e * p_e + d1 * a * gg * (1.0 - 2.0 * g);
    return t;
  }
};

class PoissonLaw final : public EdgeLaw {
 public:
  Family family() const override { return Family::poisson; }
  bool in_support(double w) const override { return w >= 0.0 && std::floor(w) == w && std::isfinite(w); }

  double log_density(double w, double conn, double eta, double, bool) const override {
    const double rate = conn * std::exp(eta);
    return w * std::log(std::max(rate, kProbabilityFloor)) - rate - std::lgamma(w + 1.0);
  }

  double sample(double conn, double eta, double, bool, Rng& rng) const override {
    const double rate = conn * std::exp(eta);
    if (!(rate > 0.0)) return 0.0;
    std::poisson_distribution<long long> dist(rate);
    return static_cast<double>(dist(rng));
  }

  double to_intercept(double conn) const override { return std::log(std::max(conn, kProbabilityFloor)); }
  double from_intercept(double a) const override { return std::exp(a); }
  double min_intercept() const override { return std::log(kProbabilityFloor); }
  double max_intercept() const override { return 700.0; }

  LocalTerms local_terms(double w, double a, double eta, bool with_derivatives) const override {
    const double mu = std::exp(a + eta);
    LocalTerms t;
    t.value = w * (a + eta) - mu;
    if (!with_derivatives) return t;
    t.d_a = t.d_eta = w - mu;
    t.d_aa = t.d_a_eta = t.d_eta_eta = -mu;
    return t;
  }
};

class GaussianLaw final : public EdgeLaw {
 public:
  Family family() const override { return Family::gaussian; }
  bool in_support(double w) const override { return std::isfinite(w); }

  double log_density(double w, double conn, double eta, double sigma2, bool) const override {
    const double r = w - conn - eta;
    return -0.5 * r * r / sigma2 - 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
  }

  double sample(double conn, double eta, double sigma2, bool, Rng& rng) const override {
    std::normal_distribution<double> dist(conn + eta, std::sqrt(sigma2));
    return dist(rng);
  }

  double to_intercept(double conn) const override { return conn; }
  double from_intercept(double a) const override { return a; }
  double min_intercept() const override { return -std::numeric_limits<double>::infinity(); }
  double max_intercept() const override { return std::numeric_limits<double>::infinity(); }

  LocalTerms local_terms(double w, double a, double eta, bool with_derivatives) const override {
    const double r = w - a - eta;
    LocalTerms t;
    t.value = -0.5 * r * r;
    if (!with_derivatives) return t;
    t.d_a = t.d_eta = r;
    t.d_aa = t.d_a_eta = t.d_eta_eta = -1.0;
    return t;
  }
};

int block_count(int Q, bool directed) { return directed ? Q * Q : Q * (Q + 1) / 2; }

// Undirected blocks (q,l) and (l,q) share one index.
int block_index(int q, int l, int Q, bool directed) {
  if (directed) return q * Q + l;
  const int a = std::min(q, l);
  const int b = std::max(q, l);
  return a * Q - a * (a - 1) / 2 + (b - a);
}

double sigma2_of(const Parameters& params) { return params.sigma2.value_or(1.0); }

bool shapes_match(const ModelSpec& spec, const Parameters& p, int Q, std::size_t dim) {
  if (p.groups() != Q || p.connectivity.rows() != Q || p.connectivity.cols() != Q) return false;
  if (spec.family == Family::gaussian && !p.sigma2) return false;
  if (spec.covariates == CovariateMode::homogeneous && (!p.beta || static_cast<std::size_t>(p.beta->size()) != dim))
    return false;
  if (spec.covariates == CovariateMode::heterogeneous) {
    if (p.block_beta.size() != static_cast<std::size_t>(Q * Q)) return false;
    for (const auto& b : p.block_beta)
      if (static_cast<std::size_t>(b.size()) != dim) return false;
  }
  return true;
}

std::vector<bool> degenerate_groups(const SoftAssignment& tau, const MStepOptions& options) {
  const Eigen::VectorXd mass = tau.matrix().colwise().sum();
  std::vector<bool> out(static_cast<std::size_t>(tau.groups()));
  for (int q = 0; q < tau.groups(); ++q) {
    out[static_cast<std::size_t>(q)] = mass(q) < options.degenerate_mass * static_cast<double>(tau.size());
  }
  return out;
}

// Closed-form weighted dyad means: N_ql / D_ql over ordered dyads. Undirected
// sums are symmetrized so the result is exactly symmetric.
struct BlockMoments {
  Eigen::MatrixXd weight_sum;  // N
  Eigen::MatrixXd pair_mass;   // D
};

BlockMoments block_moments(const Network& network, const Eigen::MatrixXd& tau) {
  BlockMoments m;
  const Eigen::MatrixXd wt = network.weights() * tau;
  m.weight_sum = tau.transpose() * wt;
  const Eigen::VectorXd s = tau.colwise().sum().transpose();
  m.pair_mass = s * s.transpose() - tau.transpose() * tau;
  if (!network.directed()) {
    m.weight_sum = 0.5 * (m.weight_sum + m.weight_sum.transpose()).eval();
    m.pair_mass = 0.5 * (m.pair_mass + m.pair_mass.transpose()).eval();
  }
  return m;
}

double global_mean(const Network& network) {
  const double n = static_cast<double>(network.size());
  const double ordered = n * (n - 1.0);
  return ordered > 0 ? network.weights().sum() / ordered : 0.0;
}

Parameters closed_form(const ModelSpec& spec, const Network& network, const SoftAssignment& tau,
                       const Parameters* warm, const std::vector<bool>& degenerate) {
  const int Q = tau.groups();
  Parameters out;
  out.alpha = tau.matrix().colwise().mean().transpose();
  const BlockMoments m = block_moments(network, tau.matrix());
  out.connectivity.resize(Q, Q);
  const double fallback = global_mean(network);
  for (int q = 0; q < Q; ++q) {
    for (int l = 0; l < Q; ++l) {
      const bool frozen = degenerate[static_cast<std::size_t>(q)] || degenerate[static_cast<std::size_t>(l)];
      if (frozen || !(m.pair_mass(q, l) > 0.0)) {
        out.connectivity(q, l) = warm ? warm->connectivity(q, l) : fallback;
      } else {
        out.connectivity(q, l) = m.weight_sum(q, l) / m.pair_mass(q, l);
      }
    }
  }
  if (spec.family == Family::bernoulli) out.connectivity = out.connectivity.cwiseMax(0.0).cwiseMin(1.0);
  if (spec.family == Family::gaussian) {
    const auto& w = network.weights();
    const double squares = w.cwiseProduct(w).sum();
    const double ordered = static_cast<double>(network.size()) * (static_cast<double>(network.size()) - 1.0);
    const Eigen::MatrixXd& mu = out.connectivity;
    const double ss = squares - 2.0 * mu.cwiseProduct(m.weight_sum).sum() +
                      mu.cwiseProduct(mu).cwiseProduct(m.pair_mass).sum();
    out.sigma2 = std::max(ss / ordered, kProbabilityFloor);
  }
  return out;
}

// Variable layout for the covariate Newton solve:
//   homogeneous:   [a_0 .. a_{B-1}, beta_1 .. beta_p]
//   heterogeneous: [a_0, beta_0_1 .. beta_0_p, a_1, ...] one slab per block
struct Layout {
  int Q;
  int B;
  int p;
  bool directed;
  bool heterogeneous;

  int intercept(int block) const { return heterogeneous ? block * (1 + p) : block; }
  int coefficient(int block, int k) const { return heterogeneous ? block * (1 + p) + 1 + k : B + k; }
  int size() const { return heterogeneous ? B * (1 + p) : B + p; }
};

Parameters covariate_m_step(const ModelSpec& spec, const Network& network, const SoftAssignment& tau,
                            const Parameters* warm, const std::vector<bool>& degenerate,
                            const MStepOptions& options, MStepInfo* info) {
  const EdgeLaw& law = edge_law(spec.family);
  const int Q = tau.groups();
  const int p = static_cast<int>(network.covariate_dim());
  const bool directed = network.directed();
  const Layout layout{Q, block_count(Q, directed), p, directed, spec.covariates == CovariateMode::heterogeneous};
  const Eigen::MatrixXd& t = tau.matrix();

  // Starting point.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
  const bool warm_ok = warm && shapes_match(spec, *warm, Q, network.covariate_dim());
  Eigen::MatrixXd start_conn;
  if (warm_ok) {
    start_conn = warm->connectivity;
  } else {
    start_conn = closed_form(ModelSpec{spec.family, CovariateMode::none}, network, tau, nullptr, degenerate)
                     .connectivity;
    // logistic(0) = 1/2 halves the success probability
    if (spec.family == Family::bernoulli) start_conn = (2.0 * start_conn).cwiseMin(1.0);
  }
  for (int q = 0; q < Q; ++q) {
    for (int l = 0; l < Q; ++l) {
      const int b = block_index(q, l, Q, directed);
      x(layout.intercept(b)) = law.to_intercept(start_conn(q, l));
      if (warm_ok) {
        for (int k = 0; k < p; ++k) {
          x(layout.coefficient(b, k)) =
              layout.heterogeneous ? warm->block_coefficients(q, l)(k) : (*warm->beta)(k);
        }
      }
    }
  }

  Eigen::VectorXd lower = Eigen::VectorXd::Constant(layout.size(), -std::numeric_limits<double>::infinity());
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(layout.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> free(static_cast<std::size_t>(layout.size()), true);
  for (int q = 0; q < Q; ++q) {
    for (int l = 0; l < Q; ++l) {
      const int b = block_index(q, l, Q, directed);
      lower(layout.intercept(b)) = law.min_intercept();
      upper(layout.intercept(b)) = law.max_intercept();
      if (degenerate[static_cast<std::size_t>(q)] || degenerate[static_cast<std::size_t>(l)]) {
        free[static_cast<std::size_t>(layout.intercept(b))] = false;
        if (layout.heterogeneous) {
          for (int k = 0; k < p; ++k) free[static_cast<std::size_t>(layout.coefficient(b, k))] = false;
        }
      }
    }
  }

  std::vector<int> blocks(static_cast<std::size_t>(Q * Q));
  for (int q = 0; q < Q; ++q)
    for (int l = 0; l < Q; ++l) blocks[static_cast<std::size_t>(q * Q + l)] = block_index(q, l, Q, directed);
  const Eigen::MatrixXd w = network.dense_weights();

  const detail::Objective objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad,
                                          Eigen::MatrixXd* hess) {
    const bool derivs = grad != nullptr;
    if (derivs) {
      grad->setZero(layout.size());
      hess->setZero(layout.size(), layout.size());
    }
    double value = 0.0;
    std::vector<double> etas(static_cast<std::size_t>(layout.B));
    network.for_each_dyad([&](std::size_t i, std::size_t j) {
      const auto y = network.covariate(i, j);
      const double wij = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (layout.heterogeneous) {
        for (int b = 0; b < layout.B; ++b) {
          double e = 0.0;
          for (int k = 0; k < p; ++k) e += v(layout.coefficient(b, k)) * y[static_cast<std::size_t>(k)];
          etas[static_cast<std::size_t>(b)] = e;
        }
      } else {
        double e = 0.0;
        for (int k = 0; k < p; ++k) e += v(layout.coefficient(0, k)) * y[static_cast<std::size_t>(k)];
        std::fill(etas.begin(), etas.end(), e);
      }
      double shared_ee = 0.0;
      double shared_e = 0.0;
      for (int q = 0; q < Q; ++q) {
        const double tq = t(static_cast<Eigen::Index>(i), q);
        for (int l = 0; l < Q; ++l) {
          const double omega = tq * t(static_cast<Eigen::Index>(j), l);
          const int b = blocks[static_cast<std::size_t>(q * Q + l)];
          const int ia = layout.intercept(b);
          const LocalTerms lt = law.local_terms(wij, v(ia), etas[static_cast<std::size_t>(b)], derivs);
          value += omega * lt.value;
          if (!derivs) continue;
          (*grad)(ia) += omega * lt.d_a;
          (*hess)(ia, ia) += omega * lt.d_aa;
          for (int k = 0; k < p; ++k) {
            const double yk = y[static_cast<std::size_t>(k)];
            const int ik = layout.coefficient(b, k);
            (*hess)(ia, ik) += omega * lt.d_a_eta * yk;
            (*hess)(ik, ia) += omega * lt.d_a_eta * yk;
          }
          if (layout.heterogeneous) {
            for (int k = 0; k < p; ++k) {
              const double yk = y[static_cast<std::size_t>(k)];
              (*grad)(layout.coefficient(b, k)) += omega * lt.d_eta * yk;
              for (int m = 0; m < p; ++m) {
                (*hess)(layout.coefficient(b, k), layout.coefficient(b, m)) +=
                    omega * lt.d_eta_eta * yk * y[static_cast<std::size_t>(m)];
              }
            }
          } else {
            shared_e += omega * lt.d_eta;
            shared_ee += omega * lt.d_eta_eta;
          }
        }
      }
      if (derivs && !layout.heterogeneous) {
        for (int k = 0; k < p; ++k) {
          const double yk = y[static_cast<std::size_t>(k)];
          (*grad)(layout.B + k) += shared_e * yk;
          for (int m = 0; m < p; ++m) (*hess)(layout.B + k, layout.B + m) += shared_ee * yk * y[static_cast<std::size_t>(m)];
        }
      }
    });
    return value;
  };

  const detail::NewtonResult res = detail::maximize(objective, x, lower, upper, free,
                                                    options.max_newton_iterations, options.newton_tolerance);

  Parameters out;
  out.alpha = t.colwise().mean().transpose();
  out.connectivity.resize(Q, Q);
  if (layout.heterogeneous) out.block_beta.assign(static_cast<std::size_t>(Q * Q), Eigen::VectorXd::Zero(p));
  for (int q = 0; q < Q; ++q) {
    for (int l = 0; l < Q; ++l) {
      const int b = block_index(q, l, Q, directed);
      out.connectivity(q, l) = law.from_intercept(res.x(layout.intercept(b)));
      if (layout.heterogeneous) {
        for (int k = 0; k < p; ++k) out.block_coefficients(q, l)(k) = res.x(layout.coefficient(b, k));
      }
    }
  }
  if (!layout.heterogeneous) out.beta = res.x.segment(layout.B, p);

  if (spec.family == Family::gaussian) {
    double ss = 0.0;
    double mass = 0.0;
    network.for_each_dyad([&](std::size_t i, std::size_t j) {
      const auto y = network.covariate(i, j);
      const double wij = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      for (int q = 0; q < Q; ++q) {
        for (int l = 0; l < Q; ++l) {
          const double omega = t(static_cast<Eigen::Index>(i), q) * t(static_cast<Eigen::Index>(j), l);
          const double r = wij - out.connectivity(q, l) - linear_predictor(spec, q, l, y, out);
          ss += omega * r * r;
          mass += omega;
        }
      }
    });
    out.sigma2 = std::max(ss / mass, kProbabilityFloor);
  }

  if (info) info->newton_iterations = res.iterations;
  if (!res.converged) {
    throw MStepError("covariate M-step did not converge in " + std::to_string(options.max_newton_iterations) +
                         " Newton iterations",
                     std::move(out));
  }
  return out;
}

}  // namespace

const EdgeLaw& edge_law(Family family) {
  static const BernoulliLaw bernoulli;
  static const PoissonLaw poisson;
  static const GaussianLaw gaussian;
  switch (family) {
    case Family::bernoulli: return bernoulli;
    case Family::poisson: return poisson;
    case Family::gaussian: return gaussian;
  }
  throw std::logic_error("unknown family");
}

double linear_predictor(const ModelSpec& spec, int q, int l, std::span<const double> y, const Parameters& params) {
  switch (spec.covariates) {
    case CovariateMode::none: return 0.0;
    case CovariateMode::homogeneous: {
      const Eigen::VectorXd& b = *params.beta;
      double e = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) e += b(static_cast<Eigen::Index>(k)) * y[k];
      return e;
    }
    case CovariateMode::heterogeneous: {
      const Eigen::VectorXd& b = params.block_coefficients(q, l);
      double e = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) e += b(static_cast<Eigen::Index>(k)) * y[k];
      return e;
    }
  }
  return 0.0;
}

double log_density_unchecked(const ModelSpec& spec, double w, int q, int l, std::span<const double> y,
                             const Parameters& params) {
  return edge_law(spec.family)
      .log_density(w, params.connectivity(q, l), linear_predictor(spec, q, l, y, params), sigma2_of(params),
                   spec.uses_covariates());
}

double log_density(const ModelSpec& spec, double w, int q, int l, std::span<const double> y,
                   const Parameters& params) {
  if (!edge_law(spec.family).in_support(w)) {
    throw std::domain_error("weight " + std::to_string(w) + " is outside the support of the " +
                            std::string(to_string(spec.family)) + " law");
  }
  if (spec.uses_covariates() && y.empty()) throw std::invalid_argument(spec.name() + " requires covariates");
  if (q < 0 || l < 0 || q >= params.groups() || l >= params.groups()) throw std::out_of_range("group out of range");
  return log_density_unchecked(spec, w, q, l, y, params);
}

double sample_edge(const ModelSpec& spec, int q, int l, std::span<const double> y, const Parameters& params,
                   Rng& rng) {
  return edge_law(spec.family)
      .sample(params.connectivity(q, l), linear_predictor(spec, q, l, y, params), sigma2_of(params),
              spec.uses_covariates(), rng);
}

long parameter_count(const ModelSpec& spec, int groups, std::size_t covariate_dim, bool directed) {
  const long B = block_count(groups, directed);
  const long p = static_cast<long>(covariate_dim);
  const long het = spec.covariates == CovariateMode::heterogeneous ? 1 : 0;
  const long hom = spec.covariates == CovariateMode::homogeneous ? 1 : 0;
  return B * (1 + het * p) + hom * p + (spec.family == Family::gaussian ? 1 : 0);
}

void check_compatible(const ModelSpec& spec, const Network& network) {
  if (spec.uses_covariates() && !network.has_covariates()) {
    throw std::invalid_argument("model " + spec.name() + " requires covariates but the network has none");
  }
  if (!spec.uses_covariates() && network.has_covariates()) {
    throw std::invalid_argument("model " + spec.name() + " does not use covariates but the network carries " +
                                std::to_string(network.covariate_dim()));
  }
  const EdgeLaw& law = edge_law(spec.family);
  const auto& w = network.weights();
  for (Eigen::Index i = 0; i < w.outerSize(); ++i) {
    for (SparseWeights::InnerIterator it(w, i); it; ++it) {
      if (!law.in_support(it.value())) {
        throw std::invalid_argument("weight " + std::to_string(it.value()) + " on dyad (" +
                                    std::to_string(it.row() + 1) + "," + std::to_string(it.col() + 1) +
                                    ") is outside the support of model " + spec.name());
      }
    }
  }
}

void check_parameters(const ModelSpec& spec, const Parameters& params, std::size_t covariate_dim, bool directed) {
  const int Q = params.groups();
  if (Q < 1) throw std::invalid_argument("alpha is empty");
  if (std::abs(params.alpha.sum() - 1.0) > 1e-10 || params.alpha.minCoeff() < 0.0)
    throw std::invalid_argument("alpha is not on the simplex");
  if (!shapes_match(spec, params, Q, covariate_dim)) throw std::invalid_argument("parameter shapes do not match model");
  const auto& c = params.connectivity;
  switch (spec.family) {
    case Family::bernoulli:
      if (c.minCoeff() < 0.0 || c.maxCoeff() > 1.0) throw std::invalid_argument("pi outside [0,1]");
      break;
    case Family::poisson:
      if (c.minCoeff() < 0.0) throw std::invalid_argument("negative lambda");
      break;
    case Family::gaussian:
      if (!(*params.sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
      break;
  }
  if (!directed) {
    if (c != c.transpose()) throw std::invalid_argument("connectivity must be symmetric for undirected networks");
    if (spec.covariates == CovariateMode::heterogeneous) {
      for (int q = 0; q < Q; ++q)
        for (int l = 0; l < Q; ++l)
          if (params.block_coefficients(q, l) != params.block_coefficients(l, q))
            throw std::invalid_argument("block coefficients must be symmetric for undirected networks");
    }
  }
}

Parameters m_step(const ModelSpec& spec, const Network& network, const SoftAssignment& tau,
                  const Parameters* warm_start, MStepInfo* info, const MStepOptions& options) {
  if (tau.size() != network.size()) throw std::invalid_argument("tau has the wrong number of rows");
  const auto degenerate = degenerate_groups(tau, options);
  const bool any_degenerate = std::any_of(degenerate.begin(), degenerate.end(), [](bool b) { return b; });
  if (info) *info = MStepInfo{any_degenerate, 0};
  const Parameters* warm =
      warm_start && shapes_match(spec, *warm_start, tau.groups(), network.covariate_dim()) ? warm_start : nullptr;
  if (!spec.uses_covariates()) return closed_form(spec, network, tau, warm, degenerate);
  return covariate_m_step(spec, network, tau, warm, degenerate, options, info);
}

}  // namespace wmixnet
