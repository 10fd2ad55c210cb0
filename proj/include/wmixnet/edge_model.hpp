#pragma once

#include <span>
#include <stdexcept>

#include "wmixnet/model_spec.hpp"
#include "wmixnet/network.hpp"
#include "wmixnet/parameters.hpp"
#include "wmixnet/random.hpp"

namespace wmixnet {

/// Probabilities and rates below this value are clamped before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

/// Log-density of one observation and its derivatives with respect to the
/// block intercept `a` and the linear predictor `eta`.
struct LocalTerms {
  double value = 0.0;
  double d_a = 0.0;
  double d_eta = 0.0;
  double d_aa = 0.0;
  double d_a_eta = 0.0;
  double d_eta_eta = 0.0;
};

/// One family of conditional edge laws. The block parameter `conn` is pi,
/// lambda or mu; `eta` is the covariate linear predictor beta'y, and
/// `covariates` says whether the law is the covariate variant at all.
///
/// New laws plug in by implementing this interface and registering the
/// family in edge_law().
class EdgeLaw {
 public:
  virtual ~EdgeLaw() = default;

  virtual Family family() const = 0;
  virtual bool in_support(double w) const = 0;
  virtual double log_density(double w, double conn, double eta, double sigma2, bool covariates) const = 0;
  virtual double sample(double conn, double eta, double sigma2, bool covariates, Rng& rng) const = 0;

  // Newton parameterization of the block parameter used by covariate M-steps.
  virtual double to_intercept(double conn) const = 0;
  virtual double from_intercept(double a) const = 0;
  virtual double min_intercept() const = 0;
  virtual double max_intercept() const = 0;

  /// Block-parameter-dependent part of the log-density of a covariate law,
  /// with derivatives. For the Gaussian law the value is -r^2/2; sigma2 is
  /// profiled out separately.
  virtual LocalTerms local_terms(double w, double a, double eta, bool with_derivatives) const = 0;
};

const EdgeLaw& edge_law(Family family);

/// beta'y (homogeneous) or beta_ql'y (heterogeneous); 0 without covariates.
double linear_predictor(const ModelSpec& spec, int q, int l, std::span<const double> y, const Parameters& params);

/// log f_ql(w | y). Throws std::domain_error when w is outside the law's
/// support and std::invalid_argument when covariates are missing or unexpected.
double log_density(const ModelSpec& spec, double w, int q, int l, std::span<const double> y,
                   const Parameters& params);

/// Same as log_density without argument checks; for inner loops.
double log_density_unchecked(const ModelSpec& spec, double w, int q, int l, std::span<const double> y,
                             const Parameters& params);

/// Draws w from F_ql(y).
double sample_edge(const ModelSpec& spec, int q, int l, std::span<const double> y, const Parameters& params,
                   Rng& rng);

/// Free connectivity-side parameters:
/// B(1 + het p) + hom p + (gaussian ? 1 : 0), B = Q^2 directed, Q(Q+1)/2 undirected.
long parameter_count(const ModelSpec& spec, int groups, std::size_t covariate_dim, bool directed);

/// Throws std::invalid_argument when the network cannot be modeled by spec:
/// weights outside the support, or a covariate model on a network without
/// covariates.
void check_compatible(const ModelSpec& spec, const Network& network);

/// Checks the Parameters invariants for spec and Q groups; throws
/// std::invalid_argument naming the first violation.
void check_parameters(const ModelSpec& spec, const Parameters& params, std::size_t covariate_dim,
                      bool directed);

struct MStepInfo {
  bool degenerate = false;
  int newton_iterations = 0;
};

/// The inner GLM of a covariate M-step hit its iteration cap.
class MStepError : public std::runtime_error {
 public:
  MStepError(const std::string& what, Parameters best) : std::runtime_error(what), best_(std::move(best)) {}
  const Parameters& best() const { return best_; }

 private:
  Parameters best_;
};

struct MStepOptions {
  int max_newton_iterations = 50;
  double newton_tolerance = 1e-6;
  /// A group with sum_i tau_iq below this fraction of n keeps its previous parameters.
  double degenerate_mass = 1e-8;
};

/// Maximizes the variational objective over the parameters with tau fixed.
///
/// alpha is the column mean of tau. Without covariates connectivity is the
/// tau_iq tau_jl weighted dyad mean and sigma2 the pooled weighted mean
/// squared residual. With covariates a projected Newton iteration with step
/// halving maximizes the weighted log-likelihood, starting from warm_start
/// when it has the right shape.
Parameters m_step(const ModelSpec& spec, const Network& network, const SoftAssignment& tau,
                  const Parameters* warm_start = nullptr, MStepInfo* info = nullptr,
                  const MStepOptions& options = {});

}  // namespace wmixnet
