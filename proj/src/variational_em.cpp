#include "wmixnet/variational_em.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dyad_kernel.hpp"
#include "wmixnet/model_selection.hpp"

namespace wmixnet {

namespace {

double entropy_and_mixing(const Eigen::MatrixXd& tau, const Eigen::VectorXd& alpha) {
  double total = 0.0;
  for (Eigen::Index q = 0; q < tau.cols(); ++q) {
    const double log_alpha = std::log(std::max(alpha(q), std::numeric_limits<double>::min()));
    for (Eigen::Index i = 0; i < tau.rows(); ++i) {
      const double t = tau(i, q);
      if (t > 0.0) total += t * (log_alpha - std::log(t));
    }
  }
  return total;
}

double objective(const detail::DyadKernel& kernel, const Eigen::VectorXd& alpha, const Eigen::MatrixXd& tau) {
  return entropy_and_mixing(tau, alpha) + kernel.dyad_term(tau);
}

void softmax_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, double floor) {
  const double m = row.maxCoeff();
  row = (row.array() - m).exp().matrix();
  row /= row.sum();
  row = row.cwiseMax(floor);
  row /= row.sum();
}

Eigen::RowVectorXd log_alpha_row(const Eigen::VectorXd& alpha) {
  return alpha.unaryExpr([](double a) { return std::log(std::max(a, std::numeric_limits<double>::min())); })
      .transpose();
}

struct EStepState {
  Eigen::MatrixXd tau;
  double objective;
  int sweeps = 0;
  bool converged = false;
};

EStepState run_e_step(const detail::DyadKernel& kernel, const Eigen::VectorXd& alpha, Eigen::MatrixXd tau,
                      const FitConfig& config) {
  const Eigen::RowVectorXd log_alpha = log_alpha_row(alpha);
  EStepState st{std::move(tau), 0.0};
  st.objective = objective(kernel, alpha, st.tau);
  if (st.tau.cols() == 1) {
    st.converged = true;
    return st;
  }
  for (int sweep = 0; sweep < config.e_step_max_iterations; ++sweep) {
    Eigen::MatrixXd next = kernel.potentials(st.tau);
    next.rowwise() += log_alpha;
    for (Eigen::Index i = 0; i < next.rows(); ++i) softmax_row(next.row(i), config.tau_floor);
    const double delta = (next - st.tau).cwiseAbs().maxCoeff();
    double next_objective = objective(kernel, alpha, next);
    if (delta < config.e_step_tolerance) {
      if (next_objective >= st.objective) {
        st.tau = std::move(next);
        st.objective = next_objective;
        st.sweeps = sweep + 1;
      }
      st.converged = true;
      break;
    }
    if (next_objective < st.objective) {
      // Synchronous updates can overshoot; node-by-node updates cannot.
      next = st.tau;
      for (Eigen::Index i = 0; i < next.rows(); ++i) {
        Eigen::RowVectorXd row = kernel.node_potential(next, i) + log_alpha;
        softmax_row(row, config.tau_floor);
        next.row(i) = row;
      }
      next_objective = objective(kernel, alpha, next);
      if (next_objective < st.objective) break;
    }
    st.tau = std::move(next);
    st.objective = next_objective;
    st.sweeps = sweep + 1;
  }
  return st;
}

}  // namespace

void FitConfig::check() const {
  if (max_em_iterations < 1 || e_step_max_iterations < 1) throw std::invalid_argument("iteration caps must be >= 1");
  if (!(em_tolerance > 0.0) || !(e_step_tolerance > 0.0)) throw std::invalid_argument("tolerances must be > 0");
  if (!(tau_floor > 0.0) || tau_floor >= 0.5) throw std::invalid_argument("tau_floor must lie in (0, 0.5)");
}

const char* to_string(InitSource source) {
  switch (source) {
    case InitSource::spectral: return "spectral";
    case InitSource::split: return "split";
    case InitSource::merge: return "merge";
    case InitSource::external: return "external";
  }
  return "?";
}

EStepResult e_step(const Network& network, const ModelSpec& spec, const Parameters& params,
                   const SoftAssignment& tau_init, const FitConfig& config) {
  if (tau_init.size() != network.size() || tau_init.groups() != params.groups()) {
    throw std::invalid_argument("tau and parameters have inconsistent dimensions");
  }
  const auto kernel = detail::make_kernel(spec, network, params);
  EStepState st = run_e_step(*kernel, params.alpha, tau_init.matrix(), config);
  return EStepResult{SoftAssignment(std::move(st.tau), config.tau_floor), st.sweeps, st.converged};
}

double pseudo_likelihood(const Network& network, const ModelSpec& spec, const Parameters& params,
                         const SoftAssignment& tau) {
  if (tau.size() != network.size() || tau.groups() != params.groups()) {
    throw std::invalid_argument("tau and parameters have inconsistent dimensions");
  }
  const auto kernel = detail::make_kernel(spec, network, params);
  return objective(*kernel, params.alpha, tau.matrix());
}

double complete_log_likelihood(const Network& network, const ModelSpec& spec, const Parameters& params,
                               const HardPartition& partition) {
  return pseudo_likelihood(network, spec, params, SoftAssignment::one_hot(partition));
}

FitResult fit(const Network& network, const ModelSpec& spec, int groups, const SoftAssignment& tau_init,
              const FitConfig& config, const Parameters* warm_start) {
  config.check();
  if (groups < 1) throw std::invalid_argument("need at least one group");
  if (tau_init.groups() != groups || tau_init.size() != network.size()) {
    throw std::invalid_argument("initial tau has the wrong shape");
  }
  check_compatible(spec, network);

  FitResult r;
  r.spec = spec;
  r.groups = groups;
  Eigen::MatrixXd tau = tau_init.matrix();
  floor_and_normalize_rows(tau, config.tau_floor);

  bool have_state = false;
  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= config.max_em_iterations; ++it) {
    MStepInfo info;
    Parameters next;
    const SoftAssignment current(tau, config.tau_floor);
    try {
      next = m_step(spec, network, current, have_state ? &r.params : warm_start, &info);
    } catch (const MStepError& e) {
      r.degenerate = true;
      r.converged = false;
      if (!have_state) {
        r.params = e.best();
        r.objective = pseudo_likelihood(network, spec, r.params, current);
        r.tau = current;
        have_state = true;
      }
      break;
    }
    r.degenerate = r.degenerate || info.degenerate;

    const auto kernel = detail::make_kernel(spec, network, next);
    const double after_m = objective(*kernel, next.alpha, tau);
    if (have_state && after_m < previous) {
      r.converged = previous - after_m <= config.em_tolerance * std::abs(previous);
      break;
    }

    EStepState es = run_e_step(*kernel, next.alpha, tau, config);
    r.params = std::move(next);
    tau = std::move(es.tau);
    r.objective = es.objective;
    r.objective_trace.push_back(es.objective);
    r.iterations = it;
    const bool small_change = have_state && std::abs(es.objective - previous) <= config.em_tolerance * std::abs(previous);
    previous = es.objective;
    have_state = true;
    if (small_change) {
      r.converged = true;
      break;
    }
  }
  // r.tau is already set when the very first M-step failed
  if (r.iterations > 0 || r.tau.groups() == 0) r.tau = SoftAssignment::from_normalized(std::move(tau));
  r.icl = icl(r, network);
  return r;
}

}  // namespace wmixnet
