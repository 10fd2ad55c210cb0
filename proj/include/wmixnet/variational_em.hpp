#pragma once

#include <cstdint>
#include <vector>

#include "wmixnet/edge_model.hpp"
#include "wmixnet/network.hpp"

namespace wmixnet {

struct FitConfig {
  int max_em_iterations = 200;
  double em_tolerance = 1e-6;  // relative change of the objective
  int e_step_max_iterations = 50;
  double e_step_tolerance = 1e-5;  // max absolute tau change
  double tau_floor = 1e-10;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a tolerance or cap is out of range.
  void check() const;
};

enum class InitSource { spectral, split, merge, external };

const char* to_string(InitSource source);

struct FitResult {
  ModelSpec spec;
  int groups = 0;
  Parameters params;
  SoftAssignment tau;
  double objective = 0.0;  // variational pseudo-likelihood J
  double icl = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
  InitSource init_source = InitSource::spectral;
  std::vector<double> objective_trace;  // J after every accepted EM iteration
};

struct EStepResult {
  SoftAssignment tau;
  int sweeps = 0;
  bool converged = false;
};

/// Mean-field fixed point for tau with the parameters held fixed.
///
/// Each sweep updates every row synchronously:
///   log tau_iq <- log alpha_q + sum_{j != i} sum_l tau_jl [log f_ql(w_ij) + log f_lq(w_ji)]
/// (the second term only for directed networks), normalized by log-sum-exp
/// and floored at config.tau_floor. A synchronous sweep that would lower
/// the objective is replaced by a node-by-node sweep, and the iteration stops
/// if that does not help either, so the objective never decreases.
EStepResult e_step(const Network& network, const ModelSpec& spec, const Parameters& params,
                   const SoftAssignment& tau_init, const FitConfig& config);

/// J = sum tau log alpha - sum tau log tau + sum_dyads sum_ql tau_iq tau_jl log f_ql(w_ij | y_ij),
/// dyads ordered when directed and unordered otherwise.
double pseudo_likelihood(const Network& network, const ModelSpec& spec, const Parameters& params,
                         const SoftAssignment& tau);

/// Complete-data log-likelihood at a hard partition with the given parameters.
double complete_log_likelihood(const Network& network, const ModelSpec& spec, const Parameters& params,
                               const HardPartition& partition);

/// Alternates m_step and e_step until the relative change of J drops below
/// config.em_tolerance or the iteration cap. An M-step failure or an M-step
/// that lowers J stops the loop and returns the last good state, flagged.
FitResult fit(const Network& network, const ModelSpec& spec, int groups, const SoftAssignment& tau_init,
              const FitConfig& config, const Parameters* warm_start = nullptr);

}  // namespace wmixnet
