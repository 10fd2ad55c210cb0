#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "wmixnet/network.hpp"
#include "wmixnet/variational_em.hpp"

namespace wmixnet {

/// Completed log-likelihood at the hardened tau minus
/// (parameter_count / 2) log M + ((Q - 1) / 2) log n, with M the number of
/// modeled dyads.
double icl(const FitResult& fit, const Network& network);

enum class Smoothing { none, minimal, exhaustive };

const char* to_string(Smoothing mode);
Smoothing parse_smoothing(std::string_view name);

enum class ReinitMode { ascend, descend };

const char* to_string(ReinitMode mode);

struct Reinitialization {
  ReinitMode mode = ReinitMode::ascend;
  int source_q = 0;
  int target_q = 0;
  int group_a = 0;   // split group, or first merged group
  int group_b = -1;  // second merged group (descend only)
  int pass = 0;
  double objective = 0.0;  // J of the refit
  bool accepted = false;
};

struct SweepResult {
  std::map<int, FitResult> per_q;
  int selected_q = 1;
  std::vector<Reinitialization> history;
  std::vector<int> unresolved;  // Q with J(Q) < J(Q-1) after smoothing
};

struct SweepOptions {
  std::optional<int> q_max;  // empty: automatic extension
  Smoothing smoothing = Smoothing::none;
  int threads = 1;
  int max_smoothing_passes = 5;
  int auto_window = 3;    // extend while the best Q is within this many of the largest Q
  int auto_start = 2;
};

/// Fits Q = 1..Qmax (or extends Q automatically), smooths, and selects the
/// ICL maximizer. Results do not depend on options.threads.
SweepResult sweep(const Network& network, const ModelSpec& spec, const SweepOptions& options,
                  const FitConfig& config);

/// Reinitializes fits from splits of Q-1 and merges of Q+1, keeping a refit
/// only when it strictly raises J. Candidates are fitted concurrently and
/// accepted in (Q, candidate) order. Recomputes selected_q and unresolved.
void smooth(SweepResult& state, Smoothing mode, const Network& network, const ModelSpec& spec,
            const FitConfig& config, int threads = 1, int max_passes = 5);

/// Argmax of ICL over per_q, ties within 1e-9 (relative) to the smaller Q.
int select_q(const std::map<int, FitResult>& per_q);

/// Q whose J is below that of Q-1, or whose ICL is a strict local minimum.
std::vector<int> smoothing_violations(const std::map<int, FitResult>& per_q);

struct LikelihoodRatioTest {
  double statistic = 0.0;
  long dof = 0;
  double p_value = 1.0;
  bool optimization_failure = false;  // J_with < J_without; statistic clamped to 0
};

/// 2 (J_with - J_without) against a chi-squared law with the parameter-count
/// difference as degrees of freedom.
LikelihoodRatioTest likelihood_ratio_test(const FitResult& fit_with, const FitResult& fit_without,
                                          const Network& network);

struct BenchmarkRecord {
  double t = 0.0;  // processor seconds
  std::size_t n = 0;
  int g = 0;
  std::size_t p = 0;
  ModelSpec model;
};

struct BenchmarkOptions {
  int planted_groups = 3;
  int q_max = 5;
  std::uint64_t seed = 0;
  FitConfig config;
};

struct BenchmarkReport {
  std::vector<BenchmarkRecord> records;
  double n_exponent = 0.0;
};

struct ReferenceScaling {
  static constexpr double n_exponent = 2.46;
  static constexpr double g_exponent = 2.1;
  static constexpr double covariate_base = 1.03;
  static constexpr double poisson_ratio = 3.9;
  static constexpr double prmh_ratio = 21.0;
  static constexpr double gaussian_ratio = 840.0;
  static constexpr double grmh_ratio = 1350.0;
};

/// Least-squares slope of log t on log n. Throws std::invalid_argument when
/// fewer than two distinct sizes are present.
double fit_log_log_exponent(std::span<const BenchmarkRecord> records);

/// Times single-threaded sweeps on planted networks of the given sizes.
BenchmarkReport benchmark(std::span<const std::size_t> sizes, const ModelSpec& spec, const BenchmarkOptions& options);

}  // namespace wmixnet
