#include "wmixnet/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "wmixnet/generator.hpp"
#include "wmixnet/initialization.hpp"
#include "wmixnet/parallel.hpp"
#include "wmixnet/random.hpp"

namespace wmixnet {

namespace {

enum SeedStream : std::uint64_t { kSpectral = 11, kSplit = 12, kBenchmark = 13 };

double modeled_dyads(const Network& network) {
  const auto n = static_cast<double>(network.size());
  return network.directed() ? n * (n - 1.0) : n * (n - 1.0) / 2.0;
}

FitResult spectral_fit(const Network& network, const ModelSpec& spec, int q, const FitConfig& config) {
  const auto tau = initial_tau(network, spec, q, derive_seed(config.seed, {kSpectral, static_cast<std::uint64_t>(q)}));
  FitResult r = fit(network, spec, q, tau, config);
  r.init_source = InitSource::spectral;
  return r;
}

void fit_range(std::map<int, FitResult>& per_q, int from, int to, const Network& network, const ModelSpec& spec,
               const FitConfig& config, int threads) {
  if (to < from) return;
  std::vector<FitResult> results(static_cast<std::size_t>(to - from + 1));
  parallel_for(results.size(), threads, [&](std::size_t k) {
    results[k] = spectral_fit(network, spec, from + static_cast<int>(k), config);
  });
  for (std::size_t k = 0; k < results.size(); ++k) per_q[from + static_cast<int>(k)] = std::move(results[k]);
}

struct Candidate {
  Reinitialization info;
  SoftAssignment tau;
  double score = -std::numeric_limits<double>::infinity();
};

/// One M-step on the candidate tau followed by J; used to rank candidates in
/// minimal mode.
double quick_score(const Network& network, const ModelSpec& spec, const SoftAssignment& tau,
                   const Parameters* warm) {
  Parameters params;
  try {
    params = m_step(spec, network, tau, warm);
  } catch (const MStepError& e) {
    params = e.best();
  }
  const double j = pseudo_likelihood(network, spec, params, tau);
  return std::isfinite(j) ? j : -std::numeric_limits<double>::infinity();
}

std::vector<Candidate> candidates_for(const SweepResult& state, int q, int pass, const Network& network,
                                      const FitConfig& config) {
  std::vector<Candidate> out;
  const auto prev = state.per_q.find(q - 1);
  if (prev != state.per_q.end()) {
    for (int g = 0; g < q - 1; ++g) {
      const auto seed = derive_seed(config.seed, {kSplit, static_cast<std::uint64_t>(pass),
                                                  static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(g)});
      try {
        Candidate c;
        c.tau = split_init(prev->second, g, network, seed);
        c.info = {ReinitMode::ascend, q - 1, q, g, -1, pass, 0.0, false};
        out.push_back(std::move(c));
      } catch (const UnsplittableGroup&) {
      }
    }
  }
  const auto next = state.per_q.find(q + 1);
  if (next != state.per_q.end()) {
    for (int a = 0; a < q + 1; ++a) {
      for (int b = a + 1; b < q + 1; ++b) {
        Candidate c;
        c.tau = merge_init(next->second, a, b);
        c.info = {ReinitMode::descend, q + 1, q, a, b, pass, 0.0, false};
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

/// Keeps the best-scoring candidate of each mode.
std::vector<Candidate> best_per_mode(std::vector<Candidate> all, const Network& network, const ModelSpec& spec,
                                     const SweepResult& state, int threads) {
  parallel_for(all.size(), threads, [&](std::size_t k) {
    all[k].score = quick_score(network, spec, all[k].tau, &state.per_q.at(all[k].info.source_q).params);
  });
  std::vector<Candidate> out;
  for (const ReinitMode mode : {ReinitMode::ascend, ReinitMode::descend}) {
    Candidate* best = nullptr;
    for (auto& c : all) {
      if (c.info.mode != mode) continue;
      if (best == nullptr || c.score > best->score) best = &c;
    }
    if (best != nullptr) out.push_back(std::move(*best));
  }
  return out;
}

std::vector<int> nestedness_violations(const std::map<int, FitResult>& per_q) {
  std::vector<int> out;
  for (const auto& [q, r] : per_q) {
    const auto prev = per_q.find(q - 1);
    if (prev != per_q.end() && r.objective < prev->second.objective) out.push_back(q);
  }
  return out;
}

int max_q(const std::map<int, FitResult>& per_q) { return per_q.empty() ? 0 : per_q.rbegin()->first; }

}  // namespace

double icl(const FitResult& fit, const Network& network) {
  const int q = fit.groups;
  const HardPartition hard = harden(fit.tau);
  const double complete = complete_log_likelihood(network, fit.spec, fit.params, hard);
  const long k = parameter_count(fit.spec, q, network.covariate_dim(), network.directed());
  const double m = modeled_dyads(network);
  const double penalty = m > 0.0 ? 0.5 * static_cast<double>(k) * std::log(m) : 0.0;
  return complete - penalty - 0.5 * (q - 1) * std::log(static_cast<double>(network.size()));
}

const char* to_string(Smoothing mode) {
  switch (mode) {
    case Smoothing::none: return "none";
    case Smoothing::minimal: return "minimal";
    case Smoothing::exhaustive: return "exhaustive";
  }
  return "none";
}

Smoothing parse_smoothing(std::string_view name) {
  if (name == "none") return Smoothing::none;
  if (name == "minimal") return Smoothing::minimal;
  if (name == "exhaustive") return Smoothing::exhaustive;
  throw std::invalid_argument("unknown smoothing mode: " + std::string(name));
}

const char* to_string(ReinitMode mode) { return mode == ReinitMode::ascend ? "ascend" : "descend"; }

int select_q(const std::map<int, FitResult>& per_q) {
  if (per_q.empty()) throw std::invalid_argument("no fits to select from");
  int best = per_q.begin()->first;
  double best_icl = per_q.begin()->second.icl;
  for (const auto& [q, r] : per_q) {
    if (!std::isfinite(r.icl)) continue;
    const double slack = 1e-9 * std::max(1.0, std::abs(best_icl));
    if (!std::isfinite(best_icl) || r.icl > best_icl + slack) {
      best = q;
      best_icl = r.icl;
    }
  }
  return best;
}

std::vector<int> smoothing_violations(const std::map<int, FitResult>& per_q) {
  std::vector<int> out = nestedness_violations(per_q);
  for (const auto& [q, r] : per_q) {
    const auto prev = per_q.find(q - 1);
    const auto next = per_q.find(q + 1);
    if (prev == per_q.end() || next == per_q.end()) continue;
    if (r.icl < std::min(prev->second.icl, next->second.icl)) out.push_back(q);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void smooth(SweepResult& state, Smoothing mode, const Network& network, const ModelSpec& spec,
            const FitConfig& config, int threads, int max_passes) {
  if (mode != Smoothing::none) {
    for (int pass = 0; pass < max_passes; ++pass) {
      std::vector<int> targets;
      if (mode == Smoothing::minimal) {
        targets = smoothing_violations(state.per_q);
      } else {
        for (const auto& [q, r] : state.per_q) targets.push_back(q);
      }
      std::vector<Candidate> pending;
      for (const int q : targets) {
        auto c = candidates_for(state, q, pass, network, config);
        if (mode == Smoothing::minimal) c = best_per_mode(std::move(c), network, spec, state, threads);
        for (auto& x : c) pending.push_back(std::move(x));
      }
      if (pending.empty()) break;

      std::vector<FitResult> refits(pending.size());
      parallel_for(pending.size(), threads, [&](std::size_t k) {
        refits[k] = fit(network, spec, pending[k].info.target_q, pending[k].tau, config);
        refits[k].init_source = pending[k].info.mode == ReinitMode::ascend ? InitSource::split : InitSource::merge;
      });

      bool improved = false;
      for (std::size_t k = 0; k < pending.size(); ++k) {
        auto& info = pending[k].info;
        info.objective = refits[k].objective;
        auto& current = state.per_q.at(info.target_q);
        if (std::isfinite(refits[k].objective) && refits[k].objective > current.objective) {
          current = std::move(refits[k]);
          info.accepted = true;
          improved = true;
        }
        state.history.push_back(info);
      }
      if (!improved) break;
    }
  }
  state.selected_q = select_q(state.per_q);
  state.unresolved = nestedness_violations(state.per_q);
}

SweepResult sweep(const Network& network, const ModelSpec& spec, const SweepOptions& options,
                  const FitConfig& config) {
  config.check();
  check_compatible(spec, network);
  if (options.q_max && *options.q_max < 1) throw std::invalid_argument("Qmax must be at least 1");
  if (options.auto_window < 1) throw std::invalid_argument("auto window must be at least 1");
  const int n = static_cast<int>(network.size());
  const int threads = std::max(1, options.threads);

  SweepResult state;
  if (options.q_max) {
    fit_range(state.per_q, 1, std::min(*options.q_max, n), network, spec, config, threads);
    smooth(state, options.smoothing, network, spec, config, threads, options.max_smoothing_passes);
    return state;
  }

  fit_range(state.per_q, 1, std::min(std::max(options.auto_start, 1), n), network, spec, config, threads);
  while (true) {
    smooth(state, options.smoothing, network, spec, config, threads, options.max_smoothing_passes);
    const int top = max_q(state.per_q);
    const int wanted = std::min(state.selected_q + options.auto_window, n);
    if (wanted <= top) break;
    fit_range(state.per_q, top + 1, wanted, network, spec, config, threads);
  }
  return state;
}

LikelihoodRatioTest likelihood_ratio_test(const FitResult& fit_with, const FitResult& fit_without,
                                          const Network& network) {
  if (fit_with.spec.family != fit_without.spec.family) throw std::invalid_argument("fits use different families");
  if (fit_with.groups != fit_without.groups) throw std::invalid_argument("fits use different group counts");
  if (fit_with.tau.size() != network.size() || fit_without.tau.size() != network.size()) {
    throw std::invalid_argument("fits do not belong to this network");
  }
  if (!fit_with.spec.uses_covariates() || fit_without.spec.uses_covariates()) {
    throw std::invalid_argument("expected one fit with covariates and one without");
  }
  LikelihoodRatioTest t;
  const std::size_t p = network.covariate_dim();
  t.dof = parameter_count(fit_with.spec, fit_with.groups, p, network.directed()) -
          parameter_count(fit_without.spec, fit_without.groups, 0, network.directed());
  t.statistic = 2.0 * (fit_with.objective - fit_without.objective);
  if (t.statistic < 0.0) {
    t.optimization_failure = true;
    t.statistic = 0.0;
  }
  boost::math::chi_squared law(static_cast<double>(t.dof));
  t.p_value = t.statistic == 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(law, t.statistic));
  return t;
}

double fit_log_log_exponent(std::span<const BenchmarkRecord> records) {
  double mx = 0.0;
  double my = 0.0;
  for (const auto& r : records) {
    if (r.n == 0 || !(r.t > 0.0)) throw std::invalid_argument("benchmark records need positive n and t");
    mx += std::log(static_cast<double>(r.n));
    my += std::log(r.t);
  }
  const auto k = static_cast<double>(records.size());
  if (records.size() < 2) throw std::invalid_argument("need at least two sizes to fit an exponent");
  mx /= k;
  my /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& r : records) {
    const double dx = std::log(static_cast<double>(r.n)) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(r.t) - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("degenerate design: all sizes are equal");
  return sxy / sxx;
}

BenchmarkReport benchmark(std::span<const std::size_t> sizes, const ModelSpec& spec, const BenchmarkOptions& options) {
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw std::invalid_argument("sizes must be sorted ascending");
  const std::size_t p = spec.uses_covariates() ? 1 : 0;
  double within = 8.0;
  double between = 1.0;
  if (spec.family == Family::bernoulli) {
    within = 0.5;
    between = 0.1;
  } else if (spec.family == Family::gaussian) {
    within = 2.0;
    between = 0.0;
  }
  const Parameters params = planted_parameters(spec, options.planted_groups, within, between, p, 0.5, 1.0);
  std::optional<CovariateDistribution> covariates;
  if (p > 0) covariates = CovariateDistribution{CovariateSampler::standard_normal, p};

  BenchmarkReport report;
  for (const std::size_t n : sizes) {
    const auto sample =
        sample_network(spec, params, n, covariates, false, derive_seed(options.seed, {kBenchmark, n}));
    SweepOptions so;
    so.q_max = options.q_max;
    so.threads = 1;
    const std::clock_t start = std::clock();
    const SweepResult result = sweep(sample.network, spec, so, options.config);
    const std::clock_t stop = std::clock();
    BenchmarkRecord rec;
    rec.t = std::max(static_cast<double>(stop - start) / CLOCKS_PER_SEC, 1e-6);
    rec.n = n;
    rec.g = result.selected_q;
    rec.p = p;
    rec.model = spec;
    report.records.push_back(rec);
  }
  if (report.records.size() >= 2) report.n_exponent = fit_log_log_exponent(report.records);
  return report;
}

}  // namespace wmixnet
