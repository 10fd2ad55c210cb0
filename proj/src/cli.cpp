#include "wmixnet/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wmixnet/generator.hpp"
#include "wmixnet/io.hpp"
#include "wmixnet/model_selection.hpp"
#include "wmixnet/parallel.hpp"

namespace wmixnet {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kModelNames = {"bernoulli", "BH",   "BI",       "poisson", "PRMH",
                                              "PRMI",      "gaussian", "GRMH", "GRMI"};

struct MainOptions {
  std::string input;
  bool symmetric = false;
  std::string model;
  std::optional<int> q_max;
  bool q_auto = false;
  std::string smoothing = "none";
  std::string output;
  std::string output_format = "text";
  std::uint64_t seed = 0;
  int threads = default_thread_count();
  std::optional<std::size_t> n_override;
  std::string icl_csv;
};

struct GenerateOptions {
  std::string model;
  std::string params;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool symmetric = false;
  std::string output;
  std::string truth;
};

struct BenchmarkCliOptions {
  std::string model = "poisson";
  std::vector<std::size_t> sizes;
  int groups = 3;
  int q_max = 5;
  std::uint64_t seed = 0;
  std::string output;
};

/// Opens `path` for writing, or returns the fallback stream when empty.
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot open " + path + " for writing");
      stream_ = &file_;
    }
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// {"alpha": [...], "connectivity": [[...]], "sigma2": s, "beta": [...],
///  "block_beta": [[[...]]], "covariates": {"sampler": "normal"|"bernoulli", "dim": p}}
std::pair<Parameters, std::optional<CovariateDistribution>> read_params(const std::string& path,
                                                                         const ModelSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  Parameters p;
  p.alpha = json_vector(j.at("alpha"));
  const auto rows = j.at("connectivity").get<std::vector<std::vector<double>>>();
  const auto q = static_cast<Eigen::Index>(rows.size());
  p.connectivity.resize(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    if (static_cast<Eigen::Index>(rows[a].size()) != q) throw std::runtime_error("connectivity must be square");
    for (Eigen::Index b = 0; b < q; ++b) p.connectivity(a, b) = rows[a][b];
  }
  if (j.contains("sigma2")) p.sigma2 = j.at("sigma2").get<double>();
  if (j.contains("beta")) p.beta = json_vector(j.at("beta"));
  if (j.contains("block_beta")) {
    const auto blocks = j.at("block_beta").get<std::vector<std::vector<std::vector<double>>>>();
    if (static_cast<Eigen::Index>(blocks.size()) != q) throw std::runtime_error("block_beta must be Q x Q");
    for (const auto& row : blocks) {
      if (static_cast<Eigen::Index>(row.size()) != q) throw std::runtime_error("block_beta must be Q x Q");
      for (const auto& v : row) {
        p.block_beta.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
    }
  }
  std::optional<CovariateDistribution> cov;
  if (j.contains("covariates")) {
    const auto& c = j.at("covariates");
    CovariateDistribution d;
    const auto sampler = c.value("sampler", std::string("normal"));
    if (sampler == "normal") {
      d.sampler = CovariateSampler::standard_normal;
    } else if (sampler == "bernoulli") {
      d.sampler = CovariateSampler::bernoulli_half;
    } else {
      throw std::runtime_error("unknown covariate sampler: " + sampler);
    }
    d.dim = c.value("dim", std::size_t{1});
    cov = d;
  } else if (spec.uses_covariates()) {
    std::size_t dim = p.beta ? static_cast<std::size_t>(p.beta->size())
                             : (p.block_beta.empty() ? 1 : static_cast<std::size_t>(p.block_beta.front().size()));
    cov = CovariateDistribution{CovariateSampler::standard_normal, dim};
  }
  return {std::move(p), cov};
}

int run_fit(const MainOptions& o, std::ostream& out, std::ostream& err) {
  if (o.input.empty()) throw UsageError("--input is required");
  if (o.model.empty()) throw UsageError("--model is required");
  if (!o.q_max && !o.q_auto) throw UsageError("one of --Qmax or --Qauto is required");
  const ModelSpec spec = ModelSpec::parse(o.model);
  const OutputFormat format = parse_output_format(o.output_format);

  std::ifstream in(o.input);
  if (!in) throw std::runtime_error("cannot open " + o.input);
  const Network network = parse_spm(in, SpmOptions{o.symmetric, o.n_override});
  err << "read " << network.size() << " nodes, " << network.covariate_dim() << " covariates\n";

  SweepOptions so;
  so.q_max = o.q_max;
  so.smoothing = parse_smoothing(o.smoothing);
  so.threads = o.threads;
  FitConfig config;
  config.seed = o.seed;
  const SweepResult result = sweep(network, spec, so, config);
  err << "explored Q = 1.." << result.per_q.rbegin()->first << ", selected Q = " << result.selected_q << '\n';
  for (const int q : result.unresolved) err << "warning: pseudo-likelihood at Q=" << q << " is below Q=" << q - 1 << '\n';

  OutputTarget target(o.output, out);
  write_output(result, format, target.stream());
  if (!o.icl_csv.empty()) {
    OutputTarget csv(o.icl_csv, out);
    csv.stream() << "Q,pseudo_likelihood,icl\n";
    for (const auto& [q, f] : result.per_q) {
      csv.stream() << q << ',' << format_number(f.objective) << ',' << format_number(f.icl) << '\n';
    }
    if (!csv.stream()) throw std::runtime_error("failed to write " + o.icl_csv);
  }
  return 0;
}

int run_generate(const GenerateOptions& o, std::ostream& out, std::ostream& err) {
  const ModelSpec spec = ModelSpec::parse(o.model);
  auto [params, cov] = read_params(o.params, spec);
  if (!spec.uses_covariates()) cov.reset();
  const auto sample = sample_network(spec, params, o.n, cov, !o.symmetric, o.seed);
  OutputTarget target(o.output, out);
  write_spm(sample.network, target.stream());
  if (!o.truth.empty()) {
    OutputTarget truth(o.truth, out);
    for (const int label : sample.truth.labels) truth.stream() << label + 1 << '\n';
    if (!truth.stream()) throw std::runtime_error("failed to write " + o.truth);
  }
  err << "generated " << o.n << " nodes\n";
  return 0;
}

int run_benchmark(const BenchmarkCliOptions& o, std::ostream& out, std::ostream& err) {
  const ModelSpec spec = ModelSpec::parse(o.model);
  BenchmarkOptions bo;
  bo.planted_groups = o.groups;
  bo.q_max = o.q_max;
  bo.seed = o.seed;
  bo.config.seed = o.seed;
  const BenchmarkReport report = benchmark(o.sizes, spec, bo);
  OutputTarget target(o.output, out);
  auto& s = target.stream();
  s << "t,n,g,p,model\n";
  for (const auto& r : report.records) {
    s << format_number(r.t) << ',' << r.n << ',' << r.g << ',' << r.p << ',' << r.model.name() << '\n';
  }
  using R = ReferenceScaling;
  s << "# fitted n exponent: " << format_number(report.n_exponent) << '\n';
  s << "# reference law: t = C_model n^" << R::n_exponent << " g^" << R::g_exponent << ' ' << R::covariate_base
    << "^p\n";
  s << "# reference C_model / C_bernoulli: poisson " << R::poisson_ratio << ", PRMH " << R::prmh_ratio
    << ", gaussian " << R::gaussian_ratio << ", GRMH " << R::grmh_ratio << '\n';
  if (!s) throw std::runtime_error("failed to write benchmark report");
  err << "benchmark done\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clusters weighted networks with stochastic block models.", "wmixnet"};
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  MainOptions m;
  app.add_option("--input", m.input, "Edge list in .spm format");
  app.add_flag("--symmetric", m.symmetric, "The graph is undirected");
  app.add_option("--model", m.model, "Edge law")->check(CLI::IsMember(kModelNames));
  auto* qmax = app.add_option("--Qmax", m.q_max, "Largest number of groups")->check(CLI::PositiveNumber);
  auto* qauto = app.add_flag("--Qauto", m.q_auto, "Choose the largest number of groups automatically");
  qmax->excludes(qauto);
  app.add_option("--smoothing", m.smoothing, "none, minimal or exhaustive")
      ->check(CLI::IsMember({"none", "minimal", "exhaustive"}))
      ->capture_default_str();
  app.add_option("--output", m.output, "Result file (standard output when omitted)");
  app.add_option("--output-format", m.output_format, "text, R, matlab or octave")
      ->check(CLI::IsMember({"text", "R", "matlab", "octave"}))
      ->capture_default_str();
  app.add_option("--seed", m.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", m.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--n-override", m.n_override, "Number of nodes, when trailing nodes are isolated")
      ->check(CLI::PositiveNumber);
  app.add_option("--icl-csv", m.icl_csv, "Write Q,pseudo_likelihood,icl rows to this file");

  GenerateOptions g;
  auto* gen = app.add_subcommand("generate", "Sample a network from a block model");
  gen->add_option("--model", g.model, "Edge law")->required()->check(CLI::IsMember(kModelNames));
  gen->add_option("--params", g.params, "JSON parameter file")->required()->check(CLI::ExistingFile);
  gen->add_option("--n", g.n, "Number of nodes")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", g.seed, "Random seed")->capture_default_str();
  gen->add_flag("--symmetric", g.symmetric, "Sample an undirected graph");
  gen->add_option("--output", g.output, "Output .spm file (standard output when omitted)");
  gen->add_option("--truth", g.truth, "Write the planted 1-based labels to this file");

  BenchmarkCliOptions b;
  auto* bench = app.add_subcommand("benchmark", "Time sweeps on planted networks");
  bench->add_option("--model", b.model, "Edge law")->check(CLI::IsMember(kModelNames))->capture_default_str();
  bench->add_option("--sizes", b.sizes, "Node counts, ascending")->required()->delimiter(',');
  bench->add_option("--groups", b.groups, "Planted groups")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--Qmax", b.q_max, "Largest number of groups fitted")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--seed", b.seed, "Random seed")->capture_default_str();
  bench->add_option("--output", b.output, "CSV file (standard output when omitted)");

  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (gen->parsed()) return run_generate(g, out, err);
    if (bench->parsed()) return run_benchmark(b, out, err);
    return run_fit(m, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n' << "run with --help for the list of flags\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("wmixnet");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace wmixnet
