#include <doctest.h>

#include <cstdlib>
#include <map>
#include <regex>
#include <sstream>

#include "test_util.hpp"
#include "wmixnet/generator.hpp"
#include "wmixnet/io.hpp"

using namespace wmixnet;

namespace {

void check_same(const Network& a, const Network& b) {
  REQUIRE(a.size() == b.size());
  REQUIRE(a.directed() == b.directed());
  REQUIRE(a.covariate_dim() == b.covariate_dim());
  CHECK(a.dense_weights() == b.dense_weights());
  a.for_each_dyad([&](std::size_t i, std::size_t j) {
    CHECK(testutil::cov_of(a, i, j) == testutil::cov_of(b, i, j));
  });
}

Network round_trip(const Network& net) {
  std::ostringstream out;
  write_spm(net, out);
  return parse_spm_text(out.str(), {.symmetric = !net.directed(), .n_override = std::nullopt});
}

std::size_t error_line(std::string_view text, const SpmOptions& o = {}) {
  try {
    parse_spm_text(text, o);
  } catch (const ParseError& e) {
    return e.line();
  }
  FAIL("no parse error");
  return 1000;
}

/// Reads "path <- value" or "path = value;" statements into path -> numbers,
/// with R list syntax rewritten to the Octave form.
std::map<std::string, std::vector<double>> read_assignments(const std::string& script, bool r) {
  std::map<std::string, std::vector<double>> out;
  std::istringstream in(script);
  std::string line;
  const std::regex number(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?|-?Inf|NaN)");
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == '%') continue;
    const auto sep = line.find(r ? " <- " : " = ");
    REQUIRE(sep != std::string::npos);
    std::string path = line.substr(0, sep);
    std::string value = line.substr(sep + (r ? 4 : 3));
    if (r) {
      path = std::regex_replace(path, std::regex(R"(\[\[(\d+)\]\])"), "($1)");
      std::replace(path.begin(), path.end(), '$', '.');
      const auto tail = value.find("), nrow");
      if (tail != std::string::npos) value = value.substr(0, tail);
      const auto dim = value.find("), dim");
      if (dim != std::string::npos) value = value.substr(0, dim);
    }
    if (value == "list()") continue;
    std::vector<double> nums;
    for (std::sregex_iterator it(value.begin(), value.end(), number), end; it != end; ++it) {
      const std::string tok = it->str();
      nums.push_back(tok == "Inf" ? INFINITY : tok == "-Inf" ? -INFINITY : tok == "NaN" ? NAN : std::strtod(tok.c_str(), nullptr));
    }
    out[path] = nums;
  }
  return out;
}

SweepResult small_sweep(const ModelSpec& spec, std::size_t p) {
  const Parameters par = testutil::random_parameters(spec, 2, p, false, 3);
  std::optional<CovariateDistribution> cov;
  if (p > 0) cov = CovariateDistribution{CovariateSampler::standard_normal, p};
  const auto s = sample_network(spec, par, 20, cov, false, 4);
  SweepOptions o;
  o.q_max = 3;
  return sweep(s.network, spec, o, {});
}

}  // namespace

TEST_CASE("symmetric input fills both directions") {
  const Network net = parse_spm_text("1 2 3\n2 3 1\n", {.symmetric = true, .n_override = std::nullopt});
  CHECK(net.size() == 3);
  CHECK_FALSE(net.directed());
  CHECK(net.weight(0, 1) == 3.0);
  CHECK(net.weight(1, 0) == 3.0);
  CHECK(net.weight(2, 1) == 1.0);
  CHECK(net.weight(0, 2) == 0.0);
}

TEST_CASE("extra columns are covariates") {
  const Network net = parse_spm_text("1 2 0 0.5 1.2\n2 1 1 0.1 0.2\n");
  CHECK(net.covariate_dim() == 2);
  CHECK(testutil::cov_of(net, 0, 1) == std::vector<double>{0.5, 1.2});
  CHECK(testutil::cov_of(net, 1, 0) == std::vector<double>{0.1, 0.2});
}

TEST_CASE("parse errors carry the line number") {
  CHECK(error_line("1 2 0 0.5 1.2\n2 1 1 0.1\n") == 2);
  CHECK(error_line("# header\n1 2 1\n1 x 1\n") == 3);
  CHECK(error_line("1 2 1\n0 2 1\n") == 2);
  CHECK(error_line("1 2 1\n2 3 abc\n") == 2);
  CHECK(error_line("1 2\n") == 1);
  CHECK(error_line("1 1 4\n") == 1);
  CHECK(error_line("1 2 1\n2 1 2\n", {.symmetric = true, .n_override = std::nullopt}) == 2);
  CHECK(error_line("1 2 1\n3 1 nan\n") == 2);
}

TEST_CASE("file-level errors") {
  CHECK(error_line("1 2 1 0.3\n2 1 1 0.3\n1 3 1 0.2\n") == 0);
  CHECK(error_line("# nothing\n\n") == 0);
  CHECK(error_line("1 5 1\n", {.symmetric = false, .n_override = 3}) == 0);
}

TEST_CASE("repeated identical lines are accepted") {
  const Network net = parse_spm_text("1 2 1\n2 1 1\n1 2 1\n", {.symmetric = true, .n_override = std::nullopt});
  CHECK(net.weight(0, 1) == 1.0);
}

TEST_CASE("line order does not matter") {
  const Network a = parse_spm_text("1 2 1\n3 1 2.5\n2 3 4\n");
  const Network b = parse_spm_text("2 3 4\n1 2 1\n3 1 2.5\n");
  check_same(a, b);
}

TEST_CASE("n override adds isolated nodes") {
  const Network net = parse_spm_text("1 2 1\n", {.symmetric = false, .n_override = 6});
  CHECK(net.size() == 6);
  CHECK(net.weight(4, 5) == 0.0);
}

TEST_CASE("write and parse round trip") {
  for (const auto& spec : testutil::all_models()) {
    for (const bool directed : {false, true}) {
      const std::size_t p = spec.uses_covariates() ? 2 : 0;
      INFO(spec.name());
      const Network net = testutil::random_network(spec, 50, directed, p, 11);
      check_same(net, round_trip(net));
    }
  }
}

TEST_CASE("trailing isolated nodes survive the round trip") {
  NetworkBuilder b(7, false);
  b.set_weight(0, 1, 2.0);
  b.set_weight(1, 2, 0.125);
  const Network net = b.build();
  check_same(net, round_trip(net));
  NetworkBuilder d(5, true);
  d.set_entry(4, 0, 1.0);
  const Network directed = d.build();
  check_same(directed, round_trip(directed));
}

TEST_CASE("number formatting round trips") {
  for (const double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 123456789.123}) {
    CHECK(std::strtod(format_number(x).c_str(), nullptr) == x);
  }
  CHECK(format_number(INFINITY) == "Inf");
  CHECK(format_number(-INFINITY) == "-Inf");
  CHECK(format_number(NAN) == "NaN");
}

TEST_CASE("output format names") {
  CHECK(parse_output_format("text") == OutputFormat::text);
  CHECK(parse_output_format("R") == OutputFormat::r);
  CHECK(parse_output_format("matlab") == OutputFormat::octave);
  CHECK(parse_output_format("octave") == OutputFormat::octave);
  CHECK_THROWS(parse_output_format("json"));
}

TEST_CASE("text output of a single-group bernoulli fit") {
  NetworkBuilder b(4, true);
  b.set_entry(0, 1, 1.0);
  b.set_entry(2, 3, 1.0);
  b.set_entry(3, 0, 1.0);
  const Network net = b.build();
  SweepOptions o;
  o.q_max = 1;
  const auto r = sweep(net, ModelSpec::parse("bernoulli"), o, {});
  std::ostringstream out;
  write_output(r, OutputFormat::text, out);
  const std::string s = out.str();
  const auto block = s.find("== Q=1 ==");
  REQUIRE(block != std::string::npos);
  CHECK(s.find("alpha: (1)", block) != std::string::npos);
  CHECK(s.find("  0.25\n", block) != std::string::npos);
  CHECK(s.find("selected Q: 1") != std::string::npos);
}

TEST_CASE("R and Octave outputs carry the same numbers") {
  for (const char* name : {"poisson", "GRMH", "BI"}) {
    const auto spec = ModelSpec::parse(name);
    const auto r = small_sweep(spec, spec.uses_covariates() ? 2 : 0);
    std::ostringstream rs;
    std::ostringstream os;
    write_output(r, OutputFormat::r, rs);
    write_output(r, OutputFormat::octave, os);
    const auto a = read_assignments(rs.str(), true);
    auto b = read_assignments(os.str(), false);
    INFO(name);
    for (const auto& [path, values] : a) {
      if (path.find("beta_ql") != std::string::npos) continue;
      REQUIRE(b.contains(path));
      CHECK(values == b.at(path));
    }
    for (const auto& [q, fit] : r.per_q) {
      const auto& tau = a.at("wmixnet.results(" + std::to_string(q) + ").tau");
      REQUIRE(tau.size() == static_cast<std::size_t>(fit.tau.matrix().size()));
      std::size_t k = 0;
      for (Eigen::Index i = 0; i < fit.tau.matrix().rows(); ++i)
        for (Eigen::Index j = 0; j < fit.tau.matrix().cols(); ++j) CHECK(tau[k++] == fit.tau(i, j));
      CHECK(a.at("wmixnet.results(" + std::to_string(q) + ").pseudo_likelihood")[0] == fit.objective);
    }
  }
}

TEST_CASE("heterogeneous coefficients are laid out as a Q x Q x p array") {
  const auto spec = ModelSpec::parse("PRMI");
  const auto r = small_sweep(spec, 2);
  std::ostringstream rs;
  std::ostringstream os;
  write_output(r, OutputFormat::r, rs);
  write_output(r, OutputFormat::octave, os);
  const auto a = read_assignments(rs.str(), true);
  const auto b = read_assignments(os.str(), false);
  const auto& fit = r.per_q.at(2);
  const auto& arr = a.at("wmixnet.results(2).beta_ql");
  REQUIRE(arr.size() == 8);
  for (int k = 0; k < 2; ++k) {
    const auto& slice = b.at("wmixnet.results(2).beta_ql(:, :, " + std::to_string(k + 1) + ")");
    for (int q = 0; q < 2; ++q)
      for (int l = 0; l < 2; ++l) {
        const double v = fit.params.block_coefficients(q, l)(k);
        CHECK(arr[static_cast<std::size_t>(k * 4 + l * 2 + q)] == v);
        CHECK(slice[static_cast<std::size_t>(q * 2 + l)] == v);
      }
  }
}
