#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wmixnet/cli.hpp"
#include "wmixnet/generator.hpp"
#include "wmixnet/io.hpp"

using namespace wmixnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  const fs::path d = fs::temp_directory_path() / "wmixnet_cli_test";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string planted_file(const std::string& name, std::size_t n, std::uint64_t seed) {
  const auto spec = ModelSpec::parse("poisson");
  const auto s = sample_network(spec, planted_parameters(spec, 3, 6.0, 1.0), n, std::nullopt, false, seed);
  const fs::path p = workdir() / name;
  std::ofstream out(p);
  write_spm(s.network, out);
  return p.string();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const std::string in = planted_file("usage.spm", 20, 1);
  CHECK(call({"--input", in, "--model", "poisson", "--Qmax", "3", "--Qauto"}).code == 2);
  CHECK(call({"--input", in, "--model", "poisson"}).code == 2);
  CHECK(call({"--model", "poisson", "--Qmax", "3"}).code == 2);
  CHECK(call({"--input", in, "--Qmax", "3"}).code == 2);
  CHECK(call({"--input", in, "--model", "binomial", "--Qmax", "3"}).code == 2);
  CHECK(call({"--input", in, "--model", "poisson", "--Qmax", "0"}).code == 2);
  CHECK(call({"--input", in, "--model", "poisson", "--Qmax", "3", "--smoothing", "sometimes"}).code == 2);
  CHECK(call({"--input", in, "--model", "poisson", "--Qmax", "3", "--output-format", "xml"}).code == 2);
  CHECK(call({"--bogus"}).code == 2);
}

TEST_CASE("runtime failures exit with 1") {
  const std::string in = planted_file("runtime.spm", 20, 1);
  const auto r = call({"--input", in, "--model", "PRMH", "--Qmax", "2"});
  CHECK(r.code == 1);
  CHECK(r.err.find("error") != std::string::npos);
  CHECK(call({"--input", (workdir() / "missing.spm").string(), "--model", "poisson", "--Qmax", "2"}).code == 1);
  const fs::path bad = workdir() / "bad.spm";
  std::ofstream(bad) << "1 2 1\n2 x 1\n";
  const auto b = call({"--input", bad.string(), "--model", "poisson", "--Qmax", "2"});
  CHECK(b.code == 1);
  CHECK(b.err.find("line 2") != std::string::npos);
}

TEST_CASE("help lists every flag") {
  const auto r = call({"--help"});
  CHECK(r.code == 0);
  for (const char* flag : {"--input", "--symmetric", "--model", "--Qmax", "--Qauto", "--smoothing", "--output",
                           "--output-format", "--seed", "--threads", "--n-override", "--icl-csv", "generate",
                           "benchmark"}) {
    INFO(flag);
    CHECK(r.out.find(flag) != std::string::npos);
  }
}

TEST_CASE("a fit writes results and the ICL table") {
  const std::string in = planted_file("fit.spm", 60, 2);
  const fs::path res = workdir() / "fit.txt";
  const fs::path csv = workdir() / "fit.csv";
  const auto r = call({"--input", in, "--symmetric", "--model", "poisson", "--Qmax", "4", "--output", res.string(),
                       "--icl-csv", csv.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  const std::string text = slurp(res);
  CHECK(text.find("selected Q: 3") != std::string::npos);
  CHECK(text.find("== Q=4 ==") != std::string::npos);
  std::istringstream table(slurp(csv));
  std::string line;
  std::getline(table, line);
  CHECK(line == "Q,pseudo_likelihood,icl");
  int rows = 0;
  while (std::getline(table, line)) {
    ++rows;
    CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
  }
  CHECK(rows == 4);
}

TEST_CASE("output does not depend on the thread count") {
  const std::string in = planted_file("threads.spm", 60, 3);
  std::string reference;
  for (const char* threads : {"1", "8"}) {
    const fs::path res = workdir() / (std::string("threads_") + threads + ".m");
    const std::string cmd = std::string(WMIXNET_EXE) + " --input " + in + " --symmetric --model poisson --Qmax 5" +
                            " --smoothing exhaustive --output-format octave --threads " + threads + " --output " +
                            res.string() + " 2>/dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    const std::string s = slurp(res);
    if (reference.empty()) {
      reference = s;
    } else {
      CHECK(s == reference);
    }
  }
  CHECK(!reference.empty());
}

TEST_CASE("generate samples from a JSON parameter file") {
  const fs::path params = workdir() / "params.json";
  std::ofstream(params) << R"({"alpha": [0.5, 0.5], "connectivity": [[5, 1], [1, 5]], "beta": [0.3],
                              "covariates": {"sampler": "bernoulli", "dim": 1}})";
  const fs::path net = workdir() / "gen.spm";
  const fs::path truth = workdir() / "gen.truth";
  const std::vector<std::string> args{"generate", "--model", "PRMH", "--params", params.string(), "--n", "30",
                                      "--seed", "4", "--symmetric", "--output", net.string(), "--truth",
                                      truth.string()};
  REQUIRE(call(args).code == 0);
  const Network parsed = parse_spm_text(slurp(net), {.symmetric = true, .n_override = std::nullopt});
  CHECK(parsed.size() == 30);
  CHECK(parsed.covariate_dim() == 1);
  std::istringstream labels(slurp(truth));
  int count = 0;
  for (int z; labels >> z; ++count) CHECK((z == 1 || z == 2));
  CHECK(count == 30);
  const std::string first = slurp(net);
  REQUIRE(call(args).code == 0);
  CHECK(slurp(net) == first);
}

TEST_CASE("generate rejects malformed parameters") {
  const fs::path params = workdir() / "bad_params.json";
  std::ofstream(params) << R"({"alpha": [1], "connectivity": [[1, 2]]})";
  CHECK(call({"generate", "--model", "poisson", "--params", params.string(), "--n", "5"}).code == 1);
  CHECK(call({"generate", "--model", "poisson", "--n", "5"}).code == 2);
}

TEST_CASE("benchmark prints a CSV with the fitted exponent") {
  const auto r = call({"benchmark", "--sizes", "20,40", "--groups", "2", "--Qmax", "3"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("t,n,g,p,model\n", 0) == 0);
  CHECK(r.out.find(",20,") != std::string::npos);
  CHECK(r.out.find(",40,") != std::string::npos);
  CHECK(r.out.find("# fitted n exponent: ") != std::string::npos);
  CHECK(call({"benchmark", "--sizes", "20,20"}).code == 1);
}
