#include <doctest.h>

#include <cmath>
#include <numbers>

#include "glm_oracle.hpp"
#include "test_util.hpp"
#include "wmixnet/edge_model.hpp"
#include "wmixnet/generator.hpp"
#include "wmixnet/random.hpp"

using namespace wmixnet;
using testutil::oracle_log_f;

namespace {

Parameters one_group(double conn, std::optional<double> sigma2 = std::nullopt) {
  Parameters p;
  p.alpha = Eigen::VectorXd::Ones(1);
  p.connectivity = Eigen::MatrixXd::Constant(1, 1, conn);
  p.sigma2 = sigma2;
  return p;
}

}  // namespace

TEST_CASE("model names round trip") {
  for (const auto& m : testutil::all_models()) CHECK(ModelSpec::parse(m.name()) == m);
  CHECK_THROWS_AS(ModelSpec::parse("negbin"), std::invalid_argument);
  CHECK(ModelSpec::parse("PRMI") == ModelSpec{Family::poisson, CovariateMode::heterogeneous});
}

TEST_CASE("log density spot values") {
  const std::vector<double> none;
  CHECK(log_density(ModelSpec::parse("poisson"), 0.0, 0, 0, none, one_group(1.0)) == doctest::Approx(-1.0));
  CHECK(log_density(ModelSpec::parse("bernoulli"), 1.0, 0, 0, none, one_group(0.5)) ==
        doctest::Approx(std::log(0.5)));
  const double s2 = 1.0 / (2.0 * std::numbers::pi);
  CHECK(std::abs(log_density(ModelSpec::parse("gaussian"), 0.3, 0, 0, none, one_group(0.3, s2))) < 1e-15);
}

TEST_CASE("zero covariate effect equals the plain law") {
  Parameters p = one_group(2.5);
  p.beta = Eigen::VectorXd::Zero(2);
  const std::vector<double> y{0.7, -1.3};
  const std::vector<double> none;
  CHECK(log_density(ModelSpec::parse("PRMH"), 3.0, 0, 0, y, p) ==
        doctest::Approx(log_density(ModelSpec::parse("poisson"), 3.0, 0, 0, none, one_group(2.5))));
}

TEST_CASE("log density matches the law definitions for random parameters") {
  for (const auto& spec : testutil::all_models()) {
    const std::size_t p = spec.uses_covariates() ? 2 : 0;
    const Parameters par = testutil::random_parameters(spec, 3, p, true, 17);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> y(p);
      for (auto& v : y) v = z(rng);
      double w = 0.0;
      if (spec.family == Family::bernoulli) w = rep % 2;
      if (spec.family == Family::poisson) w = rep % 7;
      if (spec.family == Family::gaussian) w = z(rng);
      const int q = rep % 3;
      const int l = (rep / 3) % 3;
      CHECK(log_density(spec, w, q, l, y, par) == doctest::Approx(oracle_log_f(spec, w, q, l, y, par)).epsilon(1e-13));
    }
  }
}

TEST_CASE("densities are normalized") {
  for (const auto& spec : testutil::all_models()) {
    const std::size_t p = spec.uses_covariates() ? 1 : 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Parameters par = testutil::random_parameters(spec, 2, p, true, seed);
      const std::vector<double> y(p, 0.4 * static_cast<double>(seed) - 0.8);
      double total = 0.0;
      if (spec.family == Family::bernoulli) {
        total = std::exp(log_density(spec, 0.0, 0, 1, y, par)) + std::exp(log_density(spec, 1.0, 0, 1, y, par));
      } else if (spec.family == Family::poisson) {
        for (int k = 0; k < 200; ++k) total += std::exp(log_density(spec, k, 0, 1, y, par));
      } else {
        // composite Simpson over +-20 standard deviations
        const double sd = std::sqrt(*par.sigma2);
        const double center = par.connectivity(0, 1);
        const int m = 20000;
        const double a = center - 20 * sd - 5.0;
        const double h = (40 * sd + 10.0) / m;
        for (int k = 0; k <= m; ++k) {
          const double c = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
          total += c * std::exp(log_density(spec, a + k * h, 0, 1, y, par));
        }
        total *= h / 3.0;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("support is enforced") {
  const std::vector<double> none;
  CHECK_THROWS_AS(log_density(ModelSpec::parse("bernoulli"), 2.0, 0, 0, none, one_group(0.5)), std::domain_error);
  CHECK_THROWS_AS(log_density(ModelSpec::parse("poisson"), 1.5, 0, 0, none, one_group(1.0)), std::domain_error);
  CHECK_THROWS_AS(log_density(ModelSpec::parse("poisson"), -1.0, 0, 0, none, one_group(1.0)), std::domain_error);
  Parameters p = one_group(1.0);
  p.beta = Eigen::VectorXd::Zero(1);
  CHECK_THROWS(log_density(ModelSpec::parse("PRMH"), 1.0, 0, 0, none, p));
}

TEST_CASE("probabilities are floored before logs") {
  const std::vector<double> none;
  CHECK(log_density(ModelSpec::parse("bernoulli"), 1.0, 0, 0, none, one_group(0.0)) ==
        doctest::Approx(std::log(1e-12)));
  CHECK(std::isfinite(log_density(ModelSpec::parse("poisson"), 2.0, 0, 0, none, one_group(0.0))));
}

TEST_CASE("parameter counts") {
  CHECK(parameter_count(ModelSpec::parse("bernoulli"), 3, 0, true) == 9);
  CHECK(parameter_count(ModelSpec::parse("PRMH"), 2, 2, false) == 5);
  CHECK(parameter_count(ModelSpec::parse("gaussian"), 1, 0, false) == 2);
  CHECK(parameter_count(ModelSpec::parse("GRMI"), 2, 3, true) == 4 * 4 + 1);
}

TEST_CASE("degenerate laws sample deterministically") {
  const std::vector<double> none;
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    CHECK(sample_edge(ModelSpec::parse("bernoulli"), 0, 0, none, one_group(1.0), rng) == 1.0);
    CHECK(sample_edge(ModelSpec::parse("poisson"), 0, 0, none, one_group(0.0), rng) == 0.0);
  }
}

TEST_CASE("poisson samples have the right mean") {
  const std::vector<double> none;
  Rng rng(derive_seed(11, {1}));
  double s = 0.0;
  const int m = 100000;
  for (int k = 0; k < m; ++k) s += sample_edge(ModelSpec::parse("poisson"), 0, 0, none, one_group(3.0), rng);
  CHECK(std::abs(s / m - 3.0) < 0.05);
}

TEST_CASE("sampling is deterministic given the seed") {
  const std::vector<double> none;
  Rng a(99), b(99);
  for (int k = 0; k < 50; ++k) {
    CHECK(sample_edge(ModelSpec::parse("gaussian"), 0, 0, none, one_group(1.0, 2.0), a) ==
          sample_edge(ModelSpec::parse("gaussian"), 0, 0, none, one_group(1.0, 2.0), b));
  }
}

TEST_CASE("one-group m_step returns the global mean") {
  const auto spec = ModelSpec::parse("poisson");
  const Network net = testutil::random_network(spec, 12, false, 0, 4);
  const Parameters p = m_step(spec, net, SoftAssignment::uniform(12, 1));
  const double total = net.dense_weights().sum() / 2.0;
  CHECK(p.connectivity(0, 0) == doctest::Approx(total / 66.0).epsilon(1e-14));
  CHECK(p.alpha(0) == 1.0);
}

namespace {

/// Block sums by direct counting over a hard partition.
struct BlockCounts {
  Eigen::MatrixXd sum, sum_sq, count;
};

BlockCounts count_blocks(const Network& net, const std::vector<int>& z, int Q) {
  BlockCounts c{Eigen::MatrixXd::Zero(Q, Q), Eigen::MatrixXd::Zero(Q, Q), Eigen::MatrixXd::Zero(Q, Q)};
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t j = 0; j < net.size(); ++j) {
      if (i == j || (!net.directed() && j < i)) continue;
      int q = z[i], l = z[j];
      const double w = net.weight(i, j);
      c.sum(q, l) += w;
      c.sum_sq(q, l) += w * w;
      c.count(q, l) += 1;
      if (!net.directed() && q != l) {
        c.sum(l, q) += w;
        c.sum_sq(l, q) += w * w;
        c.count(l, q) += 1;
      }
    }
  return c;
}

}  // namespace

TEST_CASE("closed-form m_step at one-hot tau equals block counts") {
  const std::vector<int> z{0, 0, 1, 1, 1, 0, 2, 2, 1, 0};
  for (const bool directed : {true, false}) {
    for (const char* name : {"bernoulli", "poisson", "gaussian"}) {
      const auto spec = ModelSpec::parse(name);
      const Network net = testutil::random_network(spec, 10, directed, 0, 21);
      const Parameters p = m_step(spec, net, SoftAssignment::one_hot({z, 3}));
      const BlockCounts c = count_blocks(net, z, 3);
      const Eigen::MatrixXd mean = c.sum.cwiseQuotient(c.count);
      CHECK((p.connectivity - mean).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(p.alpha(0) == doctest::Approx(0.4));
      if (spec.family == Family::gaussian) {
        double ssr = 0.0;
        double m = 0.0;
        for (int q = 0; q < 3; ++q)
          for (int l = 0; l < 3; ++l) {
            if (!directed && l < q) continue;
            ssr += c.sum_sq(q, l) - c.sum(q, l) * c.sum(q, l) / c.count(q, l);
            m += c.count(q, l);
          }
        CHECK(*p.sigma2 == doctest::Approx(ssr / m).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("undirected m_step output is exactly symmetric") {
  std::mt19937_64 rng(8);
  for (const auto& spec : testutil::all_models()) {
    const std::size_t p = spec.uses_covariates() ? 1 : 0;
    const Network net = testutil::random_network(spec, 15, false, p, 2);
    const SoftAssignment tau(testutil::random_tau(15, 3, rng));
    const Parameters par = m_step(spec, net, tau);
    CHECK(par.connectivity == par.connectivity.transpose());
    if (!par.block_beta.empty()) {
      for (int q = 0; q < 3; ++q)
        for (int l = 0; l < 3; ++l) CHECK(par.block_coefficients(q, l) == par.block_coefficients(l, q));
    }
  }
}

namespace {

testutil::GlmOracle oracle_for(const Network& net, const ModelSpec& spec, const Eigen::MatrixXd& tau) {
  return testutil::GlmOracle(net, spec, tau);
}

SampledNetwork covariate_sample(const ModelSpec& spec, std::size_t n, bool directed, std::uint64_t seed) {
  double within = 6.0, between = 1.5, beta = 0.8;
  if (spec.family == Family::bernoulli) {
    within = 0.8;
    between = 0.3;
  } else if (spec.family == Family::gaussian) {
    within = 2.0;
    between = 0.0;
  }
  const Parameters par = planted_parameters(spec, 2, within, between, 1, beta, 1.0);
  return sample_network(spec, par, n, CovariateDistribution{CovariateSampler::standard_normal, 1}, directed, seed);
}

}  // namespace

TEST_CASE("covariate m_step matches the weighted GLM oracle at hard assignments") {
  for (const bool directed : {false, true}) {
    for (const char* name : {"BH", "BI", "PRMH", "PRMI", "GRMH", "GRMI"}) {
      const auto spec = ModelSpec::parse(name);
      const auto s = covariate_sample(spec, directed ? 14 : 20, directed, 5);
      const Eigen::MatrixXd tau = testutil::one_hot(s.truth.labels, 2);
      const Parameters lib = m_step(spec, s.network, SoftAssignment::from_normalized(tau));
      const Parameters ref = oracle_for(s.network, spec, tau).solve();
      INFO(name << (directed ? " directed" : " undirected"));
      CHECK(testutil::parameter_distance(lib, ref) < 1e-4);
    }
  }
}

TEST_CASE("covariate m_step matches the weighted GLM oracle at soft assignments") {
  std::mt19937_64 rng(12);
  for (const char* name : {"BH", "PRMH", "PRMI", "GRMH", "GRMI"}) {
    const auto spec = ModelSpec::parse(name);
    const auto s = covariate_sample(spec, 25, false, 9);
    const Eigen::MatrixXd tau = testutil::random_tau(25, 2, rng);
    const Parameters lib = m_step(spec, s.network, SoftAssignment::from_normalized(tau));
    const Parameters ref = oracle_for(s.network, spec, tau).solve();
    INFO(name);
    CHECK(testutil::parameter_distance(lib, ref) < 1e-4);
  }
}

TEST_CASE("zero covariates reduce to the plain m_step") {
  std::mt19937_64 rng(4);
  for (const char* pair : {"poisson:PRMH", "poisson:PRMI", "gaussian:GRMH", "gaussian:GRMI"}) {
    const std::string s(pair);
    const auto plain = ModelSpec::parse(s.substr(0, s.find(':')));
    const auto with = ModelSpec::parse(s.substr(s.find(':') + 1));
    const Network base = testutil::random_network(plain, 12, false, 0, 6);
    NetworkBuilder b(12, false, 1);
    base.for_each_dyad([&](std::size_t i, std::size_t j) {
      if (base.weight(i, j) != 0.0) b.set_weight(i, j, base.weight(i, j));
      b.set_covariates(i, j, {0.0});
    });
    const Network zeros = b.build();
    const SoftAssignment tau(testutil::random_tau(12, 2, rng));
    const Parameters a = m_step(plain, base, tau);
    const Parameters c = m_step(with, zeros, tau);
    INFO(pair);
    CHECK((a.connectivity - c.connectivity).cwiseAbs().maxCoeff() < 1e-6);
    if (c.beta) CHECK(std::abs((*c.beta)(0)) < 1e-6);
    for (const auto& v : c.block_beta) CHECK(std::abs(v(0)) < 1e-6);
  }
}

TEST_CASE("poisson covariate effect is recovered at n=200") {
  const auto spec = ModelSpec::parse("PRMH");
  const Parameters par = planted_parameters(spec, 2, 4.0, 1.0, 1, 0.8);
  const auto s = sample_network(spec, par, 200, CovariateDistribution{}, false, 31);
  const Eigen::MatrixXd tau = testutil::one_hot(s.truth.labels, 2);
  const Parameters lib = m_step(spec, s.network, SoftAssignment::from_normalized(tau));
  CHECK(std::abs((*lib.beta)(0) - 0.8) < 0.1);
  const Parameters ref = testutil::GlmOracle(s.network, spec, tau).solve();
  CHECK(std::abs((*lib.beta)(0) - (*ref.beta)(0)) < 1e-6);
}

TEST_CASE("sample then m_step recovers connectivity within three standard errors") {
  const auto spec = ModelSpec::parse("poisson");
  const Parameters par = planted_parameters(spec, 2, 5.0, 1.0);
  const auto s = sample_network(spec, par, 500, std::nullopt, false, 77);
  const Parameters est = m_step(spec, s.network, SoftAssignment::one_hot(s.truth));
  const auto sizes = s.truth.group_sizes();
  for (int q = 0; q < 2; ++q)
    for (int l = 0; l < 2; ++l) {
      const double nq = static_cast<double>(sizes[q]);
      const double nl = static_cast<double>(sizes[l]);
      const double dyads = q == l ? nq * (nq - 1) / 2 : nq * nl;
      const double se = std::sqrt(par.connectivity(q, l) / dyads);
      CHECK(std::abs(est.connectivity(q, l) - par.connectivity(q, l)) < 3 * se);
    }
}

TEST_CASE("compatibility checks") {
  const Network plain = testutil::random_network(ModelSpec::parse("poisson"), 5, false, 0, 1);
  CHECK_THROWS_AS(check_compatible(ModelSpec::parse("PRMH"), plain), std::invalid_argument);
  CHECK_NOTHROW(check_compatible(ModelSpec::parse("poisson"), plain));
  CHECK_THROWS_AS(check_compatible(ModelSpec::parse("bernoulli"), plain), std::invalid_argument);
  const Network gauss = testutil::random_network(ModelSpec::parse("gaussian"), 5, false, 0, 1);
  CHECK_THROWS_AS(check_compatible(ModelSpec::parse("poisson"), gauss), std::invalid_argument);
}

TEST_CASE("degenerate groups keep their previous parameters") {
  const auto spec = ModelSpec::parse("poisson");
  const Network net = testutil::random_network(spec, 8, false, 0, 3);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(8, 2);
  t.col(0).setOnes();
  Parameters warm = planted_parameters(spec, 2, 3.0, 0.5);
  MStepInfo info;
  const Parameters p = m_step(spec, net, SoftAssignment::from_normalized(t), &warm, &info);
  CHECK(info.degenerate);
  CHECK(p.connectivity(1, 1) == 3.0);
  CHECK(p.connectivity(0, 1) == 0.5);
}
