#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dyad/agents.hpp"
#include "dyad/core.hpp"
#include "dyad/environments.hpp"
#include "helpers.hpp"

using namespace dyad;
using dyad::testing::coin_batch;
using dyad::testing::FixedEnvironment;

TEST_CASE("environment log-likelihood examples") {
  SUBCASE("certain labels give zero") {
    FixedEnvironment env({0.0, 1.0});
    TestBatch b{{FeatureVector{1.0}, FeatureVector{2.0}, FeatureVector{3.0}}, {1, 1, 1}};
    CHECK(environment_log_likelihood(env, b) == 0.0);
  }
  SUBCASE("fair coin twice") {
    CoinsEnvironment env({0.5});
    CHECK(environment_log_likelihood(env, coin_batch({0, 0}, {1, 0})) ==
          doctest::Approx(2 * std::log(0.5)).epsilon(1e-14));
  }
  SUBCASE("biased coin heads then tails") {
    CoinsEnvironment env({0.3});
    CHECK(environment_log_likelihood(env, coin_batch({0, 0}, {1, 0})) ==
          doctest::Approx(std::log(0.3) + std::log(0.7)).epsilon(1e-14));
  }
  SUBCASE("zero probability is floored") {
    FixedEnvironment env({1.0, 0.0});
    TestBatch b{{FeatureVector{0.0}}, {1}};
    CHECK(environment_log_likelihood(env, b) == doctest::Approx(std::log(kProbabilityFloor)));
  }
  SUBCASE("probabilities above the floor are untouched") {
    FixedEnvironment env({1.0 - 2e-9, 2e-9});
    TestBatch b{{FeatureVector{0.0}}, {1}};
    CHECK(environment_log_likelihood(env, b) == std::log(2e-9));
  }
  SUBCASE("dimension mismatch is a domain error") {
    LogisticEnvironment env(Eigen::VectorXd::Ones(3), 1.0);
    TestBatch b{{FeatureVector{1.0, 2.0}}, {0}};
    CHECK_THROWS_AS(environment_log_likelihood(env, b), std::domain_error);
  }
  SUBCASE("coin input to a feature environment is a domain error") {
    LogisticEnvironment env(Eigen::VectorXd::Ones(1), 1.0);
    CHECK_THROWS_AS(environment_log_likelihood(env, coin_batch({0}, {0})), std::domain_error);
  }
}

TEST_CASE("grouping keeps first-appearance order and counts labels") {
  const TestBatch b = coin_batch({3, 1, 3, 3, 1}, {1, 0, 0, 1, 0});
  const GroupedBatch g = group_batch(b, 2);
  REQUIRE(g.inputs.size() == 2);
  CHECK(coin_of(g.inputs[0]) == 3);
  CHECK(coin_of(g.inputs[1]) == 1);
  CHECK(g.counts(0, 0) == 1);
  CHECK(g.counts(0, 1) == 2);
  CHECK(g.counts(1, 0) == 2);
  CHECK(g.counts(1, 1) == 0);
  CHECK(g.tau == 5);
  CHECK_THROWS_AS(group_batch(coin_batch({0}, {2}), 2), std::domain_error);
  CHECK_THROWS_AS(group_batch(TestBatch{{CoinIndex{0}}, {}}, 2), std::invalid_argument);
}

TEST_CASE("class probability validation") {
  const std::vector<double> good = {0.25, 0.75};
  CHECK_NOTHROW(validate_class_probs(good));
  const std::vector<double> one = {1.0};
  CHECK_THROWS_AS(validate_class_probs(one), std::invalid_argument);
  const std::vector<double> bad_sum = {0.5, 0.6};
  CHECK_THROWS_AS(validate_class_probs(bad_sum), std::invalid_argument);
  const std::vector<double> negative = {-0.1, 1.1};
  CHECK_THROWS_AS(validate_class_probs(negative), std::invalid_argument);
}

TEST_CASE("input accessors reject the wrong alternative") {
  const Input coin = CoinIndex{2};
  const Input feat = FeatureVector{1.0};
  CHECK(coin_of(coin) == 2);
  CHECK(features_of(feat).size() == 1);
  CHECK_THROWS_AS(features_of(coin), std::domain_error);
  CHECK_THROWS_AS(coin_of(feat), std::domain_error);
}

TEST_CASE("log_mean_exp") {
  SUBCASE("equal entries return the common value exactly") {
    const std::vector<double> v(7, -3.141);
    CHECK(log_mean_exp(v) == -3.141);
  }
  SUBCASE("matches the naive computation on small batches") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(-5.0, 0.0);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> v(1 + rep % 20);
      for (double& x : v) x = u(rng);
      double naive = 0.0;
      for (double x : v) naive += std::exp(x);
      naive = std::log(naive / static_cast<double>(v.size()));
      CHECK(std::abs(log_mean_exp(v) - naive) <= 1e-12 * std::abs(naive) + 1e-15);
    }
  }
  SUBCASE("no overflow or underflow at extreme values") {
    const std::vector<double> big = {1000.0, 1000.0 + std::log(3.0)};
    CHECK(log_mean_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
    const std::vector<double> tiny = {-2000.0, -2000.0};
    CHECK(log_mean_exp(tiny) == -2000.0);
  }
  SUBCASE("order invariance") {
    Rng rng(9);
    std::normal_distribution<double> n(-20.0, 5.0);
    std::vector<double> v(500);
    for (double& x : v) x = n(rng);
    const double before = log_mean_exp(v);
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(log_mean_exp(v) == doctest::Approx(before).epsilon(1e-13));
  }
}

TEST_CASE("agent log-likelihood examples") {
  SUBCASE("perfect agent matches the environment exactly") {
    auto env = std::make_shared<CoinsEnvironment>(std::vector<double>{0.2, 0.9, 0.4});
    auto agent = make_analytic(PerfectSpec{env});
    Rng rng(1);
    for (std::size_t m : {1u, 7u, 100u}) {
      const TestBatch b = coin_batch({0, 1, 2, 1}, {1, 1, 0, 0});
      CHECK(agent_log_likelihood(*agent, b, m, rng) == environment_log_likelihood(*env, b));
    }
  }
  SUBCASE("uniform agent") {
    auto agent = make_analytic(UniformSpec{2});
    Rng rng(2);
    const TestBatch b = coin_batch({0, 4, 2}, {1, 0, 1});
    for (std::size_t m : {1u, 10u, 1000u})
      CHECK(agent_log_likelihood(*agent, b, m, rng) == doctest::Approx(3 * std::log(0.5)).epsilon(1e-15));
  }
  SUBCASE("shared-p agent converges to the Beta moment") {
    auto agent = make_analytic(SharedPSpec{});
    Rng rng(3);
    const TestBatch b = coin_batch({0, 0}, {1, 1});
    CHECK(agent_log_likelihood(*agent, b, 1000000, rng) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(4e-3));
  }
  SUBCASE("zero imagined environments is an argument error") {
    auto agent = make_analytic(UniformSpec{2});
    Rng rng(4);
    CHECK_THROWS_AS(agent_log_likelihood(*agent, coin_batch({0}, {1}), 0, rng), std::invalid_argument);
  }
}

namespace {

// Draws a constant binary predictor with P(y=1) ~ Unif(0.1, 0.9). Uses the
// default sample_log_likelihoods, so it replays exactly through
// sample_imagined.
class BoundedAgent final : public Agent {
 public:
  BoundedAgent() : Agent({"bounded", {}}, 2) {}
  std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng& rng) const override {
    std::uniform_real_distribution<double> u(0.1, 0.9);
    const double q = u(rng);
    return std::make_shared<FixedEnvironment>(ClassProbs{1.0 - q, q});
  }
};

}  // namespace

TEST_CASE("log-space agent likelihood equals the probability-space mean") {
  BoundedAgent agent;
  Rng data_rng(11);
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 100; ++rep) {
    const int tau = 1 + rep % 5;
    TestBatch b;
    for (int t = 0; t < tau; ++t) {
      b.inputs.push_back(CoinIndex{t});
      b.labels.push_back(coin(data_rng) ? 1 : 0);
    }
    const std::size_t m = 50;
    Rng a(100 + rep);
    Rng c(100 + rep);
    const double log_space = agent_log_likelihood(agent, b, m, a);
    double mean = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto f = agent.sample_imagined(c);
      double joint = 1.0;
      for (int t = 0; t < tau; ++t) joint *= f->probs(b.inputs[t])[b.labels[t]];
      mean += joint / m;
    }
    CHECK(std::abs(log_space - std::log(mean)) <= 1e-10 * std::abs(std::log(mean)));
  }
}
