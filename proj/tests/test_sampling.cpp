#include <doctest.h>

#include <limits>
#include <set>

#include "dyad/environments.hpp"
#include "dyad/sampling.hpp"
#include "helpers.hpp"

using namespace dyad;

namespace {

std::size_t distinct(const std::vector<Input>& inputs) {
  return std::set<Input>(inputs.begin(), inputs.end()).size();
}

}  // namespace

TEST_CASE("sampler specs") {
  CHECK(SamplerSpec::parse("iid").is_iid());
  CHECK(SamplerSpec::parse("monadic") == SamplerSpec::polyadic(1));
  CHECK(SamplerSpec::parse("dyadic") == SamplerSpec::polyadic(2));
  CHECK(SamplerSpec::parse("polyadic:7").kappa() == 7);
  CHECK(SamplerSpec::parse("3").kappa() == 3);
  CHECK(SamplerSpec::iid().label() == "iid");
  CHECK(SamplerSpec::dyadic().label() == "2");
  CHECK_THROWS_AS(SamplerSpec::polyadic(0), std::invalid_argument);
  CHECK_THROWS_AS(SamplerSpec::parse("triadic"), std::invalid_argument);
  CHECK_THROWS_AS(SamplerSpec::parse("polyadic:-2"), std::invalid_argument);
}

TEST_CASE("input distributions are validated") {
  CHECK_THROWS_AS(validate_distribution(UniformCoins{0}), std::invalid_argument);
  CHECK_THROWS_AS(validate_distribution(StandardGaussian{0}), std::invalid_argument);
  CHECK_THROWS_AS(validate_distribution(EmpiricalPool{std::make_shared<std::vector<Input>>()}),
                  std::invalid_argument);
  CHECK(input_dimension(UniformCoins{4}) == 4);
  CHECK(input_dimension(StandardGaussian{3}) == 3);
}

TEST_CASE("monadic batches repeat one input") {
  Rng rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    const auto x = sample_test_inputs(SamplerSpec::monadic(), StandardGaussian{3}, 10, rng);
    CHECK(x.size() == 10);
    CHECK(distinct(x) == 1);
  }
}

TEST_CASE("polyadic batches have at most min(kappa, tau) distinct inputs") {
  Rng rng(2);
  for (int kappa : {1, 2, 3, 5, 20}) {
    for (std::size_t tau : {1u, 4u, 10u}) {
      const auto x = sample_test_inputs(SamplerSpec::polyadic(kappa), StandardGaussian{2}, tau, rng);
      CHECK(x.size() == tau);
      CHECK(distinct(x) <= std::min<std::size_t>(kappa, tau));
    }
  }
}

TEST_CASE("dyadic batches contain both anchors at the binomial rate") {
  Rng rng(3);
  const int trials = 20000;
  int both = 0;
  for (int rep = 0; rep < trials; ++rep) {
    const auto x = sample_test_inputs(SamplerSpec::dyadic(), StandardGaussian{2}, 10, rng);
    REQUIRE(distinct(x) <= 2);
    both += distinct(x) == 2;
  }
  CHECK(static_cast<double>(both) / trials == doctest::Approx(1023.0 / 1024.0).epsilon(0.003));
}

TEST_CASE("iid coin batches are all distinct at the birthday rate") {
  Rng rng(4);
  const int trials = 20000;
  int all_distinct = 0;
  for (int rep = 0; rep < trials; ++rep)
    all_distinct += distinct(sample_test_inputs(SamplerSpec::iid(), UniformCoins{10}, 3, rng)) == 3;
  CHECK(std::abs(static_cast<double>(all_distinct) / trials - 0.72) < 0.02);
}

TEST_CASE("many anchors over a continuous distribution give distinct inputs") {
  Rng rng(5);
  for (int rep = 0; rep < 10000; ++rep) {
    const auto x = sample_test_inputs(SamplerSpec::polyadic(std::numeric_limits<int>::max()), StandardGaussian{2}, 10, rng);
    REQUIRE(distinct(x) == 10);
  }
}

TEST_CASE("a pool of one input behaves like monadic sampling") {
  auto pool = std::make_shared<std::vector<Input>>(std::vector<Input>{FeatureVector{1.0, 2.0}});
  Rng rng(6);
  for (const auto& spec : {SamplerSpec::iid(), SamplerSpec::dyadic(), SamplerSpec::polyadic(5)})
    CHECK(distinct(sample_test_inputs(spec, EmpiricalPool{pool}, 8, rng)) == 1);
}

TEST_CASE("sampling is a pure function of the rng state") {
  Rng a(7), b(7);
  const auto x = sample_test_inputs(SamplerSpec::polyadic(3), StandardGaussian{4}, 12, a);
  const auto y = sample_test_inputs(SamplerSpec::polyadic(3), StandardGaussian{4}, 12, b);
  CHECK(x == y);
}

TEST_CASE("label sampling") {
  SUBCASE("deterministic environment") {
    dyad::testing::FixedEnvironment env({0.0, 1.0});
    Rng rng(8);
    const auto batch = sample_labels(env, {CoinIndex{0}, CoinIndex{1}, CoinIndex{2}}, rng);
    CHECK(batch.labels == std::vector<int>{1, 1, 1});
  }
  SUBCASE("fair coin frequency") {
    CoinsEnvironment env({0.5});
    Rng rng(9);
    std::vector<Input> inputs(10000, CoinIndex{0});
    const auto batch = sample_labels(env, inputs, rng);
    double heads = 0;
    for (int y : batch.labels) heads += y;
    CHECK(std::abs(heads / 10000 - 0.5) < 0.02);
  }
  SUBCASE("repeated inputs of a deterministic dataset share their label") {
    Dataset train{{{0.0}, {1.0}}, {0, 1}};
    Dataset test{{{2.0}, {3.0}, {4.0}}, {2, 0, 1}};
    EmpiricalDatasetPrior prior(train, test, EmpiricalConfig{2, 0, AnchorPool::Test, false});
    Rng rng(10);
    const auto draw = prior.sample(rng);
    for (int rep = 0; rep < 200; ++rep) {
      auto inputs = sample_test_inputs(SamplerSpec::dyadic(), prior.test_distribution(), 10, rng);
      const auto batch = sample_labels(*draw.environment, inputs, rng);
      for (std::size_t s = 0; s < batch.tau(); ++s)
        for (std::size_t t = 0; t < batch.tau(); ++t)
          if (batch.inputs[s] == batch.inputs[t]) CHECK(batch.labels[s] == batch.labels[t]);
    }
  }
  SUBCASE("inverse CDF draw") {
    Rng rng(11);
    const std::vector<double> p = {0.0, 0.0, 1.0};
    CHECK(draw_class(p, rng) == 2);
  }
}
