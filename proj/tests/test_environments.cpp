#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <algorithm>

#include "dyad/environments.hpp"

using namespace dyad;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("dyad_test_" + name);
  std::ofstream(path) << text;
  return path.string();
}

double p_heads(const Environment& env, const Input& x) { return env.probs(x)[1]; }

}  // namespace

TEST_CASE("coins prior") {
  SUBCASE("a single coin has a probability in [0,1]") {
    CoinsPrior prior(1, 0);
    Rng rng(1);
    const auto draw = prior.sample(rng);
    const double p = p_heads(*draw.environment, CoinIndex{0});
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(draw.training.empty());
  }
  SUBCASE("heads probabilities average one half") {
    CoinsPrior prior(10000, 0);
    Rng rng(2);
    const auto draw = prior.sample(rng);
    double total = 0.0;
    for (int c = 0; c < 10000; ++c) total += p_heads(*draw.environment, CoinIndex{c});
    CHECK(std::abs(total / 10000 - 0.5) < 0.02);
  }
  SUBCASE("training tosses") {
    CoinsPrior prior(5, 50);
    Rng rng(3);
    const auto draw = prior.sample(rng);
    CHECK(draw.training.size() == 50);
    for (const auto& e : draw.training.pairs) {
      CHECK(coin_of(e.input) >= 0);
      CHECK(coin_of(e.input) < 5);
      CHECK((e.label == 0 || e.label == 1));
    }
  }
  SUBCASE("out of range coin") {
    CoinsEnvironment env({0.5, 0.5});
    CHECK_THROWS_AS(env.probs(CoinIndex{2}), std::domain_error);
  }
  CHECK_THROWS_AS(CoinsPrior(0, 0), std::invalid_argument);
}

TEST_CASE("logistic environment") {
  SUBCASE("orthogonal input gives one half") {
    Eigen::VectorXd phi(2);
    phi << 1.0, 0.0;
    LogisticEnvironment env(phi, 3.0);
    CHECK(p_heads(env, FeatureVector{0.0, 5.0}) == 0.5);
  }
  SUBCASE("temperature multiplies the logit") {
    LogisticEnvironment env(Eigen::VectorXd::Ones(1), 0.01);
    CHECK(p_heads(env, FeatureVector{100.0}) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  }
  SUBCASE("batched and single-input probabilities agree") {
    LogisticPrior prior(4, 2.0, 0);
    Rng rng(4);
    const auto draw = prior.sample(rng);
    std::vector<Input> xs;
    for (int i = 0; i < 5; ++i) xs.push_back(draw_input(prior.test_distribution(), rng));
    const Eigen::MatrixXd batch = draw.environment->probs_batch(xs);
    for (int i = 0; i < 5; ++i) {
      const auto p = draw.environment->probs(xs[i]);
      CHECK(batch(i, 0) == doctest::Approx(p[0]).epsilon(1e-14));
      CHECK(batch(i, 1) == doctest::Approx(p[1]).epsilon(1e-14));
    }
  }
  SUBCASE("marginal over phi is one half by symmetry") {
    LogisticPrior prior(3, 1.0, 0);
    Rng rng(5);
    const FeatureVector x = {0.3, -1.2, 0.7};
    double total = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) total += p_heads(*prior.sample(rng).environment, x);
    CHECK(std::abs(total / draws - 0.5) < 0.005);
  }
  SUBCASE("training inputs look standard normal") {
    LogisticPrior prior(3, 1.0, 400);
    Rng rng(6);
    const auto draw = prior.sample(rng);
    REQUIRE(draw.training.size() == 400);
    for (int d = 0; d < 3; ++d) {
      double mean = 0.0;
      for (const auto& e : draw.training.pairs) mean += features_of(e.input)[d] / 400.0;
      CHECK(std::abs(mean) < 4.0 / std::sqrt(400.0));
    }
  }
  SUBCASE("stable sigmoid") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) == 1.0);
  }
  CHECK_THROWS_AS(LogisticPrior(0, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(LogisticPrior(2, 0.0, 0), std::invalid_argument);
}

TEST_CASE("mlp testbed") {
  SUBCASE("zero weights give uniform probabilities") {
    const std::vector<int> sizes = {3, 50, 50, 4};
    MlpEnvironment env(Mlp::zeros(sizes), 0.1);
    const auto p = env.probs(FeatureVector{1.0, -2.0, 0.5});
    for (double v : p) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("low temperature approaches one-hot") {
    MlpTestbedPrior prior({2, {50, 50}, 3, 1e-4, 0});
    Rng rng(7);
    const auto draw = prior.sample(rng);
    const auto p = draw.environment->probs(FeatureVector{1.0, 1.0});
    CHECK(*std::max_element(p.begin(), p.end()) > 0.999);
  }
  SUBCASE("lower temperature means larger max-class probability") {
    const std::vector<double> rhos = {0.5, 0.1, 0.01};
    std::vector<double> sharpness;
    for (double rho : rhos) {
      MlpTestbedPrior prior({2, {50, 50}, 2, rho, 0});
      Rng rng(8);
      double total = 0.0;
      const int envs = 300, inputs = 20;
      for (int e = 0; e < envs; ++e) {
        const auto draw = prior.sample(rng);
        for (int i = 0; i < inputs; ++i) {
          const auto p = draw.environment->probs(draw_input(prior.test_distribution(), rng));
          total += std::max(p[0], p[1]);
        }
      }
      sharpness.push_back(total / (envs * inputs));
    }
    CHECK(sharpness[0] < sharpness[1]);
    CHECK(sharpness[1] < sharpness[2]);
  }
  SUBCASE("Xavier bounds and zero biases") {
    MlpTestbedPrior prior({10, {50, 50}, 2, 0.1, 0});
    Rng rng(9);
    const auto draw = prior.sample(rng);
    const auto& net = dynamic_cast<const MlpEnvironment&>(*draw.environment).network();
    const std::vector<int> sizes = {10, 50, 50, 2};
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
      const double bound = std::sqrt(6.0 / (sizes[i] + sizes[i + 1]));
      CHECK(net.layers()[i].weights.cwiseAbs().maxCoeff() <= bound);
      CHECK(net.layers()[i].bias.cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("training data size and replay") {
    MlpTestbedPrior prior({4, {8, 8}, 3, 0.1, 30});
    Rng a(10), b(10);
    const auto x = prior.sample(a);
    const auto y = prior.sample(b);
    REQUIRE(x.training.size() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(x.training.pairs[i].input == y.training.pairs[i].input);
      CHECK(x.training.pairs[i].label == y.training.pairs[i].label);
      CHECK(x.training.pairs[i].label < 3);
    }
  }
}

TEST_CASE("csv datasets") {
  SUBCASE("numeric labels without header") {
    const auto path = write_temp("numeric.csv", "1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,1\n");
    const Dataset d = load_csv_dataset(path);
    CHECK(d.size() == 3);
    CHECK(d.dimension() == 2);
    CHECK(d.labels == std::vector<int>{0, 1, 1});
  }
  SUBCASE("header and string labels") {
    const auto path = write_temp("strings.csv", "a,b,species\n1,2,versicolor\n3,4,setosa\n5,6,versicolor\n");
    const Dataset d = load_csv_dataset(path);
    CHECK(d.size() == 3);
    CHECK(d.labels == std::vector<int>{1, 0, 1});
  }
  SUBCASE("string labels without header") {
    const auto path = write_temp("strings_nohdr.csv", "1,2,b\n3,4,a\n");
    const Dataset d = load_csv_dataset(path);
    CHECK(d.size() == 2);
    CHECK(d.labels == std::vector<int>{1, 0});
  }
  SUBCASE("ragged rows are rejected") {
    const auto path = write_temp("ragged.csv", "1,2,0\n3,1\n");
    CHECK_THROWS(load_csv_dataset(path));
  }
  CHECK_THROWS(load_csv_dataset("/nonexistent/file.csv"));
}

TEST_CASE("empirical prior") {
  Dataset train{{{1.0, 10.0}, {2.0, 20.0}, {3.0, 30.0}, {6.0, 0.0}}, {0, 1, 2, 1}};
  Dataset test{{{0.0, 5.0}, {4.0, 25.0}}, {2, 0}};

  SUBCASE("standardization") {
    Dataset copy = train;
    const auto s = fit_standardization(copy);
    apply_standardization(s, copy);
    for (int d = 0; d < 2; ++d) {
      double mean = 0.0, var = 0.0;
      for (const auto& f : copy.features) mean += f[d] / 4.0;
      for (const auto& f : copy.features) var += (f[d] - mean) * (f[d] - mean) / 4.0;
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
  SUBCASE("deterministic labels and zero environment likelihood") {
    EmpiricalDatasetPrior prior(train, test, EmpiricalConfig{3, 0, AnchorPool::Test, true});
    CHECK(prior.class_count() == 3);
    Rng rng(11);
    const auto draw = prior.sample(rng);
    CHECK(draw.training.size() == 3);
    for (int rep = 0; rep < 20; ++rep) {
      auto x = sample_test_inputs(SamplerSpec::dyadic(), prior.test_distribution(), 10, rng);
      const auto batch = sample_labels(*draw.environment, x, rng);
      CHECK(environment_log_likelihood(*draw.environment, batch) == 0.0);
    }
  }
  SUBCASE("subsample without replacement") {
    EmpiricalDatasetPrior prior(train, test, EmpiricalConfig{4, 0, AnchorPool::Test, false});
    Rng rng(12);
    const auto draw = prior.sample(rng);
    std::set<Input> seen;
    for (const auto& e : draw.training.pairs) seen.insert(e.input);
    CHECK(seen.size() == 4);
  }
  SUBCASE("train anchors") {
    EmpiricalDatasetPrior prior(train, test, EmpiricalConfig{1, 0, AnchorPool::Train, false});
    const auto& pool = *std::get<EmpiricalPool>(prior.test_distribution()).inputs;
    CHECK(pool.size() == 4);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(EmpiricalDatasetPrior(train, test, EmpiricalConfig{5, 0, AnchorPool::Test, true}),
                    std::invalid_argument);
    EmpiricalDatasetPrior prior(train, test, EmpiricalConfig{1, 0, AnchorPool::Test, false});
    Rng rng(13);
    const auto draw = prior.sample(rng);
    CHECK_THROWS_AS(draw.environment->probs(FeatureVector{99.0, 99.0}), std::domain_error);
  }
}
