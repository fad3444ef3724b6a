#pragma once

// Environment priors. Each prior maps an rng state to a freshly drawn
// environment together with its training data, and says where test inputs
// come from.

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dyad/core.hpp"
#include "dyad/mlp.hpp"
#include "dyad/sampling.hpp"

namespace dyad {

struct EnvironmentDraw {
  std::shared_ptr<const Environment> environment;
  TrainingData training;
};

class EnvironmentPrior {
 public:
  virtual ~EnvironmentPrior() = default;

  // Deterministic given the rng state.
  virtual EnvironmentDraw sample(Rng& rng) const = 0;
  virtual InputDistribution test_distribution() const = 0;
  virtual int class_count() const = 0;
  virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// Bag of coins: coin x lands heads with probability p_x ~ Unif(0,1).

class CoinsEnvironment final : public Environment {
 public:
  explicit CoinsEnvironment(std::vector<double> heads_probability);

  int class_count() const override { return 2; }
  ClassProbs probs(const Input& x) const override;

  int coins() const { return static_cast<int>(heads_.size()); }
  double heads_probability(int coin) const;

 private:
  std::vector<double> heads_;
};

class CoinsPrior final : public EnvironmentPrior {
 public:
  CoinsPrior(int coins, int train_tosses);

  // Training data: train_tosses coins drawn uniformly, each tossed once.
  EnvironmentDraw sample(Rng& rng) const override;
  InputDistribution test_distribution() const override { return UniformCoins{coins_}; }
  int class_count() const override { return 2; }
  std::string describe() const override;

  int coins() const { return coins_; }
  int train_tosses() const { return train_tosses_; }

 private:
  int coins_;
  int train_tosses_;
};

// ---------------------------------------------------------------------------
// Logistic regression: P(y=1 | x) = sigmoid(rho * phi^T x), phi ~ N(0, I_D).
// Note that rho multiplies the logit here, so larger rho means less label
// noise.

double sigmoid(double z);

class LogisticEnvironment final : public Environment {
 public:
  LogisticEnvironment(Eigen::VectorXd phi, double rho);

  int class_count() const override { return 2; }
  ClassProbs probs(const Input& x) const override;
  Eigen::MatrixXd probs_batch(std::span<const Input> inputs) const override;

  const Eigen::VectorXd& phi() const { return phi_; }
  double rho() const { return rho_; }

 private:
  Eigen::VectorXd phi_;
  double rho_;
};

// k x 2 probability rows [1 - sigmoid(z), sigmoid(z)] for a vector of logits.
Eigen::MatrixXd binary_probs(const Eigen::VectorXd& logits);

class LogisticPrior final : public EnvironmentPrior {
 public:
  LogisticPrior(int dimension, double rho, int train_pairs);

  EnvironmentDraw sample(Rng& rng) const override;
  InputDistribution test_distribution() const override { return StandardGaussian{dimension_}; }
  int class_count() const override { return 2; }
  std::string describe() const override;

  int dimension() const { return dimension_; }
  double rho() const { return rho_; }

 private:
  int dimension_;
  double rho_;
  int train_pairs_;
};

// ---------------------------------------------------------------------------
// Random-MLP testbed: a Xavier-initialised ReLU network with zero biases;
// class probabilities are softmax(logits / rho). Here rho divides, so smaller
// rho means less label noise.

class MlpEnvironment final : public Environment {
 public:
  MlpEnvironment(Mlp network, double rho);

  int class_count() const override { return network_.output_dim(); }
  ClassProbs probs(const Input& x) const override;
  Eigen::MatrixXd probs_batch(std::span<const Input> inputs) const override;

  const Mlp& network() const { return network_; }

 private:
  Mlp network_;
  double rho_;
};

struct MlpTestbedConfig {
  int dimension = 2;
  std::array<int, 2> hidden = {50, 50};
  int classes = 2;
  double rho = 0.1;
  int train_pairs = 0;
};

class MlpTestbedPrior final : public EnvironmentPrior {
 public:
  explicit MlpTestbedPrior(MlpTestbedConfig config);

  EnvironmentDraw sample(Rng& rng) const override;
  InputDistribution test_distribution() const override { return StandardGaussian{config_.dimension}; }
  int class_count() const override { return config_.classes; }
  std::string describe() const override;

  const MlpTestbedConfig& config() const { return config_; }

 private:
  MlpTestbedConfig config_;
};

// ---------------------------------------------------------------------------
// Empirical datasets in the low-temperature limit: every stored input has a
// deterministic label, so the environment log-likelihood of any batch is 0
// and the KL estimate reduces to the agent's negative log-likelihood.

struct Dataset {
  std::vector<FeatureVector> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  int dimension() const { return features.empty() ? 0 : static_cast<int>(features.front().size()); }
};

// CSV with numeric features and the label in the last column. A header row
// is detected when any feature field of the first row is not numeric. Labels that are
// all integers are used as-is; otherwise distinct label strings are mapped to
// indices in sorted order.
Dataset load_csv_dataset(const std::string& path);

struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;  // population standard deviation, 1 for constant features
};

Standardization fit_standardization(const Dataset& data);
void apply_standardization(const Standardization& s, Dataset& data);

class EmpiricalEnvironment final : public Environment {
 public:
  EmpiricalEnvironment(const std::vector<const Dataset*>& pools, int classes);

  int class_count() const override { return classes_; }
  // Throws std::domain_error for inputs not in the stored pools.
  ClassProbs probs(const Input& x) const override;

 private:
  std::map<FeatureVector, ClassProbs> table_;
  int classes_;
};

enum class AnchorPool { Test, Train };

struct EmpiricalConfig {
  int train_subsample = 0;  // T; must not exceed the train pool
  int classes = 0;          // 0 infers max label + 1 over both pools
  AnchorPool anchors = AnchorPool::Test;
  bool standardize = true;
};

class EmpiricalDatasetPrior final : public EnvironmentPrior {
 public:
  EmpiricalDatasetPrior(Dataset train, Dataset test, EmpiricalConfig config);

  // Training data is a uniform subsample of the train pool without replacement.
  EnvironmentDraw sample(Rng& rng) const override;
  InputDistribution test_distribution() const override;
  int class_count() const override { return classes_; }
  std::string describe() const override;

  const Dataset& train_pool() const { return train_; }
  const Dataset& test_pool() const { return test_; }

 private:
  Dataset train_;
  Dataset test_;
  EmpiricalConfig config_;
  int classes_;
  std::shared_ptr<const Environment> environment_;
  std::shared_ptr<const std::vector<Input>> anchor_inputs_;
};

}  // namespace dyad
