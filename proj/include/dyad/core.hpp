#pragma once

// Domain types and log-likelihood primitives shared by every module.
//
// All likelihood math is done in natural-log units. Probabilities are floored
// at kProbabilityFloor before the log so that a confidently wrong prediction
// costs a bounded number of nats instead of infinity.

#include <compare>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "dyad/rng.hpp"

namespace dyad {

inline constexpr double kProbabilityFloor = 1e-9;

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CoinIndex {
  int value = 0;
  auto operator<=>(const CoinIndex&) const = default;
};

using FeatureVector = std::vector<double>;

// A test or training input: either a coin from a finite bag, or a real
// feature vector of fixed dimension.
using Input = std::variant<CoinIndex, FeatureVector>;

const FeatureVector& features_of(const Input& x);
int coin_of(const Input& x);

// A probability vector over C >= 2 classes.
using ClassProbs = std::vector<double>;

// Throws std::invalid_argument unless probs is a valid distribution over at
// least two classes (entries in [0,1], sum within 1e-9 of one).
void validate_class_probs(std::span<const double> probs);

// A deterministic conditional label distribution x -> P(y | x). Both true
// environments and the imagined environments sampled by agents implement it.
class ConditionalDistribution {
 public:
  virtual ~ConditionalDistribution() = default;

  virtual int class_count() const = 0;
  virtual ClassProbs probs(const Input& x) const = 0;

  // Row i holds the class probabilities at inputs[i]. The default calls the
  // single-input overload; models with a vectorised forward pass override it.
  virtual Eigen::MatrixXd probs_batch(std::span<const Input> inputs) const;
};

using Environment = ConditionalDistribution;
using ImaginedEnvironment = ConditionalDistribution;

struct LabeledExample {
  Input input;
  int label = 0;
};

struct TrainingData {
  std::vector<LabeledExample> pairs;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

struct TestBatch {
  std::vector<Input> inputs;
  std::vector<int> labels;
  std::size_t tau() const { return inputs.size(); }
};

// A test batch compressed to its distinct inputs with per-class label counts.
// Under polyadic sampling this turns tau inputs into at most kappa rows.
struct GroupedBatch {
  std::vector<Input> inputs;   // distinct inputs
  Eigen::MatrixXi counts;      // inputs.size() x C
  std::size_t tau = 0;

  int class_count() const { return static_cast<int>(counts.cols()); }
};

GroupedBatch group_batch(const TestBatch& batch, int class_count);

// Sum over the batch of count * log(max(p, floor)), for a k x C matrix of
// probabilities aligned with batch.inputs.
double grouped_log_likelihood(const Eigen::MatrixXd& probs, const GroupedBatch& batch);

double log_likelihood(const ConditionalDistribution& f, const GroupedBatch& batch);

struct AgentInfo {
  std::string name;
  std::vector<std::pair<std::string, std::string>> hyperparameters;
};

// A trained agent: a distribution over imagined environments.
class Agent {
 public:
  Agent(AgentInfo info, int class_count) : info_(std::move(info)), class_count_(class_count) {}
  virtual ~Agent() = default;

  const AgentInfo& info() const { return info_; }
  int class_count() const { return class_count_; }

  virtual std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng& rng) const = 0;

  // Writes the joint log-likelihood of `batch` under out.size() independent
  // imagined environments. The default draws each one with sample_imagined;
  // agents override this with a faster route that has the same distribution.
  virtual void sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                                      Rng& rng) const;

 private:
  AgentInfo info_;
  int class_count_;
};

double log_sum_exp(std::span<const double> values);

// log((1/M) * sum_m exp(values[m])). Returns the common value exactly when
// all entries are equal.
double log_mean_exp(std::span<const double> values);

double environment_log_likelihood(const Environment& env, const TestBatch& batch);
double environment_log_likelihood(const Environment& env, const GroupedBatch& batch);

// Log of the Monte-Carlo mean of the joint likelihood over m_enn imagined
// environments. Throws std::invalid_argument when m_enn == 0.
double agent_log_likelihood(const Agent& agent, const TestBatch& batch, std::size_t m_enn,
                            Rng& rng);
double agent_log_likelihood(const Agent& agent, const GroupedBatch& batch, std::size_t m_enn,
                            Rng& rng);

struct KlEstimate {
  double mean = 0.0;       // nats
  double std_error = 0.0;  // nats
  std::size_t n_terms = 0;
};

}  // namespace dyad
