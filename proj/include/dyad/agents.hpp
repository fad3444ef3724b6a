#pragma once

// The agent zoo: analytic reference agents with closed-form imagined
// environments, and SGD-trained networks (single MLP, deep ensemble, and
// ensemble with randomized prior functions).

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "dyad/core.hpp"
#include "dyad/mlp.hpp"

namespace dyad {

// What a factory may know about the problem besides the training data. The
// environment handle exists only for the oracle `perfect` agent.
struct TrainingContext {
  int input_dimension = 0;  // D, or the coin count for coin inputs
  int classes = 2;
  std::shared_ptr<const Environment> environment;
};

struct AgentFactory {
  std::string name;
  std::function<std::shared_ptr<const Agent>(const TrainingData&, Rng&, const TrainingContext&)>
      train;
};

// ---------------------------------------------------------------------------
// Analytic agents

struct UniformSpec {
  int classes = 2;
};
// lambda ~ N(0,1); predicts sigmoid(rho * lambda * ||x||).
struct LogisticMarginalSpec {
  double rho = 1.0;
};
// phi ~ N(0, I_D); predicts sigmoid(rho * phi^T x).
struct LogisticPriorSpec {
  double rho = 1.0;
  int dimension = 1;
};
// p_x ~ Beta(1 + heads_x, 1 + tails_x) independently per coin.
struct CoinsBetaPosteriorSpec {
  std::vector<int> heads;
  std::vector<int> tails;
};
// One p ~ Unif(0,1) shared by every input.
struct SharedPSpec {};
struct PerfectSpec {
  std::shared_ptr<const Environment> environment;
};

using AnalyticAgentSpec = std::variant<UniformSpec, LogisticMarginalSpec, LogisticPriorSpec,
                                       CoinsBetaPosteriorSpec, SharedPSpec, PerfectSpec>;

std::shared_ptr<const Agent> make_analytic(const AnalyticAgentSpec& spec);

// Per-coin head/tail counts of coin-toss training data.
CoinsBetaPosteriorSpec coins_posterior_counts(const TrainingData& data, int coins);

// ---------------------------------------------------------------------------
// Trained agents

struct SgdSettings {
  double l2_decay = 1e-4;
  int steps = 1000;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int max_batch = 100;
  // Divide steps by 5 when T/D <= 1, multiply by 5 when T/D >= 1000.
  bool scale_steps_with_data = true;
};

struct MlpSpec {
  SgdSettings sgd;
};

struct EnsembleSpec {
  int size = 10;
  SgdSettings sgd;
};

struct EnsemblePlusSpec {
  int size = 10;
  double prior_scale = 1.0;
  bool bootstrap = false;
  SgdSettings sgd;
};

using TrainedAgentSpec = std::variant<MlpSpec, EnsembleSpec, EnsemblePlusSpec>;

struct ModelShape {
  int input_dimension = 1;
  int classes = 2;
  std::vector<int> hidden = {50, 50};
};

int effective_steps(const SgdSettings& sgd, std::size_t train_size, int input_dimension);

// Fits the network (and adds the fixed prior network scaled by prior_scale
// to its logits, when one is given) by mini-batch SGD with momentum on mean
// cross-entropy plus l2_decay * ||weights||^2. Throws TrainingError if the
// loss becomes non-finite.
void fit_network(Mlp& network, const Mlp* prior, double prior_scale, const Eigen::MatrixXd& x,
                 const std::vector<int>& labels, const SgdSettings& sgd, Rng& rng);

// A single point-estimate network; sample_imagined always returns it.
std::shared_ptr<const Agent> train_mlp(const MlpSpec& spec, const TrainingData& data,
                                       const ModelShape& shape, Rng& rng);

// Independent members; the imagined environment is a uniformly random member.
std::shared_ptr<const Agent> train_ensemble(const EnsembleSpec& spec, const TrainingData& data,
                                            const ModelShape& shape, Rng& rng);
std::shared_ptr<const Agent> train_ensemble(const EnsemblePlusSpec& spec, const TrainingData& data,
                                            const ModelShape& shape, Rng& rng);

std::shared_ptr<const Agent> train_agent(const TrainedAgentSpec& spec, const TrainingData& data,
                                         const ModelShape& shape, Rng& rng);

// One member of a trained ensemble: softmax(h(x) + scale * g(x)).
class NetworkFunction final : public ImaginedEnvironment {
 public:
  NetworkFunction(Mlp trained, std::shared_ptr<const Mlp> prior, double prior_scale);

  int class_count() const override { return trained_.output_dim(); }
  ClassProbs probs(const Input& x) const override;
  Eigen::MatrixXd probs_batch(std::span<const Input> inputs) const override;

  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;
  const Mlp& trained() const { return trained_; }

 private:
  Mlp trained_;
  std::shared_ptr<const Mlp> prior_;
  double prior_scale_;
};

class EnsembleAgent final : public Agent {
 public:
  EnsembleAgent(AgentInfo info, std::vector<std::shared_ptr<const NetworkFunction>> members);

  std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng& rng) const override;
  void sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                              Rng& rng) const override;

  const std::vector<std::shared_ptr<const NetworkFunction>>& members() const { return members_; }

 private:
  std::vector<std::shared_ptr<const NetworkFunction>> members_;
};

// Training data as a row matrix plus labels. Throws std::domain_error on
// coin inputs or inconsistent dimensions.
Eigen::MatrixXd training_matrix(const TrainingData& data, int input_dimension);

}  // namespace dyad
