#include "dyad/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace dyad {

const FeatureVector& features_of(const Input& x) {
  if (const auto* f = std::get_if<FeatureVector>(&x)) return *f;
  throw std::domain_error("expected a feature-vector input, got a coin index");
}

int coin_of(const Input& x) {
  if (const auto* c = std::get_if<CoinIndex>(&x)) return c->value;
  throw std::domain_error("expected a coin-index input, got a feature vector");
}

void validate_class_probs(std::span<const double> probs) {
  if (probs.size() < 2) throw std::invalid_argument("class probabilities need at least 2 classes");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("class probability outside [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("class probabilities do not sum to 1");
}

Eigen::MatrixXd ConditionalDistribution::probs_batch(std::span<const Input> inputs) const {
  const int c = class_count();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), c);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ClassProbs p = probs(inputs[i]);
    if (static_cast<int>(p.size()) != c) throw std::domain_error("class count mismatch");
    for (int k = 0; k < c; ++k) out(static_cast<Eigen::Index>(i), k) = p[k];
  }
  return out;
}

GroupedBatch group_batch(const TestBatch& batch, int class_count) {
  if (batch.inputs.size() != batch.labels.size())
    throw std::invalid_argument("test batch inputs and labels differ in length");
  if (class_count < 2) throw std::invalid_argument("class_count must be at least 2");

  GroupedBatch out;
  out.tau = batch.tau();
  std::map<Input, int> slot;
  std::vector<int> row_of(batch.tau());
  for (std::size_t t = 0; t < batch.tau(); ++t) {
    auto [it, inserted] = slot.try_emplace(batch.inputs[t], static_cast<int>(out.inputs.size()));
    if (inserted) out.inputs.push_back(batch.inputs[t]);
    row_of[t] = it->second;
  }
  out.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(out.inputs.size()), class_count);
  for (std::size_t t = 0; t < batch.tau(); ++t) {
    const int y = batch.labels[t];
    if (y < 0 || y >= class_count) throw std::domain_error("label out of range");
    out.counts(row_of[t], y) += 1;
  }
  return out;
}

double grouped_log_likelihood(const Eigen::MatrixXd& probs, const GroupedBatch& batch) {
  if (probs.rows() != batch.counts.rows() || probs.cols() != batch.counts.cols())
    throw std::domain_error("probability matrix does not match the batch shape");
  double total = 0.0;
  for (Eigen::Index u = 0; u < batch.counts.rows(); ++u) {
    for (Eigen::Index c = 0; c < batch.counts.cols(); ++c) {
      const int n = batch.counts(u, c);
      if (n == 0) continue;
      total += n * std::log(std::max(probs(u, c), kProbabilityFloor));
    }
  }
  return total;
}

double log_likelihood(const ConditionalDistribution& f, const GroupedBatch& batch) {
  if (f.class_count() != batch.class_count()) throw std::domain_error("class count mismatch");
  return grouped_log_likelihood(f.probs_batch(batch.inputs), batch);
}

void Agent::sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                                   Rng& rng) const {
  for (double& value : out) value = log_likelihood(*sample_imagined(rng), batch);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp of an empty set");
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum / static_cast<double>(values.size()));
}

double environment_log_likelihood(const Environment& env, const GroupedBatch& batch) {
  return log_likelihood(env, batch);
}

double environment_log_likelihood(const Environment& env, const TestBatch& batch) {
  return log_likelihood(env, group_batch(batch, env.class_count()));
}

double agent_log_likelihood(const Agent& agent, const GroupedBatch& batch, std::size_t m_enn,
                            Rng& rng) {
  if (m_enn == 0) throw std::invalid_argument("m_enn must be at least 1");
  std::vector<double> per_sample(m_enn);
  agent.sample_log_likelihoods(batch, per_sample, rng);
  return log_mean_exp(per_sample);
}

double agent_log_likelihood(const Agent& agent, const TestBatch& batch, std::size_t m_enn,
                            Rng& rng) {
  if (batch.tau() == 0) throw std::invalid_argument("empty test batch");
  return agent_log_likelihood(agent, group_batch(batch, agent.class_count()), m_enn, rng);
}

}  // namespace dyad
