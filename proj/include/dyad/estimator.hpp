#pragma once

// Monte-Carlo KL-loss estimation. For j = 1..J an environment and its
// training data are drawn from the prior and the agent is trained; for
// n = 1..N a test batch is drawn and log p - log p_hat is recorded.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyad/agents.hpp"
#include "dyad/core.hpp"
#include "dyad/environments.hpp"
#include "dyad/sampling.hpp"

namespace dyad {

struct EstimatorConfig {
  std::size_t J = 10;
  std::size_t N = 100;
  std::size_t tau = 1;
  std::size_t m_enn = 10000;
  SamplerSpec sampler = SamplerSpec::iid();
  std::uint64_t seed = 0;
};

struct EstimateReport {
  KlEstimate overall;
  std::vector<KlEstimate> per_environment;  // J entries
  EstimatorConfig config;
};

// Throws EstimationError if training fails for some environment draw.
EstimateReport estimate_kl(const EnvironmentPrior& prior, const AgentFactory& factory,
                           const EstimatorConfig& cfg, std::size_t jobs = 1);

// One (tau, sampler) metric evaluated on every environment draw.
struct Evaluation {
  std::size_t tau = 1;
  SamplerSpec sampler = SamplerSpec::iid();
};

struct GridConfig {
  std::size_t J = 10;
  std::size_t N = 100;
  std::size_t m_enn = 10000;
  std::uint64_t seed = 0;
  std::vector<Evaluation> evaluations;
};

struct AgentOutcome {
  std::vector<EstimateReport> reports;  // one per evaluation, empty on failure
  std::optional<std::string> error;
};

// Evaluates several agents under several metrics with shared environment
// draws and test batches. Every random stream is derived from (seed, j, n,
// metric) alone, so each agent's result is the same as running it by itself,
// and the output does not depend on `jobs`.
std::vector<AgentOutcome> estimate_kl_grid(const EnvironmentPrior& prior,
                                           std::span<const AgentFactory> factories,
                                           const GridConfig& cfg, std::size_t jobs = 1);

// Mean, and sample standard deviation over sqrt(n), with compensated sums in
// index order.
KlEstimate summarize_terms(std::span<const double> terms);

struct KlRatio {
  double value = 0.0;
  double std_error = 0.0;
};

// a.mean / b.mean with first-order error propagation. Throws EstimationError
// when b.mean <= 0 or |b.mean| < 3 * b.std_error.
KlRatio kl_ratio(const KlEstimate& a, const KlEstimate& b);
// Also requires matching tau and sampler.
KlRatio kl_ratio(const EstimateReport& a, const EstimateReport& b);

}  // namespace dyad
