#include "dyad/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "dyad/parallel.hpp"

namespace dyad {

namespace {

constexpr std::uint64_t kEnvironmentStream = 0x656e76;
constexpr std::uint64_t kTrainingStream = 0x747261696e;
constexpr std::uint64_t kBatchStream = 0x6261746368;
constexpr std::uint64_t kAgentStream = 0x6167656e74;

struct NeumaierSum {
  double sum = 0.0;
  double compensation = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      compensation += (sum - t) + x;
    else
      compensation += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + compensation; }
};

void validate(const GridConfig& cfg) {
  if (cfg.J < 1 || cfg.N < 1) throw std::invalid_argument("J and N must be >= 1");
  if (cfg.m_enn < 1) throw std::invalid_argument("m_enn must be >= 1");
  if (cfg.evaluations.empty()) throw std::invalid_argument("no evaluations requested");
  for (const auto& e : cfg.evaluations)
    if (e.tau < 1) throw std::invalid_argument("tau must be >= 1");
}

}  // namespace

KlEstimate summarize_terms(std::span<const double> terms) {
  KlEstimate out;
  out.n_terms = terms.size();
  if (terms.empty()) return out;
  NeumaierSum total;
  for (double x : terms) total.add(x);
  out.mean = total.value() / static_cast<double>(terms.size());
  if (terms.size() > 1) {
    NeumaierSum squares;
    for (double x : terms) squares.add((x - out.mean) * (x - out.mean));
    const double variance = squares.value() / static_cast<double>(terms.size() - 1);
    out.std_error = std::sqrt(variance / static_cast<double>(terms.size()));
  }
  return out;
}

std::vector<AgentOutcome> estimate_kl_grid(const EnvironmentPrior& prior,
                                           std::span<const AgentFactory> factories,
                                           const GridConfig& cfg, std::size_t jobs) {
  validate(cfg);
  const InputDistribution dist = prior.test_distribution();
  validate_distribution(dist);
  const std::size_t A = factories.size();
  const std::size_t E = cfg.evaluations.size();
  const std::size_t J = cfg.J;
  const std::size_t N = cfg.N;
  const int classes = prior.class_count();
  const int dimension = input_dimension(dist);

  std::vector<EnvironmentDraw> draws(J);
  parallel_for(J, jobs, [&](std::size_t j) {
    Rng rng = derive_rng(cfg.seed, {kEnvironmentStream, j});
    draws[j] = prior.sample(rng);
  });

  std::vector<std::shared_ptr<const Agent>> agents(J * A);
  std::vector<std::string> failures(J * A);
  parallel_for(J * A, jobs, [&](std::size_t task) {
    const std::size_t j = task / A;
    const std::size_t a = task % A;
    TrainingContext context{dimension, classes, draws[j].environment};
    Rng rng = derive_rng(cfg.seed, {kTrainingStream, j});
    try {
      agents[task] = factories[a].train(draws[j].training, rng, context);
    } catch (const TrainingError& e) {
      failures[task] = e.what();
    }
  });

  std::vector<AgentOutcome> outcomes(A);
  std::vector<bool> active(A, true);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t j = 0; j < J; ++j) {
      if (failures[j * A + a].empty()) continue;
      outcomes[a].error = "training failed for agent '" + factories[a].name + "' at environment j=" +
                          std::to_string(j) + ": " + failures[j * A + a];
      active[a] = false;
      break;
    }
  }

  // terms[(a * E + e) * J * N + j * N + n]
  std::vector<double> terms(A * E * J * N, 0.0);
  parallel_for(J * N, jobs, [&](std::size_t cell) {
    const std::size_t j = cell / N;
    const std::size_t n = cell % N;
    const Environment& env = *draws[j].environment;
    for (std::size_t e = 0; e < E; ++e) {
      const Evaluation& ev = cfg.evaluations[e];
      const auto kappa = static_cast<std::uint64_t>(ev.sampler.kappa());
      Rng batch_rng = derive_rng(cfg.seed, {kBatchStream, j, n, ev.tau, kappa});
      std::vector<Input> inputs = sample_test_inputs(ev.sampler, dist, ev.tau, batch_rng);
      const TestBatch batch = sample_labels(env, std::move(inputs), batch_rng);
      const GroupedBatch grouped = group_batch(batch, classes);
      const double log_p = environment_log_likelihood(env, grouped);
      for (std::size_t a = 0; a < A; ++a) {
        if (!active[a]) continue;
        Rng agent_rng = derive_rng(cfg.seed, {kAgentStream, j, n, ev.tau, kappa});
        const double log_q = agent_log_likelihood(*agents[j * A + a], grouped, cfg.m_enn, agent_rng);
        const double term = log_p - log_q;
        if (!std::isfinite(term))
          throw std::logic_error("non-finite log-likelihood ratio for agent '" + factories[a].name +
                                 "'");
        terms[(a * E + e) * J * N + j * N + n] = term;
      }
    }
  });

  for (std::size_t a = 0; a < A; ++a) {
    if (!active[a]) continue;
    for (std::size_t e = 0; e < E; ++e) {
      const std::span<const double> all(terms.data() + (a * E + e) * J * N, J * N);
      EstimateReport report;
      report.overall = summarize_terms(all);
      report.per_environment.reserve(J);
      for (std::size_t j = 0; j < J; ++j) report.per_environment.push_back(summarize_terms(all.subspan(j * N, N)));
      report.config = {J, N, cfg.evaluations[e].tau, cfg.m_enn, cfg.evaluations[e].sampler, cfg.seed};
      outcomes[a].reports.push_back(std::move(report));
    }
  }
  return outcomes;
}

EstimateReport estimate_kl(const EnvironmentPrior& prior, const AgentFactory& factory,
                           const EstimatorConfig& cfg, std::size_t jobs) {
  GridConfig grid{cfg.J, cfg.N, cfg.m_enn, cfg.seed, {Evaluation{cfg.tau, cfg.sampler}}};
  auto outcomes = estimate_kl_grid(prior, std::span<const AgentFactory>(&factory, 1), grid, jobs);
  if (outcomes.front().error) throw EstimationError(*outcomes.front().error);
  return std::move(outcomes.front().reports.front());
}

KlRatio kl_ratio(const KlEstimate& a, const KlEstimate& b) {
  if (!(b.mean > 0.0) || std::abs(b.mean) < 3.0 * b.std_error)
    throw EstimationError("KL ratio undefined: denominator indistinguishable from zero");
  KlRatio r;
  r.value = a.mean / b.mean;
  r.std_error = std::sqrt(a.std_error * a.std_error + r.value * r.value * b.std_error * b.std_error) /
                std::abs(b.mean);
  return r;
}

KlRatio kl_ratio(const EstimateReport& a, const EstimateReport& b) {
  if (a.config.tau != b.config.tau || !(a.config.sampler == b.config.sampler))
    throw std::invalid_argument("KL ratio needs reports with the same tau and sampler");
  return kl_ratio(a.overall, b.overall);
}

}  // namespace dyad
