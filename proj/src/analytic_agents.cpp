#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "dyad/agents.hpp"
#include "dyad/environments.hpp"

namespace dyad {

namespace {

double floored_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

// Joint log-likelihood of a two-class row with logit z, summed in the same
// order as grouped_log_likelihood.
double binary_row_log_likelihood(double z, int n0, int n1) {
  double total = 0.0;
  if (n0) total += n0 * floored_log(sigmoid(-z));
  if (n1) total += n1 * floored_log(sigmoid(z));
  return total;
}

void require_binary(const GroupedBatch& batch) {
  if (batch.class_count() != 2) throw std::domain_error("this agent only predicts two classes");
}

class ConstantDistribution final : public ImaginedEnvironment {
 public:
  explicit ConstantDistribution(int classes) : classes_(classes) {}
  int class_count() const override { return classes_; }
  ClassProbs probs(const Input&) const override {
    return ClassProbs(static_cast<std::size_t>(classes_), 1.0 / classes_);
  }

 private:
  int classes_;
};

class UniformAgent final : public Agent {
 public:
  explicit UniformAgent(int classes)
      : Agent({"uniform", {{"classes", std::to_string(classes)}}}, classes),
        distribution_(std::make_shared<ConstantDistribution>(classes)) {
    if (classes < 2) throw std::invalid_argument("uniform agent needs C >= 2");
  }

  std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng&) const override {
    return distribution_;
  }

  void sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                              Rng&) const override {
    std::fill(out.begin(), out.end(), log_likelihood(*distribution_, batch));
  }

 private:
  std::shared_ptr<const ConstantDistribution> distribution_;
};

class MarginalDistribution final : public ImaginedEnvironment {
 public:
  explicit MarginalDistribution(double scale) : scale_(scale) {}
  int class_count() const override { return 2; }
  ClassProbs probs(const Input& x) const override {
    const FeatureVector& f = features_of(x);
    const double z = scale_ * Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())).norm();
    return {sigmoid(-z), sigmoid(z)};
  }

 private:
  double scale_;  // rho * lambda
};

class LogisticMarginalAgent final : public Agent {
 public:
  explicit LogisticMarginalAgent(double rho)
      : Agent({"marginal", {{"rho", std::to_string(rho)}}}, 2), rho_(rho) {}

  std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng& rng) const override {
    std::normal_distribution<double> normal;
    return std::make_shared<MarginalDistribution>(rho_ * normal(rng));
  }

  // Draws lambda exactly as sample_imagined does, so both routes agree number
  // for number.
  void sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                              Rng& rng) const override {
    require_binary(batch);
    const auto k = static_cast<Eigen::Index>(batch.inputs.size());
    Eigen::VectorXd norms(k);
    for (Eigen::Index u = 0; u < k; ++u) {
      const FeatureVector& f = features_of(batch.inputs[static_cast<std::size_t>(u)]);
      norms(u) = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())).norm();
    }
    for (double& value : out) {
      std::normal_distribution<double> normal;
      const double scale = rho_ * normal(rng);
      double total = 0.0;
      for (Eigen::Index u = 0; u < k; ++u)
        total += binary_row_log_likelihood(scale * norms(u), batch.counts(u, 0), batch.counts(u, 1));
      value = total;
    }
  }

 private:
  double rho_;
};

class LogisticPriorAgent final : public Agent {
 public:
  LogisticPriorAgent(double rho, int dimension)
      : Agent({"prior", {{"rho", std::to_string(rho)}, {"D", std::to_string(dimension)}}}, 2),
        rho_(rho),
        dimension_(dimension) {
    if (dimension < 1) throw std::invalid_argument("prior agent needs D >= 1");
  }

  std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng& rng) const override {
    std::normal_distribution<double> normal;
    Eigen::VectorXd phi(dimension_);
    for (Eigen::Index d = 0; d < phi.size(); ++d) phi(d) = normal(rng);
    return std::make_shared<LogisticEnvironment>(std::move(phi), rho_);
  }

  // Only the logits at the k distinct batch inputs matter. They are jointly
  // N(0, rho^2 G) with G the Gram matrix of those inputs, so when k < D they
  // are drawn from a Cholesky factor of G with k normals instead of D.
  void sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                              Rng& rng) const override {
    require_binary(batch);
    const Eigen::MatrixXd x = stack_features(batch.inputs, dimension_);
    const Eigen::Index k = x.rows();
    const auto m = static_cast<Eigen::Index>(out.size());

    Eigen::MatrixXd factor;  // logits = factor * standard normals
    if (k < dimension_) {
      Eigen::LLT<Eigen::MatrixXd> llt(x * x.transpose());
      if (llt.info() == Eigen::Success) factor = llt.matrixL();
    }
    if (factor.size() == 0) factor = x;

    constexpr Eigen::Index kBlock = 256;
    std::normal_distribution<double> normal;
    Eigen::MatrixXd noise;
    Eigen::MatrixXd logits;
    for (Eigen::Index start = 0; start < m; start += kBlock) {
      const Eigen::Index width = std::min(kBlock, m - start);
      noise.resize(factor.cols(), width);
      for (Eigen::Index j = 0; j < width; ++j)
        for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = normal(rng);
      logits.noalias() = rho_ * (factor * noise);  // k x width
      for (Eigen::Index j = 0; j < width; ++j) {
        double total = 0.0;
        for (Eigen::Index u = 0; u < k; ++u)
          total += binary_row_log_likelihood(logits(u, j), batch.counts(u, 0), batch.counts(u, 1));
        out[static_cast<std::size_t>(start + j)] = total;
      }
    }
  }

 private:
  double rho_;
  int dimension_;
};

double draw_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

class CoinsBetaPosteriorAgent final : public Agent {
 public:
  explicit CoinsBetaPosteriorAgent(CoinsBetaPosteriorSpec spec)
      : Agent({"beta_posterior", {}}, 2), counts_(std::move(spec)) {
    if (counts_.heads.size() != counts_.tails.size() || counts_.heads.empty())
      throw std::invalid_argument("beta posterior needs matching, nonempty head/tail counts");
    for (std::size_t i = 0; i < counts_.heads.size(); ++i)
      if (counts_.heads[i] < 0 || counts_.tails[i] < 0)
        throw std::invalid_argument("beta posterior counts must be nonnegative");
  }

  std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng& rng) const override {
    std::vector<double> p(counts_.heads.size());
    for (std::size_t i = 0; i < p.size(); ++i)
      p[i] = draw_beta(1.0 + counts_.heads[i], 1.0 + counts_.tails[i], rng);
    return std::make_shared<CoinsEnvironment>(std::move(p));
  }

  // Draws only the coins that appear in the batch.
  void sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                              Rng& rng) const override {
    require_binary(batch);
    std::vector<int> coins;
    for (const Input& x : batch.inputs) {
      const int c = coin_of(x);
      if (c < 0 || static_cast<std::size_t>(c) >= counts_.heads.size())
        throw std::domain_error("coin index out of range for the posterior agent");
      coins.push_back(c);
    }
    for (double& value : out) {
      double total = 0.0;
      for (std::size_t u = 0; u < coins.size(); ++u) {
        const auto c = static_cast<std::size_t>(coins[u]);
        const double p = draw_beta(1.0 + counts_.heads[c], 1.0 + counts_.tails[c], rng);
        const auto row = static_cast<Eigen::Index>(u);
        if (batch.counts(row, 0)) total += batch.counts(row, 0) * floored_log(1.0 - p);
        if (batch.counts(row, 1)) total += batch.counts(row, 1) * floored_log(p);
      }
      value = total;
    }
  }

 private:
  CoinsBetaPosteriorSpec counts_;
};

class SharedPDistribution final : public ImaginedEnvironment {
 public:
  explicit SharedPDistribution(double p) : p_(p) {}
  int class_count() const override { return 2; }
  ClassProbs probs(const Input&) const override { return {1.0 - p_, p_}; }

 private:
  double p_;
};

class SharedPAgent final : public Agent {
 public:
  SharedPAgent() : Agent({"shared_p", {}}, 2) {}

  std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng& rng) const override {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return std::make_shared<SharedPDistribution>(unif(rng));
  }

  void sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                              Rng& rng) const override {
    require_binary(batch);
    for (double& value : out) {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const double p = unif(rng);
      const double log_tails = floored_log(1.0 - p);
      const double log_heads = floored_log(p);
      double total = 0.0;
      for (Eigen::Index u = 0; u < batch.counts.rows(); ++u) {
        if (batch.counts(u, 0)) total += batch.counts(u, 0) * log_tails;
        if (batch.counts(u, 1)) total += batch.counts(u, 1) * log_heads;
      }
      value = total;
    }
  }
};

class PerfectAgent final : public Agent {
 public:
  explicit PerfectAgent(std::shared_ptr<const Environment> env)
      : Agent({"perfect", {}}, env ? env->class_count() : 0), env_(std::move(env)) {
    if (!env_) throw std::invalid_argument("perfect agent needs an environment");
  }

  std::shared_ptr<const ImaginedEnvironment> sample_imagined(Rng&) const override { return env_; }

  // Same function as environment_log_likelihood, so log p - log p_hat is 0.
  void sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                              Rng&) const override {
    std::fill(out.begin(), out.end(), environment_log_likelihood(*env_, batch));
  }

 private:
  std::shared_ptr<const Environment> env_;
};

}  // namespace

std::shared_ptr<const Agent> make_analytic(const AnalyticAgentSpec& spec) {
  struct Visitor {
    std::shared_ptr<const Agent> operator()(const UniformSpec& s) const {
      return std::make_shared<UniformAgent>(s.classes);
    }
    std::shared_ptr<const Agent> operator()(const LogisticMarginalSpec& s) const {
      if (!std::isfinite(s.rho)) throw std::invalid_argument("rho must be finite");
      return std::make_shared<LogisticMarginalAgent>(s.rho);
    }
    std::shared_ptr<const Agent> operator()(const LogisticPriorSpec& s) const {
      if (!std::isfinite(s.rho)) throw std::invalid_argument("rho must be finite");
      return std::make_shared<LogisticPriorAgent>(s.rho, s.dimension);
    }
    std::shared_ptr<const Agent> operator()(const CoinsBetaPosteriorSpec& s) const {
      return std::make_shared<CoinsBetaPosteriorAgent>(s);
    }
    std::shared_ptr<const Agent> operator()(const SharedPSpec&) const {
      return std::make_shared<SharedPAgent>();
    }
    std::shared_ptr<const Agent> operator()(const PerfectSpec& s) const {
      return std::make_shared<PerfectAgent>(s.environment);
    }
  };
  return std::visit(Visitor{}, spec);
}

CoinsBetaPosteriorSpec coins_posterior_counts(const TrainingData& data, int coins) {
  if (coins < 1) throw std::invalid_argument("coin count must be >= 1");
  CoinsBetaPosteriorSpec spec{std::vector<int>(static_cast<std::size_t>(coins), 0),
                              std::vector<int>(static_cast<std::size_t>(coins), 0)};
  for (const auto& [x, y] : data.pairs) {
    const int c = coin_of(x);
    if (c < 0 || c >= coins) throw std::domain_error("coin index out of range");
    if (y == 1) {
      ++spec.heads[static_cast<std::size_t>(c)];
    } else if (y == 0) {
      ++spec.tails[static_cast<std::size_t>(c)];
    } else {
      throw std::domain_error("coin toss label must be 0 or 1");
    }
  }
  return spec;
}

}  // namespace dyad
