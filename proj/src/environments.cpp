#include "dyad/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dyad/csv.hpp"

namespace dyad {

namespace {

void label_training_inputs(const Environment& env, const InputDistribution& dist, int count,
                           Rng& rng, TrainingData& out) {
  std::vector<Input> inputs;
  inputs.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) inputs.push_back(draw_input(dist, rng));
  if (inputs.empty()) return;
  TestBatch labeled = sample_labels(env, std::move(inputs), rng);
  out.pairs.reserve(labeled.tau());
  for (std::size_t t = 0; t < labeled.tau(); ++t)
    out.pairs.push_back({std::move(labeled.inputs[t]), labeled.labels[t]});
}

}  // namespace

// ---------------------------------------------------------------------------

CoinsEnvironment::CoinsEnvironment(std::vector<double> heads_probability)
    : heads_(std::move(heads_probability)) {
  if (heads_.empty()) throw std::invalid_argument("a bag of coins needs at least one coin");
  for (double p : heads_)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("heads probability outside [0,1]");
}

double CoinsEnvironment::heads_probability(int coin) const {
  if (coin < 0 || coin >= coins()) throw std::domain_error("coin index out of range");
  return heads_[static_cast<std::size_t>(coin)];
}

ClassProbs CoinsEnvironment::probs(const Input& x) const {
  const double p = heads_probability(coin_of(x));
  return {1.0 - p, p};
}

CoinsPrior::CoinsPrior(int coins, int train_tosses) : coins_(coins), train_tosses_(train_tosses) {
  if (coins < 1) throw std::invalid_argument("CoinsPrior needs M >= 1");
  if (train_tosses < 0) throw std::invalid_argument("CoinsPrior needs T >= 0");
}

EnvironmentDraw CoinsPrior::sample(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> heads(static_cast<std::size_t>(coins_));
  for (double& p : heads) p = unif(rng);
  EnvironmentDraw draw;
  auto env = std::make_shared<CoinsEnvironment>(std::move(heads));
  label_training_inputs(*env, UniformCoins{coins_}, train_tosses_, rng, draw.training);
  draw.environment = std::move(env);
  return draw;
}

std::string CoinsPrior::describe() const {
  return "coins(M=" + std::to_string(coins_) + ",T=" + std::to_string(train_tosses_) + ")";
}

// ---------------------------------------------------------------------------

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd binary_probs(const Eigen::VectorXd& logits) {
  Eigen::MatrixXd out(logits.size(), 2);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    // Each side computed directly so that tiny probabilities keep full precision.
    out(i, 1) = sigmoid(logits(i));
    out(i, 0) = sigmoid(-logits(i));
  }
  return out;
}

LogisticEnvironment::LogisticEnvironment(Eigen::VectorXd phi, double rho)
    : phi_(std::move(phi)), rho_(rho) {
  if (phi_.size() < 1) throw std::invalid_argument("logistic environment needs D >= 1");
  if (!(rho > 0)) throw std::invalid_argument("logistic environment needs rho > 0");
}

ClassProbs LogisticEnvironment::probs(const Input& x) const {
  const FeatureVector& f = features_of(x);
  if (static_cast<Eigen::Index>(f.size()) != phi_.size())
    throw std::domain_error("input dimension does not match the logistic environment");
  const double z = rho_ * Eigen::Map<const Eigen::VectorXd>(f.data(), phi_.size()).dot(phi_);
  return {sigmoid(-z), sigmoid(z)};
}

Eigen::MatrixXd LogisticEnvironment::probs_batch(std::span<const Input> inputs) const {
  const Eigen::MatrixXd x = stack_features(inputs, static_cast<int>(phi_.size()));
  return binary_probs(rho_ * (x * phi_));
}

LogisticPrior::LogisticPrior(int dimension, double rho, int train_pairs)
    : dimension_(dimension), rho_(rho), train_pairs_(train_pairs) {
  if (dimension < 1) throw std::invalid_argument("LogisticPrior needs D >= 1");
  if (!(rho > 0)) throw std::invalid_argument("LogisticPrior needs rho > 0");
  if (train_pairs < 0) throw std::invalid_argument("LogisticPrior needs T >= 0");
}

EnvironmentDraw LogisticPrior::sample(Rng& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd phi(dimension_);
  for (Eigen::Index d = 0; d < phi.size(); ++d) phi(d) = normal(rng);
  auto env = std::make_shared<LogisticEnvironment>(std::move(phi), rho_);
  EnvironmentDraw draw;
  label_training_inputs(*env, StandardGaussian{dimension_}, train_pairs_, rng, draw.training);
  draw.environment = std::move(env);
  return draw;
}

std::string LogisticPrior::describe() const {
  std::ostringstream s;
  s << "logistic(D=" << dimension_ << ",rho=" << rho_ << ",T=" << train_pairs_ << ")";
  return s.str();
}

// ---------------------------------------------------------------------------

MlpEnvironment::MlpEnvironment(Mlp network, double rho) : network_(std::move(network)), rho_(rho) {
  if (!(rho > 0)) throw std::invalid_argument("MLP environment needs rho > 0");
  if (network_.output_dim() < 2) throw std::invalid_argument("MLP environment needs C >= 2");
}

ClassProbs MlpEnvironment::probs(const Input& x) const {
  const Eigen::MatrixXd p = probs_batch(std::span<const Input>(&x, 1));
  return ClassProbs(p.data(), p.data() + p.size());
}

Eigen::MatrixXd MlpEnvironment::probs_batch(std::span<const Input> inputs) const {
  const Eigen::MatrixXd x = stack_features(inputs, network_.input_dim());
  return softmax_rows(network_.logits(x) / rho_);
}

MlpTestbedPrior::MlpTestbedPrior(MlpTestbedConfig config) : config_(config) {
  if (config_.dimension < 1) throw std::invalid_argument("testbed needs D >= 1");
  if (config_.hidden[0] < 1 || config_.hidden[1] < 1)
    throw std::invalid_argument("testbed hidden widths must be >= 1");
  if (config_.classes < 2) throw std::invalid_argument("testbed needs C >= 2");
  if (!(config_.rho > 0)) throw std::invalid_argument("testbed needs rho > 0");
  if (config_.train_pairs < 0) throw std::invalid_argument("testbed needs T >= 0");
}

EnvironmentDraw MlpTestbedPrior::sample(Rng& rng) const {
  const std::array<int, 4> sizes = {config_.dimension, config_.hidden[0], config_.hidden[1],
                                    config_.classes};
  auto env = std::make_shared<MlpEnvironment>(Mlp::xavier(sizes, rng), config_.rho);
  EnvironmentDraw draw;
  label_training_inputs(*env, StandardGaussian{config_.dimension}, config_.train_pairs, rng,
                        draw.training);
  draw.environment = std::move(env);
  return draw;
}

std::string MlpTestbedPrior::describe() const {
  std::ostringstream s;
  s << "mlp_testbed(D=" << config_.dimension << ",hidden=" << config_.hidden[0] << "x"
    << config_.hidden[1] << ",C=" << config_.classes << ",rho=" << config_.rho
    << ",T=" << config_.train_pairs << ")";
  return s.str();
}

// ---------------------------------------------------------------------------

Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");

  std::vector<std::vector<std::string>> rows;
  while (auto row = csv::read_row(in)) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    rows.push_back(std::move(*row));
  }
  if (rows.empty()) throw std::runtime_error("dataset '" + path + "' is empty");
  // Labels may be strings, so only the feature columns decide.
  if (std::any_of(rows.front().begin(), rows.front().end() - 1,
                  [](const std::string& f) { return !csv::is_number(f); }))
    rows.erase(rows.begin());
  if (rows.empty()) throw std::runtime_error("dataset '" + path + "' has a header but no rows");

  const std::size_t width = rows.front().size();
  if (width < 2) throw std::runtime_error("dataset rows need at least one feature and a label");

  bool integer_labels = true;
  for (const auto& row : rows) {
    if (row.size() != width) throw std::runtime_error("ragged row in dataset '" + path + "'");
    try {
      csv::parse_int(row.back());
    } catch (const std::invalid_argument&) {
      integer_labels = false;
    }
  }
  std::map<std::string, int> label_index;
  if (!integer_labels) {
    std::set<std::string> names;
    for (const auto& row : rows) names.insert(row.back());
    for (const auto& name : names) label_index.emplace(name, static_cast<int>(label_index.size()));
  }

  Dataset data;
  for (const auto& row : rows) {
    FeatureVector f(width - 1);
    for (std::size_t d = 0; d + 1 < width; ++d) f[d] = csv::parse_double(row[d]);
    const int label = integer_labels ? static_cast<int>(csv::parse_int(row.back()))
                                     : label_index.at(row.back());
    if (label < 0) throw std::runtime_error("negative label in dataset '" + path + "'");
    data.features.push_back(std::move(f));
    data.labels.push_back(label);
  }
  return data;
}

Standardization fit_standardization(const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("cannot standardize an empty dataset");
  const std::size_t dim = static_cast<std::size_t>(data.dimension());
  Standardization s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  const double n = static_cast<double>(data.size());
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const auto& f : data.features) mean += f[d];
    mean /= n;
    double var = 0.0;
    for (const auto& f : data.features) var += (f[d] - mean) * (f[d] - mean);
    var /= n;
    s.mean[d] = mean;
    s.scale[d] = var > 0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

void apply_standardization(const Standardization& s, Dataset& data) {
  for (auto& f : data.features) {
    if (f.size() != s.mean.size()) throw std::domain_error("feature dimension mismatch");
    for (std::size_t d = 0; d < f.size(); ++d) f[d] = (f[d] - s.mean[d]) / s.scale[d];
  }
}

EmpiricalEnvironment::EmpiricalEnvironment(const std::vector<const Dataset*>& pools, int classes)
    : classes_(classes) {
  if (classes < 2) throw std::invalid_argument("empirical environment needs C >= 2");
  std::map<FeatureVector, std::vector<int>> counts;
  for (const Dataset* pool : pools) {
    for (std::size_t i = 0; i < pool->size(); ++i) {
      auto& c = counts[pool->features[i]];
      c.resize(static_cast<std::size_t>(classes), 0);
      c[static_cast<std::size_t>(pool->labels[i])] += 1;
    }
  }
  // Duplicated inputs with conflicting labels get the empirical label mix.
  for (auto& [x, c] : counts) {
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    ClassProbs p(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) p[k] = c[k] / total;
    table_.emplace(x, std::move(p));
  }
}

ClassProbs EmpiricalEnvironment::probs(const Input& x) const {
  const auto it = table_.find(features_of(x));
  if (it == table_.end()) throw std::domain_error("input is not in the stored dataset pools");
  return it->second;
}

EmpiricalDatasetPrior::EmpiricalDatasetPrior(Dataset train, Dataset test, EmpiricalConfig config)
    : train_(std::move(train)), test_(std::move(test)), config_(config) {
  if (train_.size() == 0 || test_.size() == 0)
    throw std::invalid_argument("empirical prior needs nonempty train and test pools");
  if (train_.dimension() != test_.dimension())
    throw std::invalid_argument("train and test pools differ in feature dimension");
  if (config_.train_subsample < 0 || static_cast<std::size_t>(config_.train_subsample) > train_.size())
    throw std::invalid_argument("subsample size T exceeds the train pool");

  int max_label = 0;
  for (int y : train_.labels) max_label = std::max(max_label, y);
  for (int y : test_.labels) max_label = std::max(max_label, y);
  classes_ = config_.classes > 0 ? config_.classes : std::max(2, max_label + 1);
  if (max_label >= classes_) throw std::invalid_argument("dataset label outside [0, C)");

  if (config_.standardize) {
    const Standardization s = fit_standardization(train_);
    apply_standardization(s, train_);
    apply_standardization(s, test_);
  }

  environment_ = std::make_shared<EmpiricalEnvironment>(
      std::vector<const Dataset*>{&train_, &test_}, classes_);
  const Dataset& anchors = config_.anchors == AnchorPool::Test ? test_ : train_;
  auto pool = std::make_shared<std::vector<Input>>();
  pool->reserve(anchors.size());
  for (const auto& f : anchors.features) pool->push_back(f);
  anchor_inputs_ = std::move(pool);
}

EnvironmentDraw EmpiricalDatasetPrior::sample(Rng& rng) const {
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = static_cast<std::size_t>(config_.train_subsample);
  // Partial Fisher-Yates: the first `take` slots are a uniform subsample.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  EnvironmentDraw draw;
  draw.environment = environment_;
  draw.training.pairs.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    draw.training.pairs.push_back({train_.features[order[i]], train_.labels[order[i]]});
  return draw;
}

InputDistribution EmpiricalDatasetPrior::test_distribution() const {
  return EmpiricalPool{anchor_inputs_};
}

std::string EmpiricalDatasetPrior::describe() const {
  std::ostringstream s;
  s << "empirical(D=" << train_.dimension() << ",C=" << classes_ << ",T=" << config_.train_subsample
    << ",train_pool=" << train_.size() << ",test_pool=" << test_.size()
    << ",anchors=" << (config_.anchors == AnchorPool::Test ? "test" : "train") << ")";
  return s.str();
}

}  // namespace dyad
