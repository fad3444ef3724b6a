#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dyad/agents.hpp"

namespace dyad {

namespace {

std::string to_text(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::vector<int> layer_sizes(const ModelShape& shape) {
  std::vector<int> sizes{shape.input_dimension};
  sizes.insert(sizes.end(), shape.hidden.begin(), shape.hidden.end());
  sizes.push_back(shape.classes);
  return sizes;
}

void validate_sgd(const SgdSettings& sgd) {
  if (!(sgd.learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(sgd.l2_decay >= 0)) throw std::invalid_argument("l2 decay must be >= 0");
  if (sgd.steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (sgd.max_batch < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(sgd.momentum >= 0 && sgd.momentum < 1)) throw std::invalid_argument("momentum must be in [0,1)");
}

void validate_labels(const TrainingData& data, int classes) {
  for (const auto& example : data.pairs)
    if (example.label < 0 || example.label >= classes)
      throw std::domain_error("training label outside [0, C)");
}

std::vector<std::pair<std::string, std::string>> sgd_hyperparameters(const SgdSettings& sgd) {
  return {{"l2_decay", to_text(sgd.l2_decay)},
          {"steps", std::to_string(sgd.steps)},
          {"lr", to_text(sgd.learning_rate)}};
}

struct MemberOptions {
  double prior_scale = 0.0;
  bool bootstrap = false;
};

// Each member draws one seed from the parent stream and derives disjoint
// sub-streams from it, so adding a prior network or a bootstrap resample does
// not perturb the initialisation or the mini-batch order.
std::shared_ptr<const NetworkFunction> fit_member(std::uint64_t member_seed,
                                                  const Eigen::MatrixXd& x,
                                                  const std::vector<int>& labels,
                                                  const ModelShape& shape, const SgdSettings& sgd,
                                                  const MemberOptions& options) {
  const std::vector<int> sizes = layer_sizes(shape);
  Rng init_rng = derive_rng(member_seed, {1});
  Mlp network = Mlp::xavier(sizes, init_rng);

  std::shared_ptr<const Mlp> prior;
  if (options.prior_scale != 0.0) {
    Rng prior_rng = derive_rng(member_seed, {2});
    prior = std::make_shared<const Mlp>(Mlp::xavier(sizes, prior_rng));
  }

  Rng sgd_rng = derive_rng(member_seed, {4});
  if (options.bootstrap && x.rows() > 0) {
    Rng boot_rng = derive_rng(member_seed, {3});
    std::uniform_int_distribution<Eigen::Index> pick(0, x.rows() - 1);
    Eigen::MatrixXd xb(x.rows(), x.cols());
    std::vector<int> yb(labels.size());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::Index src = pick(boot_rng);
      xb.row(i) = x.row(src);
      yb[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
    }
    fit_network(network, prior.get(), options.prior_scale, xb, yb, sgd, sgd_rng);
  } else {
    fit_network(network, prior.get(), options.prior_scale, x, labels, sgd, sgd_rng);
  }
  return std::make_shared<const NetworkFunction>(std::move(network), std::move(prior),
                                                 options.prior_scale);
}

std::shared_ptr<const Agent> fit_ensemble(AgentInfo info, int size, const MemberOptions& options,
                                          SgdSettings sgd, const TrainingData& data,
                                          const ModelShape& shape, Rng& rng) {
  if (size < 1) throw std::invalid_argument("ensemble size must be >= 1");
  if (!(options.prior_scale >= 0) || !std::isfinite(options.prior_scale))
    throw std::invalid_argument("prior scale must be finite and >= 0");
  validate_sgd(sgd);
  validate_labels(data, shape.classes);
  sgd.steps = effective_steps(sgd, data.size(), shape.input_dimension);

  const Eigen::MatrixXd x = training_matrix(data, shape.input_dimension);
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& example : data.pairs) labels.push_back(example.label);

  std::vector<std::shared_ptr<const NetworkFunction>> members;
  members.reserve(static_cast<std::size_t>(size));
  for (int k = 0; k < size; ++k) {
    const std::uint64_t member_seed = rng();
    members.push_back(fit_member(member_seed, x, labels, shape, sgd, options));
  }
  return std::make_shared<EnsembleAgent>(std::move(info), std::move(members));
}

}  // namespace

int effective_steps(const SgdSettings& sgd, std::size_t train_size, int input_dimension) {
  if (!sgd.scale_steps_with_data || input_dimension < 1) return sgd.steps;
  const double ratio = static_cast<double>(train_size) / input_dimension;
  if (ratio <= 1.0) return std::max(1, sgd.steps / 5);
  if (ratio >= 1000.0) return sgd.steps * 5;
  return sgd.steps;
}

Eigen::MatrixXd training_matrix(const TrainingData& data, int input_dimension) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), input_dimension);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const FeatureVector& f = features_of(data.pairs[i].input);
    if (static_cast<int>(f.size()) != input_dimension)
      throw std::domain_error("training input dimension does not match the model");
    for (int d = 0; d < input_dimension; ++d)
      x(static_cast<Eigen::Index>(i), d) = f[static_cast<std::size_t>(d)];
  }
  return x;
}

void fit_network(Mlp& network, const Mlp* prior, double prior_scale, const Eigen::MatrixXd& x,
                 const std::vector<int>& labels, const SgdSettings& sgd, Rng& rng) {
  const Eigen::Index n = x.rows();
  if (n == 0 || sgd.steps <= 0) return;
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("training inputs and labels differ in length");

  auto& layers = network.layers();
  const std::size_t depth = layers.size();
  const Eigen::Index batch = std::min<Eigen::Index>(n, sgd.max_batch);
  const int classes = network.output_dim();

  Eigen::MatrixXd prior_logits;
  if (prior != nullptr && prior_scale != 0.0) prior_logits = prior_scale * prior->logits(x);

  std::vector<Eigen::MatrixXd> velocity_w;
  std::vector<Eigen::RowVectorXd> velocity_b;
  for (const auto& layer : layers) {
    velocity_w.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
    velocity_b.push_back(Eigen::RowVectorXd::Zero(layer.bias.size()));
  }

  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(batch));
  std::vector<Eigen::MatrixXd> activations(depth + 1);
  Eigen::MatrixXd grad;
  Eigen::MatrixXd grad_w;

  for (int step = 0; step < sgd.steps; ++step) {
    for (auto& r : rows) r = pick(rng);

    activations[0].resize(batch, x.cols());
    for (Eigen::Index b = 0; b < batch; ++b) activations[0].row(b) = x.row(rows[static_cast<std::size_t>(b)]);
    for (std::size_t i = 0; i < depth; ++i) {
      activations[i + 1].noalias() = activations[i] * layers[i].weights;
      activations[i + 1].rowwise() += layers[i].bias;
      if (i + 1 < depth) activations[i + 1] = activations[i + 1].cwiseMax(0.0);
    }
    Eigen::MatrixXd logits = activations[depth];
    if (prior_logits.size() != 0)
      for (Eigen::Index b = 0; b < batch; ++b) logits.row(b) += prior_logits.row(rows[static_cast<std::size_t>(b)]);

    grad = softmax_rows(logits);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const int y = labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(b)])];
      loss -= std::log(std::max(grad(b, y), 1e-300));
      grad(b, y) -= 1.0;
    }
    loss = loss / static_cast<double>(batch) + sgd.l2_decay * network.squared_weight_norm();
    if (!std::isfinite(loss))
      throw TrainingError("non-finite training loss at step " + std::to_string(step));
    grad /= static_cast<double>(batch);

    for (std::size_t i = depth; i-- > 0;) {
      grad_w.noalias() = activations[i].transpose() * grad;
      grad_w += 2.0 * sgd.l2_decay * layers[i].weights;
      const Eigen::RowVectorXd grad_b = grad.colwise().sum();
      if (i > 0) {
        Eigen::MatrixXd back = grad * layers[i].weights.transpose();
        grad = back.cwiseProduct((activations[i].array() > 0.0).cast<double>().matrix());
      }
      velocity_w[i] = sgd.momentum * velocity_w[i] + grad_w;
      velocity_b[i] = sgd.momentum * velocity_b[i] + grad_b;
      layers[i].weights -= sgd.learning_rate * velocity_w[i];
      layers[i].bias -= sgd.learning_rate * velocity_b[i];
    }
  }
  (void)classes;
}

NetworkFunction::NetworkFunction(Mlp trained, std::shared_ptr<const Mlp> prior, double prior_scale)
    : trained_(std::move(trained)), prior_(std::move(prior)), prior_scale_(prior_scale) {}

Eigen::MatrixXd NetworkFunction::logits(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out = trained_.logits(x);
  if (prior_ && prior_scale_ != 0.0) out += prior_scale_ * prior_->logits(x);
  return out;
}

ClassProbs NetworkFunction::probs(const Input& x) const {
  const Eigen::MatrixXd p = probs_batch(std::span<const Input>(&x, 1));
  return ClassProbs(p.data(), p.data() + p.size());
}

Eigen::MatrixXd NetworkFunction::probs_batch(std::span<const Input> inputs) const {
  return softmax_rows(logits(stack_features(inputs, trained_.input_dim())));
}

EnsembleAgent::EnsembleAgent(AgentInfo info, std::vector<std::shared_ptr<const NetworkFunction>> members)
    : Agent(std::move(info), members.empty() ? 0 : members.front()->class_count()),
      members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("an ensemble needs at least one member");
}

std::shared_ptr<const ImaginedEnvironment> EnsembleAgent::sample_imagined(Rng& rng) const {
  if (members_.size() == 1) return members_.front();
  std::uniform_int_distribution<std::size_t> pick(0, members_.size() - 1);
  return members_[pick(rng)];
}

// Each member's likelihood is computed once; the m draws then pick members.
void EnsembleAgent::sample_log_likelihoods(const GroupedBatch& batch, std::span<double> out,
                                           Rng& rng) const {
  std::vector<double> member_ll;
  member_ll.reserve(members_.size());
  for (const auto& member : members_) member_ll.push_back(log_likelihood(*member, batch));
  if (member_ll.size() == 1) {
    std::fill(out.begin(), out.end(), member_ll.front());
    return;
  }
  for (double& value : out) {
    std::uniform_int_distribution<std::size_t> pick(0, member_ll.size() - 1);
    value = member_ll[pick(rng)];
  }
}

std::shared_ptr<const Agent> train_mlp(const MlpSpec& spec, const TrainingData& data,
                                       const ModelShape& shape, Rng& rng) {
  return fit_ensemble({"mlp", sgd_hyperparameters(spec.sgd)}, 1, MemberOptions{}, spec.sgd, data,
                      shape, rng);
}

std::shared_ptr<const Agent> train_ensemble(const EnsembleSpec& spec, const TrainingData& data,
                                            const ModelShape& shape, Rng& rng) {
  auto hyper = sgd_hyperparameters(spec.sgd);
  hyper.emplace_back("size", std::to_string(spec.size));
  return fit_ensemble({"ensemble", std::move(hyper)}, spec.size, MemberOptions{}, spec.sgd, data,
                      shape, rng);
}

std::shared_ptr<const Agent> train_ensemble(const EnsemblePlusSpec& spec, const TrainingData& data,
                                            const ModelShape& shape, Rng& rng) {
  auto hyper = sgd_hyperparameters(spec.sgd);
  hyper.emplace_back("size", std::to_string(spec.size));
  hyper.emplace_back("prior_scale", to_text(spec.prior_scale));
  hyper.emplace_back("bootstrap", spec.bootstrap ? "true" : "false");
  return fit_ensemble({"ensemble+", std::move(hyper)}, spec.size,
                      MemberOptions{spec.prior_scale, spec.bootstrap}, spec.sgd, data, shape, rng);
}

std::shared_ptr<const Agent> train_agent(const TrainedAgentSpec& spec, const TrainingData& data,
                                         const ModelShape& shape, Rng& rng) {
  return std::visit([&](const auto& s) {
    using S = std::decay_t<decltype(s)>;
    if constexpr (std::is_same_v<S, MlpSpec>) {
      return train_mlp(s, data, shape, rng);
    } else {
      return train_ensemble(s, data, shape, rng);
    }
  }, spec);
}

}  // namespace dyad
