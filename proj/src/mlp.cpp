#include "dyad/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace dyad {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("an MLP needs at least one layer");
  for (std::size_t i = 1; i < layers_.size(); ++i)
    if (layers_[i].weights.rows() != layers_[i - 1].weights.cols())
      throw std::invalid_argument("MLP layer shapes do not chain");
}

Mlp Mlp::xavier(std::span<const int> sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs input and output sizes");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int fan_in = sizes[i];
    const int fan_out = sizes[i + 1];
    if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("layer widths must be >= 1");
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> unif(-bound, bound);
    DenseLayer layer;
    layer.weights.resize(fan_in, fan_out);
    for (Eigen::Index c = 0; c < fan_out; ++c)
      for (Eigen::Index r = 0; r < fan_in; ++r) layer.weights(r, c) = unif(rng);
    layer.bias = Eigen::RowVectorXd::Zero(fan_out);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::zeros(std::span<const int> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs input and output sizes");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    layers.push_back({Eigen::MatrixXd::Zero(sizes[i], sizes[i + 1]),
                      Eigen::RowVectorXd::Zero(sizes[i + 1])});
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const { return static_cast<int>(layers_.front().weights.rows()); }
int Mlp::output_dim() const { return static_cast<int>(layers_.back().weights.cols()); }

Eigen::MatrixXd Mlp::logits(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) throw std::domain_error("input dimension does not match the network");
  Eigen::MatrixXd h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::MatrixXd next = h * layers_[i].weights;
    next.rowwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

double Mlp::squared_weight_norm() const {
  double total = 0.0;
  for (const auto& layer : layers_) total += layer.weights.squaredNorm();
  return total;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - top).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Eigen::MatrixXd stack_features(std::span<const Input> inputs, int dim) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(inputs.size()), dim);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const FeatureVector& f = features_of(inputs[i]);
    if (static_cast<int>(f.size()) != dim)
      throw std::domain_error("input dimension " + std::to_string(f.size()) + " does not match " +
                              std::to_string(dim));
    for (int d = 0; d < dim; ++d) x(static_cast<Eigen::Index>(i), d) = f[static_cast<std::size_t>(d)];
  }
  return x;
}

}  // namespace dyad
