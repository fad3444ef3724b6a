#pragma once

// Dense ReLU network used both as the testbed's generative model and as the
// function class of the trained agents. Batches are row-major: one input per
// row.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "dyad/core.hpp"

namespace dyad {

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_in x fan_out
  Eigen::RowVectorXd bias;  // fan_out
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // Glorot-uniform weights with bound sqrt(6 / (fan_in + fan_out)) and zero
  // biases. `sizes` lists every layer width, input first, output last.
  static Mlp xavier(std::span<const int> sizes, Rng& rng);
  static Mlp zeros(std::span<const int> sizes);

  int input_dim() const;
  int output_dim() const;

  // ReLU on every hidden layer, identity on the output layer.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;

  double squared_weight_norm() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

// Packs feature-vector inputs into an n x dim matrix. Throws std::domain_error
// on a coin input or a dimension mismatch.
Eigen::MatrixXd stack_features(std::span<const Input> inputs, int dim);

}  // namespace dyad
