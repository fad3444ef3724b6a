#pragma once

// Test-input sampling: i.i.d. draws from the input distribution, or polyadic
// resampling from kappa i.i.d. anchor points.

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "dyad/core.hpp"

namespace dyad {

struct UniformCoins {
  int coins = 1;
};

struct StandardGaussian {
  int dimension = 1;
};

struct EmpiricalPool {
  std::shared_ptr<const std::vector<Input>> inputs;
};

using InputDistribution = std::variant<UniformCoins, StandardGaussian, EmpiricalPool>;

// Throws std::invalid_argument for an empty pool or non-positive sizes.
void validate_distribution(const InputDistribution& dist);

Input draw_input(const InputDistribution& dist, Rng& rng);

// Coin count, feature dimension, or the dimension of the first pooled input.
int input_dimension(const InputDistribution& dist);

class SamplerSpec {
 public:
  static SamplerSpec iid() { return SamplerSpec(0); }
  static SamplerSpec polyadic(int kappa);
  static SamplerSpec monadic() { return polyadic(1); }
  static SamplerSpec dyadic() { return polyadic(2); }

  // Accepts "iid", "monadic", "dyadic", "polyadic:K" or a bare integer K.
  static SamplerSpec parse(const std::string& text);

  bool is_iid() const { return kappa_ == 0; }
  // Anchor count; 0 for i.i.d. sampling.
  int kappa() const { return kappa_; }
  // "iid" or the anchor count as text, as used in result files.
  std::string label() const;

  bool operator==(const SamplerSpec&) const = default;

 private:
  explicit SamplerSpec(int kappa) : kappa_(kappa) {}
  int kappa_;
};

std::vector<Input> sample_test_inputs(const SamplerSpec& spec, const InputDistribution& dist,
                                      std::size_t tau, Rng& rng);

// Labels drawn independently from env(. | x_t) for each input.
TestBatch sample_labels(const Environment& env, std::vector<Input> inputs, Rng& rng);

// Inverse-CDF draw of a class index from a probability row.
int draw_class(std::span<const double> probs, Rng& rng);

}  // namespace dyad
