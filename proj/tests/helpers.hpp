#pragma once

#include <vector>

#include "dyad/core.hpp"

namespace dyad::testing {

// The same class probabilities at every input.
class FixedEnvironment final : public Environment {
 public:
  explicit FixedEnvironment(ClassProbs p) : p_(std::move(p)) {}
  int class_count() const override { return static_cast<int>(p_.size()); }
  ClassProbs probs(const Input&) const override { return p_; }

 private:
  ClassProbs p_;
};

inline TestBatch coin_batch(std::vector<int> coins, std::vector<int> labels) {
  TestBatch b;
  for (int c : coins) b.inputs.push_back(CoinIndex{c});
  b.labels = std::move(labels);
  return b;
}

}  // namespace dyad::testing
