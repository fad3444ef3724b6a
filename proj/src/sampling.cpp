#include "dyad/sampling.hpp"

#include <charconv>
#include <map>
#include <stdexcept>

namespace dyad {

void validate_distribution(const InputDistribution& dist) {
  if (const auto* c = std::get_if<UniformCoins>(&dist); c && c->coins < 1)
    throw std::invalid_argument("UniformCoins needs at least one coin");
  if (const auto* g = std::get_if<StandardGaussian>(&dist); g && g->dimension < 1)
    throw std::invalid_argument("StandardGaussian needs dimension >= 1");
  if (const auto* p = std::get_if<EmpiricalPool>(&dist); p && (!p->inputs || p->inputs->empty()))
    throw std::invalid_argument("EmpiricalPool is empty");
}

int input_dimension(const InputDistribution& dist) {
  validate_distribution(dist);
  if (const auto* c = std::get_if<UniformCoins>(&dist)) return c->coins;
  if (const auto* g = std::get_if<StandardGaussian>(&dist)) return g->dimension;
  const auto& first = std::get<EmpiricalPool>(dist).inputs->front();
  if (const auto* f = std::get_if<FeatureVector>(&first)) return static_cast<int>(f->size());
  return 1;
}

Input draw_input(const InputDistribution& dist, Rng& rng) {
  struct Visitor {
    Rng& rng;
    Input operator()(const UniformCoins& c) const {
      std::uniform_int_distribution<int> pick(0, c.coins - 1);
      return CoinIndex{pick(rng)};
    }
    Input operator()(const StandardGaussian& g) const {
      std::normal_distribution<double> normal;
      FeatureVector x(static_cast<std::size_t>(g.dimension));
      for (double& v : x) v = normal(rng);
      return x;
    }
    Input operator()(const EmpiricalPool& p) const {
      std::uniform_int_distribution<std::size_t> pick(0, p.inputs->size() - 1);
      return (*p.inputs)[pick(rng)];
    }
  };
  return std::visit(Visitor{rng}, dist);
}

SamplerSpec SamplerSpec::polyadic(int kappa) {
  if (kappa < 1) throw std::invalid_argument("polyadic sampling needs kappa >= 1");
  return SamplerSpec(kappa);
}

SamplerSpec SamplerSpec::parse(const std::string& text) {
  if (text == "iid") return iid();
  if (text == "monadic") return monadic();
  if (text == "dyadic") return dyadic();
  std::string digits = text;
  if (digits.rfind("polyadic:", 0) == 0) digits = digits.substr(9);
  int kappa = 0;
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), kappa);
  if (ec != std::errc() || end != digits.data() + digits.size() || digits.empty())
    throw std::invalid_argument("unknown sampler '" + text + "'");
  return polyadic(kappa);
}

std::string SamplerSpec::label() const {
  return is_iid() ? std::string("iid") : std::to_string(kappa_);
}

std::vector<Input> sample_test_inputs(const SamplerSpec& spec, const InputDistribution& dist,
                                      std::size_t tau, Rng& rng) {
  if (tau == 0) throw std::invalid_argument("tau must be at least 1");
  validate_distribution(dist);

  std::vector<Input> inputs;
  inputs.reserve(tau);
  if (spec.is_iid()) {
    for (std::size_t t = 0; t < tau; ++t) inputs.push_back(draw_input(dist, rng));
    return inputs;
  }

  // Anchors and the resampling pattern come from disjoint child streams.
  // Anchor k is keyed by its index, so only the anchors in use are drawn.
  Rng anchor_rng = split_rng(rng, 1);
  Rng pattern_rng = split_rng(rng, 2);
  const std::uint64_t anchor_seed = anchor_rng();
  std::uniform_int_distribution<std::uint64_t> pick(0, static_cast<std::uint64_t>(spec.kappa()) - 1);
  std::map<std::uint64_t, Input> anchors;
  for (std::size_t t = 0; t < tau; ++t) {
    const std::uint64_t k = pick(pattern_rng);
    auto it = anchors.find(k);
    if (it == anchors.end()) {
      Rng draw = derive_rng(anchor_seed, {k});
      it = anchors.emplace(k, draw_input(dist, draw)).first;
    }
    inputs.push_back(it->second);
  }
  return inputs;
}

int draw_class(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cumulative = 0.0;
  for (std::size_t c = 0; c + 1 < probs.size(); ++c) {
    cumulative += probs[c];
    if (u < cumulative) return static_cast<int>(c);
  }
  return static_cast<int>(probs.size()) - 1;
}

TestBatch sample_labels(const Environment& env, std::vector<Input> inputs, Rng& rng) {
  if (inputs.empty()) throw std::invalid_argument("cannot label an empty input set");
  const Eigen::MatrixXd probs = env.probs_batch(inputs);
  TestBatch batch;
  batch.labels.reserve(inputs.size());
  std::vector<double> row(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) row[static_cast<std::size_t>(c)] = probs(t, c);
    batch.labels.push_back(draw_class(row, rng));
  }
  batch.inputs = std::move(inputs);
  return batch;
}

}  // namespace dyad
