#pragma once

// Experiment configuration files: line-oriented key = value pairs grouped
// under [experiment], [environment], [estimator] and one [agent NAME]
// section per agent. Lists are comma separated; seeds also accept a..b
// ranges. See README.md for the full key reference.

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyad/agents.hpp"
#include "dyad/environments.hpp"
#include "dyad/estimator.hpp"

namespace dyad {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnvironmentSpec {
  std::string prior;             // coins | logistic | mlp | empirical
  std::vector<int> dimensions;   // D, or M for coins
  std::vector<int> train_sizes;  // explicit T values
  std::vector<double> lambdas;   // T = lambda * D, used when train_sizes is empty
  std::vector<double> rhos;
  std::vector<int> hidden = {50, 50};
  int classes = 2;
  std::string train_csv;
  std::string test_csv;
  AnchorPool anchors = AnchorPool::Test;
  bool standardize = true;
};

// One point of the environment grid. rho is 0 for priors without a
// temperature.
struct Setting {
  int D = 0;
  int T = 0;
  double rho = 0.0;
};

struct HyperPoint {
  std::string id;  // "key=value,..." over the keys set in the section, or "default"
  std::map<std::string, std::string> values;
};

struct AgentConfig {
  std::string name;
  std::string kind;
  std::vector<HyperPoint> grid;
};

struct ExperimentConfig {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::string output;
  std::string baseline = "mlp";
  EnvironmentSpec environment;
  std::size_t J = 10;
  std::size_t N = 100;
  std::size_t m_enn = 1000;
  std::vector<Evaluation> evaluations;
  std::vector<AgentConfig> agents;
  std::string source;  // raw text, hashed into the manifest
};

// Throws ConfigError with a line number on malformed input or failed
// validation. Relative CSV paths are resolved against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

std::vector<Setting> expand_settings(const EnvironmentSpec& env);

// Empirical priors read their CSV files on every call.
std::unique_ptr<EnvironmentPrior> make_prior(const EnvironmentSpec& env, const Setting& setting);

AgentFactory make_factory(const AgentConfig& agent, const HyperPoint& point,
                          const EnvironmentSpec& env, const Setting& setting);

std::uint64_t fnv1a(const std::string& text);

}  // namespace dyad
