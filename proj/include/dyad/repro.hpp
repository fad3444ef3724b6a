#pragma once

// Desk-scale reproductions. Each id maps to a built-in experiment config and
// a set of pass/fail checks evaluated on the resulting rows.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dyad/harness.hpp"

namespace dyad {

struct ReproCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ReproResult {
  std::string id;
  std::vector<ReproCheck> checks;
  std::string output;
  int run_exit_code = 0;

  bool passed() const;
};

struct ReproOptions {
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> m_enn;
  std::optional<std::string> output;  // default results/repro_<id>.csv
  std::ostream* log = nullptr;
};

const std::vector<std::string>& repro_ids();

// Config text of a reproduction. Throws std::invalid_argument for unknown ids.
std::string repro_config_text(const std::string& id);

ReproResult run_repro(const std::string& id, const ReproOptions& options = {});

// Exact KL-loss of the Beta-posterior agent on a bag of M coins with no
// training data under i.i.d. sampling of tau inputs.
double coins_posterior_kl_iid(int coins, int tau);

// Probability that tau i.i.d. uniform draws from M coins contain a repeat.
double coins_repeat_probability(int coins, int tau);

}  // namespace dyad
