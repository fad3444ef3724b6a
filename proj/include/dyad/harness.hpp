#pragma once

// Experiment sweeps: one estimator grid per (setting, seed) cell, rows
// persisted to CSV in a fixed order, and normalized reports over the rows.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyad/config.hpp"

namespace dyad {

inline constexpr const char* kCodeVersion = "0.1.0";

struct ResultRow {
  std::string experiment;
  std::string agent;
  std::string hyper_id;
  int D = 0;
  int T = 0;
  double rho = 0.0;
  std::size_t tau = 1;
  std::string kappa;  // anchor count, or "iid"
  std::uint64_t seed = 0;
  double kl_mean = 0.0;
  double kl_stderr = 0.0;
  std::size_t n_terms = 0;
  std::string status = "ok";  // ok | failed
  std::string error;

  // Everything that identifies the row, excluding results.
  std::string key() const;
  bool operator==(const ResultRow&) const = default;
};

const std::vector<std::string>& result_columns();
std::vector<std::string> to_fields(const ResultRow& row);
ResultRow from_fields(const std::vector<std::string>& fields);

struct ResultFile {
  std::string manifest;  // text after "# manifest ", empty if absent
  std::vector<ResultRow> rows;
};

// Reads a results CSV: optional "# manifest" line, header, rows.
ResultFile read_results(const std::string& path);

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;  // replaces the config's seed list
  std::optional<std::size_t> m_enn;
  std::optional<std::string> output;
  std::ostream* log = nullptr;
};

struct RunSummary {
  std::string output;
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;  // failed rows present in the file after the run
  int exit_code = 0;       // 0 all rows ok, 1 some rows failed
};

// Runs every missing row of the experiment and appends it to the output
// CSV; rows already present (ok or failed) are kept untouched. Wall times go
// to "<output>.timing.csv". Throws ConfigError if the output holds results of
// a different configuration.
RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

std::string manifest_for(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Reports

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportOptions {
  std::string baseline = "mlp";
  std::size_t resamples = 1000;
  std::uint64_t bootstrap_seed = 0;
};

struct ReportLine {
  std::string agent;
  std::size_t tau = 1;
  std::string kappa;
  std::string metric;            // "d_kl^tau" or "d_kl^{tau,kappa}"
  double raw_mean = 0.0;         // nats, mean over report seeds of the setting average
  double normalized = 0.0;       // raw_mean / baseline raw_mean
  double band_low = 0.0;         // bootstrap over seeds, 2.5%
  double band_high = 0.0;        // 97.5%
  double per_setting_normalized = 0.0;  // mean over settings of per-setting ratios
  std::size_t seeds = 0;
  std::string selection;         // chosen hyper id per setting
};

struct Report {
  std::vector<ReportLine> lines;
  bool split_seeds = false;  // true when tuning used even seeds and reporting odd ones
};

// Picks the best hyper id per (agent, setting, metric) by mean score, then
// averages over settings and seeds and divides by the baseline. When any
// agent has more than one hyper id, selection uses even seeds and the scores
// use odd seeds. Failed rows are ignored. Throws ReportError if the baseline
// has no rows.
Report make_report(const std::vector<ResultRow>& rows, const ReportOptions& options = {});

void write_report_csv(const Report& report, std::ostream& out);

}  // namespace dyad
