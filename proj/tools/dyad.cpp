// Command-line front end: run experiment configs, build normalized reports,
// and run the built-in desk-scale reproductions.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dyad/harness.hpp"
#include "dyad/repro.hpp"

namespace {

int run_command(const std::string& config_path, const dyad::RunOptions& options) {
  try {
    const auto cfg = dyad::load_config(config_path);
    const auto summary = dyad::run_experiment(cfg, options);
    std::cout << summary.output << ": " << summary.written << " rows written, " << summary.skipped
              << " already present, " << summary.failed << " failed\n";
    std::cout << "report with: dyad report " << summary.output << " --baseline " << cfg.baseline << "\n";
    return summary.exit_code;
  } catch (const dyad::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  }
}

int report_command(const std::string& csv_path, const std::string& baseline, const std::string& out) {
  try {
    const auto file = dyad::read_results(csv_path);
    dyad::ReportOptions options;
    options.baseline = baseline;
    const auto report = dyad::make_report(file.rows, options);
    if (out.empty()) {
      dyad::write_report_csv(report, std::cout);
    } else {
      std::ofstream f(out, std::ios::binary);
      if (!f) {
        std::cerr << "cannot write " << out << "\n";
        return 2;
      }
      dyad::write_report_csv(report, f);
      std::cout << "report written to " << out << "\n";
    }
    return 0;
  } catch (const dyad::ReportError& e) {
    std::cerr << "report error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int repro_command(const std::string& id, const dyad::ReproOptions& options, bool print_config) {
  try {
    if (print_config) {
      std::cout << dyad::repro_config_text(id);
      return 0;
    }
    const auto result = dyad::run_repro(id, options);
    for (const auto& check : result.checks)
      std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << "\n";
    return result.passed() ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const dyad::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint-prediction KL-loss evaluation"};
  app.require_subcommand(1);

  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  std::size_t m_enn = 0;
  std::string out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Run this single seed instead of the configured list");
    sub->add_option("--m-enn", m_enn, "Imagined-environment samples per batch")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Output CSV path");
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Config file")->required();
  add_common(run);

  std::string csv_path;
  std::string baseline = "mlp";
  auto* report = app.add_subcommand("report", "Normalized report from a results CSV");
  report->add_option("csv", csv_path, "Results CSV")->required();
  report->add_option("--baseline", baseline, "Agent whose score is 1");
  report->add_option("--out", out, "Report CSV path (default: stdout)");

  std::string id;
  bool print_config = false;
  auto* repro = app.add_subcommand("repro", "Run a built-in reproduction");
  repro->add_option("id", id, "Reproduction id")
      ->required()
      ->check(CLI::IsMember(dyad::repro_ids()));
  repro->add_flag("--print-config", print_config, "Print the config and exit");
  add_common(repro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) {
    dyad::RunOptions options;
    options.jobs = jobs;
    if (run->count("--seed")) options.seed = seed;
    if (m_enn > 0) options.m_enn = m_enn;
    if (!out.empty()) options.output = out;
    options.log = &std::cerr;
    return run_command(config_path, options);
  }
  if (*report) return report_command(csv_path, baseline, out);

  dyad::ReproOptions options;
  options.jobs = jobs;
  if (repro->count("--seed")) options.seed = seed;
  if (m_enn > 0) options.m_enn = m_enn;
  if (!out.empty()) options.output = out;
  options.log = &std::cerr;
  return repro_command(id, options, print_config);
}
