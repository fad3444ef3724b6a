#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include "dyad/csv.hpp"
#include "dyad/harness.hpp"

namespace dyad {

namespace {

using SettingKey = std::tuple<int, int, double>;
using MetricKey = std::pair<std::size_t, std::string>;

struct AgentScores {
  std::string selection;
  // seed -> setting -> score of the selected hyper id
  std::map<std::uint64_t, std::map<SettingKey, double>> by_seed;
};

std::string metric_name(std::size_t tau, const std::string& kappa) {
  if (kappa == "iid") return "d_kl^" + std::to_string(tau);
  return "d_kl^{" + std::to_string(tau) + "," + kappa + "}";
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double mean_over(const std::vector<std::uint64_t>& seeds, const std::map<std::uint64_t, double>& per_seed) {
  double total = 0.0;
  for (auto s : seeds) total += per_seed.at(s);
  return total / static_cast<double>(seeds.size());
}

}  // namespace

Report make_report(const std::vector<ResultRow>& rows, const ReportOptions& options) {
  // agent -> metric -> setting -> hyper -> seed -> score
  std::map<std::string,
           std::map<MetricKey, std::map<SettingKey, std::map<std::string, std::map<std::uint64_t, double>>>>>
      table;
  std::map<std::string, std::set<std::string>> hyper_ids;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    table[r.agent][{r.tau, r.kappa}][{r.D, r.T, r.rho}][r.hyper_id][r.seed] = r.kl_mean;
    hyper_ids[r.agent].insert(r.hyper_id);
  }
  if (!table.count(options.baseline))
    throw ReportError("baseline agent '" + options.baseline + "' has no successful rows");

  Report report;
  for (const auto& [agent, ids] : hyper_ids) report.split_seeds |= ids.size() > 1;
  auto is_report_seed = [&](std::uint64_t s) { return !report.split_seeds || s % 2 == 1; };
  auto is_tune_seed = [&](std::uint64_t s) { return !report.split_seeds || s % 2 == 0; };

  // Selection, then per-seed setting averages.
  std::map<std::string, std::map<MetricKey, AgentScores>> scores;
  for (const auto& [agent, metrics] : table) {
    for (const auto& [metric, settings] : metrics) {
      AgentScores& out = scores[agent][metric];
      for (const auto& [setting, hypers] : settings) {
        std::string best;
        double best_score = 0.0;
        for (const auto& [id, seeds] : hypers) {
          double total = 0.0;
          std::size_t n = 0;
          for (const auto& [s, v] : seeds) {
            if (!is_tune_seed(s)) continue;
            total += v;
            ++n;
          }
          if (n == 0) continue;
          const double m = total / static_cast<double>(n);
          if (best.empty() || m < best_score) {
            best = id;
            best_score = m;
          }
        }
        if (best.empty()) continue;
        if (!out.selection.empty()) out.selection += ";";
        out.selection += "D=" + std::to_string(std::get<0>(setting)) + " T=" + std::to_string(std::get<1>(setting)) +
                         " rho=" + csv::format_double(std::get<2>(setting)) + ":" + best;
        for (const auto& [s, v] : hypers.at(best))
          if (is_report_seed(s)) out.by_seed[s][setting] = v;
      }
    }
  }

  const auto& base_scores = scores.at(options.baseline);
  for (const auto& [agent, metrics] : scores) {
    for (const auto& [metric, agent_scores] : metrics) {
      const auto base_it = base_scores.find(metric);
      if (base_it == base_scores.end()) continue;
      const AgentScores& base = base_it->second;

      // Settings and seeds present for both agent and baseline.
      std::set<SettingKey> settings;
      for (const auto& [s, per] : base.by_seed)
        for (const auto& [k, v] : per) settings.insert(k);
      std::vector<std::uint64_t> seeds;
      for (const auto& [s, per] : agent_scores.by_seed) {
        const auto b = base.by_seed.find(s);
        if (b == base.by_seed.end()) continue;
        bool complete = true;
        for (const auto& k : settings) complete &= per.count(k) && b->second.count(k);
        if (complete) seeds.push_back(s);
      }
      if (seeds.empty()) continue;

      std::map<std::uint64_t, double> agent_seed, base_seed;
      std::map<SettingKey, double> agent_setting, base_setting;
      for (auto s : seeds) {
        double a = 0.0, b = 0.0;
        for (const auto& k : settings) {
          a += agent_scores.by_seed.at(s).at(k);
          b += base.by_seed.at(s).at(k);
          agent_setting[k] += agent_scores.by_seed.at(s).at(k) / static_cast<double>(seeds.size());
          base_setting[k] += base.by_seed.at(s).at(k) / static_cast<double>(seeds.size());
        }
        agent_seed[s] = a / static_cast<double>(settings.size());
        base_seed[s] = b / static_cast<double>(settings.size());
      }

      ReportLine line;
      line.agent = agent;
      line.tau = metric.first;
      line.kappa = metric.second;
      line.metric = metric_name(metric.first, metric.second);
      line.seeds = seeds.size();
      line.selection = agent_scores.selection;
      line.raw_mean = mean_over(seeds, agent_seed);
      const double base_mean = mean_over(seeds, base_seed);
      if (base_mean == 0.0) throw ReportError("baseline score is exactly zero; cannot normalize");
      line.normalized = agent == options.baseline ? 1.0 : line.raw_mean / base_mean;

      double per_setting = 0.0;
      for (const auto& k : settings) {
        if (base_setting.at(k) == 0.0) throw ReportError("baseline score is exactly zero; cannot normalize");
        per_setting += agent == options.baseline ? 1.0 : agent_setting.at(k) / base_setting.at(k);
      }
      line.per_setting_normalized = per_setting / static_cast<double>(settings.size());

      Rng rng = derive_rng(options.bootstrap_seed, {fnv1a(agent), metric.first, fnv1a(metric.second)});
      std::uniform_int_distribution<std::size_t> pick(0, seeds.size() - 1);
      std::vector<double> ratios;
      ratios.reserve(options.resamples);
      for (std::size_t b = 0; b < options.resamples; ++b) {
        double a = 0.0, z = 0.0;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
          const auto s = seeds[pick(rng)];
          a += agent_seed.at(s);
          z += base_seed.at(s);
        }
        ratios.push_back(agent == options.baseline ? 1.0 : (z == 0.0 ? 0.0 : a / z));
      }
      if (ratios.empty()) ratios.push_back(line.normalized);
      line.band_low = quantile(ratios, 0.025);
      line.band_high = quantile(ratios, 0.975);
      report.lines.push_back(std::move(line));
    }
  }
  return report;
}

void write_report_csv(const Report& report, std::ostream& out) {
  out << "# band: bootstrap 95% interval over seeds; "
      << (report.split_seeds ? "hyperparameters tuned on even seeds, scores from odd seeds"
                             : "single hyperparameter setting per agent, all seeds")
      << "\n";
  out << csv::format_row({"agent", "metric", "tau", "kappa", "raw_mean", "normalized_mean", "band_low",
                          "band_high", "per_setting_normalized", "seeds", "selection"})
      << "\n";
  for (const auto& l : report.lines) {
    out << csv::format_row({l.agent, l.metric, std::to_string(l.tau), l.kappa, csv::format_double(l.raw_mean),
                            csv::format_double(l.normalized), csv::format_double(l.band_low),
                            csv::format_double(l.band_high), csv::format_double(l.per_setting_normalized),
                            std::to_string(l.seeds), l.selection})
        << "\n";
  }
}

}  // namespace dyad
