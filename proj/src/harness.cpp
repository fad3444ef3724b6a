#include "dyad/harness.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "dyad/csv.hpp"
#include "dyad/parallel.hpp"

namespace dyad {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

const std::vector<std::string>& timing_columns() {
  static const std::vector<std::string> c = {"experiment", "agent", "hyper_id", "D",    "T",
                                             "rho",        "tau",   "kappa",    "seed", "wall_time_s"};
  return c;
}

struct PendingCell {
  std::vector<ResultRow> rows;
  double seconds = 0.0;
  bool ready = false;
};

}  // namespace

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> c = {"experiment", "agent",   "hyper_id",  "D",       "T",
                                             "rho",        "tau",     "kappa",     "seed",    "kl_mean",
                                             "kl_stderr",  "n_terms", "status",    "error"};
  return c;
}

std::string ResultRow::key() const {
  return csv::format_row({experiment, agent, hyper_id, std::to_string(D), std::to_string(T),
                          csv::format_double(rho), std::to_string(tau), kappa, std::to_string(seed)});
}

std::vector<std::string> to_fields(const ResultRow& r) {
  return {r.experiment,
          r.agent,
          r.hyper_id,
          std::to_string(r.D),
          std::to_string(r.T),
          csv::format_double(r.rho),
          std::to_string(r.tau),
          r.kappa,
          std::to_string(r.seed),
          csv::format_double(r.kl_mean),
          csv::format_double(r.kl_stderr),
          std::to_string(r.n_terms),
          r.status,
          r.error};
}

ResultRow from_fields(const std::vector<std::string>& f) {
  if (f.size() != result_columns().size())
    throw std::runtime_error("result row has " + std::to_string(f.size()) + " fields, expected " +
                             std::to_string(result_columns().size()));
  ResultRow r;
  r.experiment = f[0];
  r.agent = f[1];
  r.hyper_id = f[2];
  r.D = static_cast<int>(csv::parse_int(f[3]));
  r.T = static_cast<int>(csv::parse_int(f[4]));
  r.rho = csv::parse_double(f[5]);
  r.tau = static_cast<std::size_t>(csv::parse_int(f[6]));
  r.kappa = f[7];
  r.seed = static_cast<std::uint64_t>(std::stoull(f[8]));
  r.kl_mean = csv::parse_double(f[9]);
  r.kl_stderr = csv::parse_double(f[10]);
  r.n_terms = static_cast<std::size_t>(csv::parse_int(f[11]));
  r.status = f[12];
  r.error = f[13];
  return r;
}

ResultFile read_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read results file " + path);
  ResultFile out;
  bool header_seen = false;
  while (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
    const std::string tag = "# manifest ";
    if (line.rfind(tag, 0) == 0) out.manifest = line.substr(tag.size());
  }
  while (auto fields = csv::read_row(in)) {
    if (fields->size() == 1 && fields->front().empty()) continue;
    if (!header_seen) {
      if (*fields != result_columns()) throw std::runtime_error("unexpected header in " + path);
      header_seen = true;
      continue;
    }
    out.rows.push_back(from_fields(*fields));
  }
  return out;
}

std::string manifest_for(const ExperimentConfig& cfg) {
  std::string seeds;
  for (auto s : cfg.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  std::ostringstream text;
  text << cfg.source << "\n--seeds=" << seeds << "\n--m_enn=" << cfg.m_enn;
  return "config_hash=" + hex64(fnv1a(text.str())) + " code_version=" + kCodeVersion +
         " seeds=" + seeds + " m_enn=" + std::to_string(cfg.m_enn);
}

RunSummary run_experiment(const ExperimentConfig& base, const RunOptions& options) {
  ExperimentConfig cfg = base;
  if (options.seed) cfg.seeds = {*options.seed};
  if (options.m_enn) cfg.m_enn = *options.m_enn;
  if (options.output) cfg.output = *options.output;
  if (cfg.output.empty()) throw ConfigError("no output path");

  const std::string manifest = manifest_for(cfg);
  RunSummary summary;
  summary.output = cfg.output;

  std::set<std::string> done;
  const bool exists = std::filesystem::exists(cfg.output) && std::filesystem::file_size(cfg.output) > 0;
  if (exists) {
    const ResultFile previous = read_results(cfg.output);
    if (previous.manifest != manifest)
      throw ConfigError("output " + cfg.output + " holds results of a different configuration");
    for (const auto& r : previous.rows) {
      done.insert(r.key());
      if (r.status != "ok") ++summary.failed;
    }
  }

  const std::vector<Setting> settings = expand_settings(cfg.environment);
  struct Cell {
    Setting setting;
    std::uint64_t seed;
    std::vector<ResultRow> missing;
  };
  std::vector<Cell> cells;
  for (const auto& setting : settings) {
    for (auto seed : cfg.seeds) {
      Cell cell{setting, seed, {}};
      for (const auto& agent : cfg.agents) {
        for (const auto& point : agent.grid) {
          for (const auto& ev : cfg.evaluations) {
            ResultRow r;
            r.experiment = cfg.name;
            r.agent = agent.name;
            r.hyper_id = point.id;
            r.D = setting.D;
            r.T = setting.T;
            r.rho = setting.rho;
            r.tau = ev.tau;
            r.kappa = ev.sampler.label();
            r.seed = seed;
            if (done.count(r.key())) {
              ++summary.skipped;
            } else {
              cell.missing.push_back(std::move(r));
            }
          }
        }
      }
      if (!cell.missing.empty()) cells.push_back(std::move(cell));
    }
  }

  if (!std::filesystem::path(cfg.output).parent_path().empty())
    std::filesystem::create_directories(std::filesystem::path(cfg.output).parent_path());
  std::ofstream out(cfg.output, std::ios::binary | std::ios::app);
  if (!out) throw ConfigError("cannot write output " + cfg.output);
  const std::string timing_path = cfg.output + ".timing.csv";
  const bool timing_exists = std::filesystem::exists(timing_path) && std::filesystem::file_size(timing_path) > 0;
  std::ofstream timing(timing_path, std::ios::binary | std::ios::app);
  if (!exists) {
    out << "# manifest " << manifest << "\n" << csv::format_row(result_columns()) << "\n";
    out.flush();
  }
  if (!timing_exists) timing << csv::format_row(timing_columns()) << "\n";

  const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
  const std::size_t cell_workers = std::min(jobs, std::max<std::size_t>(1, cells.size()));
  const std::size_t inner_jobs = std::max<std::size_t>(1, jobs / cell_workers);

  std::mutex writer;
  std::vector<PendingCell> pending(cells.size());
  std::size_t next_to_write = 0;

  auto flush_ready = [&] {
    while (next_to_write < pending.size() && pending[next_to_write].ready) {
      PendingCell& p = pending[next_to_write];
      for (const auto& r : p.rows) {
        out << csv::format_row(to_fields(r)) << "\n";
        out.flush();
        auto key_fields = to_fields(r);
        key_fields.resize(9);
        key_fields.push_back(csv::format_double(p.seconds));
        timing << csv::format_row(key_fields) << "\n";
        ++summary.written;
        if (r.status != "ok") ++summary.failed;
      }
      timing.flush();
      p.rows.clear();
      ++next_to_write;
    }
  };

  parallel_for(cells.size(), cell_workers, [&](std::size_t c) {
    const Cell& cell = cells[c];
    const auto start = std::chrono::steady_clock::now();
    std::vector<ResultRow> rows = cell.missing;

    std::vector<AgentFactory> factories;
    std::vector<std::string> factory_keys;
    for (const auto& agent : cfg.agents) {
      for (const auto& point : agent.grid) {
        bool needed = false;
        for (const auto& r : rows) needed |= (r.agent == agent.name && r.hyper_id == point.id);
        if (!needed) continue;
        factories.push_back(make_factory(agent, point, cfg.environment, cell.setting));
        factory_keys.push_back(agent.name + "\n" + point.id);
      }
    }

    try {
      const auto prior = make_prior(cfg.environment, cell.setting);
      GridConfig grid{cfg.J, cfg.N, cfg.m_enn, cell.seed, cfg.evaluations};
      const auto outcomes = estimate_kl_grid(*prior, factories, grid, inner_jobs);
      for (auto& r : rows) {
        std::size_t a = 0;
        while (factory_keys[a] != r.agent + "\n" + r.hyper_id) ++a;
        if (outcomes[a].error) {
          r.status = "failed";
          r.error = *outcomes[a].error;
          continue;
        }
        std::size_t e = 0;
        while (!(cfg.evaluations[e].tau == r.tau && cfg.evaluations[e].sampler.label() == r.kappa)) ++e;
        const KlEstimate& k = outcomes[a].reports[e].overall;
        r.kl_mean = k.mean;
        r.kl_stderr = k.std_error;
        r.n_terms = k.n_terms;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      for (auto& r : rows) {
        r.status = "failed";
        r.error = ex.what();
      }
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::lock_guard<std::mutex> lock(writer);
    pending[c].rows = std::move(rows);
    pending[c].seconds = seconds;
    pending[c].ready = true;
    flush_ready();
    if (options.log) {
      *options.log << "[" << cfg.name << "] D=" << cell.setting.D << " T=" << cell.setting.T
                   << " rho=" << cell.setting.rho << " seed=" << cell.seed << " done in " << seconds
                   << " s\n";
      options.log->flush();
    }
  });

  summary.exit_code = summary.failed > 0 ? 1 : 0;
  return summary;
}

}  // namespace dyad
