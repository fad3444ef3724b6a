#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dyad/csv.hpp"
#include "dyad/harness.hpp"

using namespace dyad;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "dyad_harness_tests";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::filesystem::remove(p);
  std::filesystem::remove(p.string() + ".timing.csv");
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kCoinsDemo = R"([experiment]
name = coins_demo
seeds = 0
baseline = uniform

[environment]
prior = coins
M = 10
T = 0

[estimator]
J = 50
N = 20
m_enn = 50
metrics = 2:iid, 2:monadic, 2:dyadic

[agent uniform]

[agent shared_p]

[agent beta_posterior]
)";

const char* kSmallTestbed = R"([experiment]
name = small_testbed
seeds = 0..3

[environment]
prior = mlp
D = 2
lambda = 1, 5
rho = 0.1
hidden = 8, 8

[estimator]
J = 2
N = 10
m_enn = 5
metrics = 1:iid, 4:dyadic

[agent mlp]
steps = 20
l2_decay = 0.001, 0.1
hidden = 8x8

[agent ensemble+]
steps = 20
size = 2
prior_scale = 0, 1
hidden = 8x8
)";

ResultRow sample_row() {
  ResultRow r;
  r.experiment = "exp";
  r.agent = "ensemble+";
  r.hyper_id = "l2_decay=0.001,prior_scale=3";
  r.D = 10;
  r.T = 100;
  r.rho = 0.1;
  r.tau = 10;
  r.kappa = "2";
  r.seed = 7;
  r.kl_mean = 0.123456789012345678;
  r.kl_stderr = 1e-17;
  r.n_terms = 1000;
  r.status = "failed";
  r.error = "quote \" and, comma\nnewline";
  return r;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("coins demo") {
    const auto cfg = parse_config(kCoinsDemo);
    CHECK(cfg.name == "coins_demo");
    CHECK(cfg.agents.size() == 3);
    CHECK(cfg.evaluations.size() == 3);
    CHECK(cfg.agents[0].kind == "uniform");
    CHECK(cfg.agents[0].grid.size() == 1);
    CHECK(cfg.agents[0].grid[0].id == "default");
    const auto settings = expand_settings(cfg.environment);
    REQUIRE(settings.size() == 1);
    CHECK(settings[0].D == 10);
    CHECK(settings[0].T == 0);
  }
  SUBCASE("grids, ranges and lambda") {
    const auto cfg = parse_config(kSmallTestbed);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(cfg.agents[0].grid.size() == 2);
    CHECK(cfg.agents[1].grid.size() == 2);
    CHECK(cfg.agents[1].grid[1].id == "hidden=8x8,prior_scale=1,size=2,steps=20");
    const auto settings = expand_settings(cfg.environment);
    REQUIRE(settings.size() == 2);
    CHECK(settings[1].T == 10);
    CHECK(settings[1].rho == 0.1);
  }
  SUBCASE("tau and sampler lists") {
    std::string text = kCoinsDemo;
    text.replace(text.find("metrics = 2:iid, 2:monadic, 2:dyadic"), 36, "tau = 1, 3\nsamplers = iid, dyadic");
    const auto cfg = parse_config(text);
    CHECK(cfg.evaluations.size() == 4);
  }
  SUBCASE("errors") {
    auto fails = [](std::string text, const std::string& from, const std::string& to) {
      text.replace(text.find(from), from.size(), to);
      CHECK_THROWS_AS(parse_config(text), ConfigError);
    };
    const std::string base = kCoinsDemo;
    fails(base, "[agent uniform]\n\n[agent shared_p]\n\n[agent beta_posterior]\n", "");
    fails(base, "M = 10", "M = 0");
    fails(base, "T = 0", "T = 0\nrho = 1");
    fails(base, "seeds = 0", "seeds = 5..2");
    fails(base, "seeds = 0", "seeds = 1, 1");
    fails(base, "J = 50", "J = 0");
    fails(base, "J = 50", "J = fifty");
    fails(base, "2:iid", "2:sideways");
    fails(base, "2:iid", "2:monadic");
    fails(base, "prior = coins", "prior = gaussian");
    fails(base, "m_enn = 50", "m_enn = 50\ncolour = blue");
    fails(base, "[agent uniform]", "[agent uniform]\nkind = dropout");
    fails(base, "[agent uniform]", "[agent uniform]\nkind = prior");
    fails(base, "[agent uniform]", "[agent uniform]\nkind = mlp");
    fails(base, "[agent uniform]", "[agent uniform]\nsize = 3");
    fails(base, "[experiment]", "[experiments]");
    fails(base, "name = coins_demo", "name = coins_demo\nname = again");
    fails(base, "[agent shared_p]", "[agent uniform]");
    fails(std::string(kSmallTestbed), "steps = 20\nsize = 2", "steps = 20\nsize = 0");
    fails(std::string(kSmallTestbed), "prior_scale = 0, 1", "prior_scale = -1");
    fails(std::string(kSmallTestbed), "lambda = 1, 5", "lambda = 1, 5\nT = 4");
  }
  SUBCASE("error messages carry line numbers") {
    std::string text = kCoinsDemo;
    text.replace(text.find("J = 50"), 6, "J = -1");
    try {
      parse_config(text);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 12") != std::string::npos);
    }
  }
}

TEST_CASE("result rows round-trip through CSV") {
  const ResultRow r = sample_row();
  std::istringstream in(csv::format_row(to_fields(r)) + "\n");
  const auto fields = csv::read_row(in);
  REQUIRE(fields);
  CHECK(from_fields(*fields) == r);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    ResultRow x = r;
    x.kl_mean = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    x.rho = std::abs(u(rng));
    x.status = "ok";
    x.error.clear();
    std::istringstream s(csv::format_row(to_fields(x)));
    CHECK(from_fields(*csv::read_row(s)) == x);
  }
}

TEST_CASE("coins demo run") {
  const std::string out = temp_path("coins_demo.csv");
  const auto cfg = parse_config(kCoinsDemo);
  RunOptions options;
  options.output = out;
  const auto summary = run_experiment(cfg, options);
  CHECK(summary.written == 9);
  CHECK(summary.exit_code == 0);
  const auto file = read_results(out);
  CHECK(file.manifest.find("config_hash=") == 0);
  REQUIRE(file.rows.size() == 9);
  for (const auto& r : file.rows) {
    CHECK(r.status == "ok");
    CHECK(r.n_terms == 1000);
  }
  CHECK(std::filesystem::exists(out + ".timing.csv"));

  SUBCASE("re-running changes nothing") {
    const std::string before = slurp(out);
    const auto again = run_experiment(cfg, options);
    CHECK(again.written == 0);
    CHECK(again.skipped == 9);
    CHECK(slurp(out) == before);
  }
  SUBCASE("a partial file is completed with identical rows") {
    const std::string full = slurp(out);
    std::istringstream lines(full);
    std::string line, truncated;
    for (int i = 0; i < 6 && std::getline(lines, line); ++i) truncated += line + "\n";
    std::ofstream(out, std::ios::binary | std::ios::trunc) << truncated;
    const auto resumed = run_experiment(cfg, options);
    CHECK(resumed.written == 5);
    CHECK(slurp(out) == full);
  }
  SUBCASE("a different config is refused") {
    std::string text = kCoinsDemo;
    text.replace(text.find("J = 50"), 6, "J = 51");
    CHECK_THROWS_AS(run_experiment(parse_config(text), options), ConfigError);
  }
}

TEST_CASE("parallel and serial runs write identical files") {
  const auto cfg = parse_config(kSmallTestbed);
  RunOptions serial, parallel;
  serial.output = temp_path("serial.csv");
  parallel.output = temp_path("parallel.csv");
  parallel.jobs = 8;
  run_experiment(cfg, serial);
  run_experiment(cfg, parallel);
  CHECK(slurp(*serial.output) == slurp(*parallel.output));
  CHECK(read_results(*serial.output).rows.size() == 2 * 4 * 4 * 2);
}

TEST_CASE("failed rows are recorded and the run continues") {
  std::string text = kSmallTestbed;
  text.replace(text.find("l2_decay = 0.001, 0.1"), 21, "l2_decay = 0.001\nlr = 1e200");
  RunOptions options;
  options.output = temp_path("failing.csv");
  options.seed = 1;
  const auto summary = run_experiment(parse_config(text), options);
  CHECK(summary.exit_code == 1);
  const auto rows = read_results(*options.output).rows;
  std::size_t failed = 0, ok = 0;
  for (const auto& r : rows) {
    if (r.status == "failed") {
      ++failed;
      CHECK(r.agent == "mlp");
      CHECK(r.error.find("mlp") != std::string::npos);
    } else {
      ++ok;
    }
  }
  CHECK(failed == 4);
  CHECK(ok == 8);
}

TEST_CASE("seed and m_enn overrides") {
  RunOptions options;
  options.output = temp_path("override.csv");
  options.seed = 5;
  options.m_enn = 3;
  run_experiment(parse_config(kCoinsDemo), options);
  const auto file = read_results(*options.output);
  CHECK(file.manifest.find("seeds=5") != std::string::npos);
  CHECK(file.manifest.find("m_enn=3") != std::string::npos);
  for (const auto& r : file.rows) CHECK(r.seed == 5);
}

namespace {

ResultRow row(const std::string& agent, const std::string& hyper, int T, std::uint64_t seed, std::size_t tau,
              const std::string& kappa, double kl) {
  ResultRow r;
  r.experiment = "e";
  r.agent = agent;
  r.hyper_id = hyper;
  r.D = 2;
  r.T = T;
  r.tau = tau;
  r.kappa = kappa;
  r.seed = seed;
  r.kl_mean = kl;
  r.n_terms = 10;
  return r;
}

}  // namespace

TEST_CASE("reports") {
  SUBCASE("baseline only") {
    std::vector<ResultRow> rows;
    for (std::uint64_t s = 0; s < 6; ++s) {
      rows.push_back(row("mlp", "default", 2, s, 1, "iid", 0.3 + 0.01 * s));
      rows.push_back(row("mlp", "default", 2, s, 10, "2", 2.0 + 0.1 * s));
    }
    const auto report = make_report(rows);
    REQUIRE(report.lines.size() == 2);
    for (const auto& l : report.lines) {
      CHECK(l.normalized == 1.0);
      CHECK(l.band_low == 1.0);
      CHECK(l.band_high == 1.0);
      CHECK(l.per_setting_normalized == 1.0);
    }
  }
  SUBCASE("perfect agent normalizes to zero") {
    std::vector<ResultRow> rows;
    for (std::uint64_t s = 0; s < 4; ++s) {
      rows.push_back(row("mlp", "default", 2, s, 10, "2", 1.0 + s));
      rows.push_back(row("perfect", "default", 2, s, 10, "2", 0.0));
    }
    const auto report = make_report(rows);
    for (const auto& l : report.lines)
      if (l.agent == "perfect") CHECK(l.normalized == 0.0);
  }
  SUBCASE("missing baseline") {
    std::vector<ResultRow> rows = {row("ensemble", "default", 2, 0, 1, "iid", 0.5)};
    CHECK_THROWS_AS(make_report(rows), ReportError);
  }
  SUBCASE("tuning on even seeds, scoring on odd seeds") {
    std::vector<ResultRow> rows;
    for (std::uint64_t s = 0; s < 8; ++s) {
      rows.push_back(row("mlp", "default", 2, s, 1, "iid", 1.0));
      // "a" wins on even seeds, "b" is what odd seeds would have preferred.
      rows.push_back(row("ens", "a", 2, s, 1, "iid", s % 2 == 0 ? 0.2 : 0.6));
      rows.push_back(row("ens", "b", 2, s, 1, "iid", s % 2 == 0 ? 0.4 : 0.1));
    }
    const auto report = make_report(rows);
    CHECK(report.split_seeds);
    for (const auto& l : report.lines) {
      if (l.agent != "ens") continue;
      CHECK(l.normalized == doctest::Approx(0.6));
      CHECK(l.seeds == 4);
      CHECK(l.selection.find(":a") != std::string::npos);
    }
  }
  SUBCASE("aggregation before normalization, per-setting ratio recorded") {
    std::vector<ResultRow> rows;
    for (std::uint64_t s = 0; s < 2; ++s) {
      rows.push_back(row("mlp", "default", 2, s, 1, "iid", 1.0));
      rows.push_back(row("mlp", "default", 20, s, 1, "iid", 3.0));
      rows.push_back(row("ens", "default", 2, s, 1, "iid", 0.5));
      rows.push_back(row("ens", "default", 20, s, 1, "iid", 3.0));
    }
    const auto report = make_report(rows);
    for (const auto& l : report.lines) {
      if (l.agent != "ens") continue;
      CHECK(l.normalized == doctest::Approx(3.5 / 4.0));
      CHECK(l.per_setting_normalized == doctest::Approx(0.75));
    }
  }
  SUBCASE("row order does not matter") {
    std::vector<ResultRow> rows;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (std::uint64_t s = 0; s < 10; ++s)
      for (int T : {2, 20})
        for (const char* agent : {"mlp", "ens", "ens+"})
          for (const char* hyper : {"x", "y"}) rows.push_back(row(agent, hyper, T, s, 10, "2", u(rng)));
    std::ostringstream a, b;
    write_report_csv(make_report(rows), a);
    std::shuffle(rows.begin(), rows.end(), rng);
    write_report_csv(make_report(rows), b);
    CHECK(a.str() == b.str());
  }
}
