#include "dyad/repro.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "dyad/csv.hpp"

namespace dyad {

namespace {

const std::map<std::string, std::string>& configs() {
  static const std::map<std::string, std::string> c = {
      {"prop2", R"([experiment]
name = prop2
seeds = 0
baseline = uniform

[environment]
prior = coins
M = 10
T = 0

[estimator]
J = 100000
N = 1
m_enn = 1000
metrics = 2:monadic

[agent uniform]

[agent shared_p]

[agent beta_posterior]
)"},
      {"prop1", R"([experiment]
name = prop1
seeds = 0
baseline = uniform

[environment]
prior = coins
M = 100
T = 0

[estimator]
J = 100000
N = 1
m_enn = 1
metrics = 5:iid

[agent uniform]
)"},
      {"fig1", R"([experiment]
name = fig1
seeds = 0
baseline = uniform

[environment]
prior = logistic
D = 5
rho = 100
T = 0

[estimator]
J = 500
N = 1
m_enn = 10000
metrics = 1000:iid, 10:dyadic

[agent uniform]

[agent prior]
)"},
      {"fig2", R"([experiment]
name = fig2
seeds = 0
baseline = uniform

[environment]
prior = logistic
D = 10, 100, 1000
rho = 100
T = 0

[estimator]
J = 2000
N = 10
m_enn = 1000
metrics = 10:iid, 10:monadic, 10:dyadic

[agent uniform]

[agent marginal]

[agent prior]
)"},
      {"fig4", R"([experiment]
name = fig4
seeds = 0..39
baseline = mlp

[environment]
prior = mlp
D = 10
lambda = 1, 10
rho = 0.1
hidden = 50, 50
classes = 2

[estimator]
J = 1
N = 1000
m_enn = 100
metrics = 1:iid, 10:dyadic

[agent mlp]
l2_decay = 0.0001, 0.01, 1

[agent ensemble]
l2_decay = 0.0001, 0.01, 1

[agent ensemble+]
l2_decay = 0.0001, 0.01, 1
prior_scale = 0.3, 1, 3
)"},
      {"fig5", R"([experiment]
name = fig5
seeds = 0..19
baseline = ensemble

[environment]
prior = mlp
D = 2, 10
lambda = 1, 10, 100
rho = 0.1
hidden = 50, 50
classes = 2

[estimator]
J = 1
N = 1000
m_enn = 100
metrics = 10:dyadic

[agent ensemble]
l2_decay = 0.0001, 0.01, 1

[agent ensemble+]
l2_decay = 0.0001, 0.01, 1
prior_scale = 0.3, 1, 3
)"},
  };
  return c;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

struct RowIndex {
  std::vector<ResultRow> rows;

  const ResultRow& get(const std::string& agent, int D, std::size_t tau, const std::string& kappa) const {
    for (const auto& r : rows)
      if (r.agent == agent && r.D == D && r.tau == tau && r.kappa == kappa) {
        if (r.status != "ok") throw EstimationError("row failed: " + r.error);
        return r;
      }
    throw EstimationError("missing row for agent " + agent);
  }
};

KlEstimate estimate_of(const ResultRow& r) { return {r.kl_mean, r.kl_stderr, r.n_terms}; }

double combined(const ResultRow& a, const ResultRow& b) {
  return std::sqrt(a.kl_stderr * a.kl_stderr + b.kl_stderr * b.kl_stderr);
}

// Guards a check so a missing row or undefined ratio becomes a failure.
template <typename F>
ReproCheck guarded(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    return {name, false, e.what()};
  }
}

std::vector<ReproCheck> check_prop2(const RowIndex& ix) {
  return {guarded("shared-p and Beta posterior agree at the exact value", [&] {
            const auto& s = ix.get("shared_p", 10, 2, "1");
            const auto& b = ix.get("beta_posterior", 10, 2, "1");
            const double exact = -1.0 - ((2.0 / 3.0) * std::log(1.0 / 3.0) + (1.0 / 3.0) * std::log(1.0 / 6.0));
            const bool ok = std::abs(s.kl_mean - b.kl_mean) <= 2 * combined(s, b) &&
                            std::abs(s.kl_mean - exact) <= 2 * s.kl_stderr &&
                            std::abs(b.kl_mean - exact) <= 2 * b.kl_stderr;
            return ReproCheck{"prop2 agreement", ok,
                              "shared_p " + fmt(s.kl_mean) + " +- " + fmt(s.kl_stderr) + ", beta_posterior " +
                                  fmt(b.kl_mean) + " +- " + fmt(b.kl_stderr) + ", exact " + fmt(exact)};
          }),
          guarded("uniform is worse", [&] {
            const auto& u = ix.get("uniform", 10, 2, "1");
            const auto& s = ix.get("shared_p", 10, 2, "1");
            const auto& b = ix.get("beta_posterior", 10, 2, "1");
            const bool ok = u.kl_mean - s.kl_mean > 3 * combined(u, s) && u.kl_mean - b.kl_mean > 3 * combined(u, b);
            return ReproCheck{"prop2 uniform separation", ok,
                              "uniform " + fmt(u.kl_mean) + " +- " + fmt(u.kl_stderr) + " (exact " +
                                  fmt(2 * std::log(2.0) - 1) + ")"};
          })};
}

std::vector<ReproCheck> check_prop1(const RowIndex& ix) {
  return {guarded("prop1", [&] {
    const auto& u = ix.get("uniform", 100, 5, "iid");
    const double exact = coins_posterior_kl_iid(100, 5);
    const double gap = u.kl_mean - exact;
    const double upper = 5 * std::log(2.0) * coins_repeat_probability(100, 5);
    const bool ok = gap >= -3 * u.kl_stderr && gap <= upper + 3 * u.kl_stderr;
    return ReproCheck{"prop1 band", ok,
                      "uniform " + fmt(u.kl_mean) + " +- " + fmt(u.kl_stderr) + ", posterior " + fmt(exact) +
                          ", gap " + fmt(gap) + " in [" + fmt(-3 * u.kl_stderr) + ", " +
                          fmt(upper + 3 * u.kl_stderr) + "]"};
  })};
}

std::vector<ReproCheck> check_fig1(const RowIndex& ix) {
  return {guarded("fig1", [&] {
    const auto iid = kl_ratio(estimate_of(ix.get("prior", 5, 1000, "iid")),
                              estimate_of(ix.get("uniform", 5, 1000, "iid")));
    const auto dyadic = kl_ratio(estimate_of(ix.get("prior", 5, 10, "2")),
                                 estimate_of(ix.get("uniform", 5, 10, "2")));
    const bool ok = iid.value >= 0.5 && dyadic.value <= 0.5;
    return ReproCheck{"fig1 tau trend", ok,
                      "iid tau=1000 prior/uniform " + fmt(iid.value) + " +- " + fmt(iid.std_error) +
                          " (need >= 0.5), dyadic tau=10 " + fmt(dyadic.value) + " +- " +
                          fmt(dyadic.std_error) + " (need <= 0.5)"};
  })};
}

std::vector<ReproCheck> check_fig2(const RowIndex& ix) {
  std::vector<ReproCheck> out;
  for (int D : {10, 100, 1000}) {
    const std::string d = "D=" + std::to_string(D);
    out.push_back(guarded("fig2 " + d, [&] {
      auto ratio = [&](const char* a, const char* b, const char* kappa) {
        return kl_ratio(estimate_of(ix.get(a, D, 10, kappa)), estimate_of(ix.get(b, D, 10, kappa)));
      };
      const auto dyadic_u = ratio("prior", "uniform", "2");
      const auto monadic_m = ratio("prior", "marginal", "1");
      const auto dyadic_m = ratio("prior", "marginal", "2");
      bool ok = dyadic_u.value <= 0.5 && monadic_m.value >= 0.8 && monadic_m.value <= 1.25 &&
                dyadic_m.value <= 0.5;
      std::string detail = "dyadic prior/uniform " + fmt(dyadic_u.value) + ", monadic prior/marginal " +
                           fmt(monadic_m.value) + ", dyadic prior/marginal " + fmt(dyadic_m.value);
      if (D == 1000) {
        const auto iid_u = ratio("prior", "uniform", "iid");
        ok = ok && iid_u.value >= 0.8;
        detail += ", iid prior/uniform " + fmt(iid_u.value);
      }
      return ReproCheck{"fig2 " + d, ok, detail};
    }));
  }
  return out;
}

const ReportLine& find_line(const Report& report, const std::string& agent, std::size_t tau,
                            const std::string& kappa) {
  for (const auto& l : report.lines)
    if (l.agent == agent && l.tau == tau && l.kappa == kappa) return l;
  throw ReportError("no report line for " + agent);
}

std::vector<ReproCheck> check_fig4(const RowIndex& ix) {
  return {guarded("fig4", [&] {
    const Report report = make_report(ix.rows, {"mlp", 1000, 0});
    const auto& joint_plus = find_line(report, "ensemble+", 10, "2");
    const auto& joint_ens = find_line(report, "ensemble", 10, "2");
    const auto& marg_plus = find_line(report, "ensemble+", 1, "iid");
    const auto& marg_ens = find_line(report, "ensemble", 1, "iid");
    const bool joint_ok = joint_plus.normalized <= 0.9 * joint_ens.normalized &&
                          joint_plus.band_high < joint_ens.band_low;
    const bool marginal_overlap =
        marg_plus.band_low <= marg_ens.band_high && marg_ens.band_low <= marg_plus.band_high;
    auto band = [](const ReportLine& l) {
      return fmt(l.normalized) + " [" + fmt(l.band_low) + ", " + fmt(l.band_high) + "]";
    };
    return ReproCheck{"fig4 testbed separation", joint_ok && marginal_overlap,
                      "joint: ensemble+ " + band(joint_plus) + " vs ensemble " + band(joint_ens) +
                          "; marginal: ensemble+ " + band(marg_plus) + " vs ensemble " + band(marg_ens) +
                          "; " + std::to_string(joint_plus.seeds) + " report seeds"};
  })};
}

std::vector<ReproCheck> check_fig5(const RowIndex& ix, const ExperimentConfig& cfg) {
  return {guarded("fig5", [&] {
    std::string detail;
    std::vector<double> largest;
    for (int D : cfg.environment.dimensions) {
      double best_lambda = 0.0;
      for (double lambda : cfg.environment.lambdas) {
        const int T = static_cast<int>(std::llround(lambda * D));
        std::vector<ResultRow> subset;
        for (const auto& r : ix.rows)
          if (r.D == D && r.T == T) subset.push_back(r);
        const Report report = make_report(subset, {"ensemble", 1000, 0});
        const auto& plus = find_line(report, "ensemble+", 10, "2");
        const bool beats = plus.band_high < 1.0;
        detail += "D=" + std::to_string(D) + " lambda=" + fmt(lambda) + ": " + fmt(plus.normalized) + " [" +
                  fmt(plus.band_low) + ", " + fmt(plus.band_high) + "]; ";
        if (beats) best_lambda = lambda;
      }
      largest.push_back(best_lambda);
    }
    bool ok = true;
    for (std::size_t i = 1; i < largest.size(); ++i) ok = ok && largest[i] >= largest[i - 1];
    detail += "largest lambda with separation:";
    for (double l : largest) detail += " " + fmt(l);
    return ReproCheck{"fig5 low-data regime grows with D", ok, detail};
  })};
}

}  // namespace

bool ReproResult::passed() const {
  if (checks.empty()) return false;
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

const std::vector<std::string>& repro_ids() {
  static const std::vector<std::string> ids = {"fig1", "fig2", "fig4", "fig5", "prop1", "prop2"};
  return ids;
}

std::string repro_config_text(const std::string& id) {
  const auto it = configs().find(id);
  if (it == configs().end()) throw std::invalid_argument("unknown reproduction id '" + id + "'");
  return it->second;
}

double coins_repeat_probability(int coins, int tau) {
  double distinct = 1.0;
  for (int k = 1; k < tau; ++k) distinct *= 1.0 - static_cast<double>(k) / coins;
  return 1.0 - distinct;
}

double coins_posterior_kl_iid(int coins, int tau) {
  // n tosses of one coin under a uniform prior: every head count 0..n has
  // probability 1/(n+1) and each sequence with h heads has probability
  // h!(n-h)!/(n+1)!.
  auto expected_log_marginal = [](int n) {
    double total = 0.0;
    for (int h = 0; h <= n; ++h) total += std::lgamma(h + 1.0) + std::lgamma(n - h + 1.0) - std::lgamma(n + 2.0);
    return total / (n + 1);
  };
  const double q = 1.0 / coins;
  double per_coin = 0.0;
  for (int n = 0; n <= tau; ++n) {
    double log_binom = std::lgamma(tau + 1.0) - std::lgamma(n + 1.0) - std::lgamma(tau - n + 1.0) + n * std::log(q);
    if (tau > n) log_binom += (tau - n) * std::log1p(-q);
    per_coin += std::exp(log_binom) * expected_log_marginal(n);
  }
  // E log p_true = tau * 2 * integral of p log p = -tau / 2.
  return -0.5 * tau - coins * per_coin;
}

ReproResult run_repro(const std::string& id, const ReproOptions& options) {
  ExperimentConfig cfg = parse_config(repro_config_text(id));
  RunOptions run;
  run.jobs = options.jobs;
  run.seed = options.seed;
  run.m_enn = options.m_enn;
  run.output = options.output ? *options.output : "results/repro_" + id + ".csv";
  run.log = options.log;

  ReproResult result;
  result.id = id;
  const RunSummary summary = run_experiment(cfg, run);
  result.output = summary.output;
  result.run_exit_code = summary.exit_code;

  RowIndex ix{read_results(summary.output).rows};
  if (id == "prop2") result.checks = check_prop2(ix);
  else if (id == "prop1") result.checks = check_prop1(ix);
  else if (id == "fig1") result.checks = check_fig1(ix);
  else if (id == "fig2") result.checks = check_fig2(ix);
  else if (id == "fig4") result.checks = check_fig4(ix);
  else result.checks = check_fig5(ix, cfg);
  return result;
}

}  // namespace dyad
