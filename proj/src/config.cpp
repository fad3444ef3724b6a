#include "dyad/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dyad/csv.hpp"

namespace dyad {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;  // "experiment", "environment", "estimator" or "agent"
  std::string label;  // agent name
  int line = 0;
  std::vector<std::pair<std::string, Entry>> entries;
  std::set<std::string> used;

  const Entry* find(const std::string& key) {
    for (const auto& [k, e] : entries) {
      if (k == key) {
        used.insert(key);
        return &e;
      }
    }
    return nullptr;
  }
};

[[noreturn]] void fail(int line, const std::string& message) {
  throw ConfigError("line " + std::to_string(line) + ": " + message);
}

long long to_int(const Entry& e, const std::string& text) {
  try {
    return csv::parse_int(text);
  } catch (const std::exception&) {
    fail(e.line, "expected an integer, got '" + text + "'");
  }
}

double to_double(const Entry& e, const std::string& text) {
  try {
    const double v = csv::parse_double(text);
    if (!std::isfinite(v)) fail(e.line, "expected a finite number, got '" + text + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(e.line, "expected a number, got '" + text + "'");
  }
}

std::vector<int> int_list(const Entry& e, int minimum) {
  std::vector<int> out;
  for (const auto& item : split_list(e.value)) {
    const long long v = to_int(e, item);
    if (v < minimum) fail(e.line, "value " + item + " is below " + std::to_string(minimum));
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) fail(e.line, "empty list");
  return out;
}

std::vector<double> positive_list(const Entry& e) {
  std::vector<double> out;
  for (const auto& item : split_list(e.value)) {
    const double v = to_double(e, item);
    if (!(v > 0)) fail(e.line, "value " + item + " must be > 0");
    out.push_back(v);
  }
  if (out.empty()) fail(e.line, "empty list");
  return out;
}

bool to_bool(const Entry& e, const std::string& text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  fail(e.line, "expected true or false, got '" + text + "'");
}

std::vector<std::uint64_t> seed_list(const Entry& e) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(e.value)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      const long long v = to_int(e, item);
      if (v < 0) fail(e.line, "seeds must be >= 0");
      out.push_back(static_cast<std::uint64_t>(v));
      continue;
    }
    const long long lo = to_int(e, trim(item.substr(0, dots)));
    const long long hi = to_int(e, trim(item.substr(dots + 2)));
    if (lo < 0 || hi < lo) fail(e.line, "bad seed range '" + item + "'");
    for (long long s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
  }
  if (out.empty()) fail(e.line, "empty seed list");
  std::set<std::uint64_t> unique(out.begin(), out.end());
  if (unique.size() != out.size()) fail(e.line, "duplicate seeds");
  return out;
}

std::vector<Evaluation> parse_metrics(const Entry& e) {
  std::vector<Evaluation> out;
  for (const auto& item : split_list(e.value)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) fail(e.line, "metric '" + item + "' is not of the form tau:sampler");
    const long long tau = to_int(e, trim(item.substr(0, colon)));
    if (tau < 1) fail(e.line, "tau must be >= 1");
    try {
      out.push_back({static_cast<std::size_t>(tau), SamplerSpec::parse(trim(item.substr(colon + 1)))});
    } catch (const std::invalid_argument& ex) {
      fail(e.line, ex.what());
    }
  }
  if (out.empty()) fail(e.line, "empty metric list");
  return out;
}

void reject_unknown(const Section& s) {
  for (const auto& [key, e] : s.entries)
    if (!s.used.count(key)) fail(e.line, "unknown key '" + key + "' in [" + s.name + (s.label.empty() ? "" : " " + s.label) + "]");
}

const std::set<std::string>& kinds() {
  static const std::set<std::string> k = {"uniform", "marginal", "prior", "beta_posterior", "shared_p",
                                          "perfect", "mlp", "ensemble", "ensemble+"};
  return k;
}

std::set<std::string> allowed_agent_keys(const std::string& kind) {
  if (kind == "marginal" || kind == "prior") return {"rho"};
  if (kind == "mlp") return {"l2_decay", "steps", "lr", "momentum", "batch", "scale_steps", "hidden"};
  if (kind == "ensemble")
    return {"l2_decay", "steps", "lr", "momentum", "batch", "scale_steps", "hidden", "size"};
  if (kind == "ensemble+")
    return {"l2_decay", "steps", "lr",   "momentum",    "batch",
            "scale_steps", "hidden", "size", "prior_scale", "bootstrap"};
  return {};
}

bool is_trained(const std::string& kind) {
  return kind == "mlp" || kind == "ensemble" || kind == "ensemble+";
}

std::vector<int> parse_hidden(const std::string& text) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, 'x')) {
    const long long v = csv::parse_int(trim(item));
    if (v < 1) throw std::invalid_argument("hidden widths must be >= 1");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw std::invalid_argument("empty hidden layout");
  return out;
}

// Checks one agent value eagerly so that errors carry the line number.
void check_agent_value(const Entry& e, const std::string& key, const std::string& value) {
  if (key == "l2_decay" || key == "momentum") {
    const double v = to_double(e, value);
    if (v < 0) fail(e.line, key + " must be >= 0");
    if (key == "momentum" && v >= 1) fail(e.line, "momentum must be < 1");
  } else if (key == "lr" || key == "rho") {
    if (!(to_double(e, value) > 0)) fail(e.line, key + " must be > 0");
  } else if (key == "prior_scale") {
    if (to_double(e, value) < 0) fail(e.line, "prior_scale must be >= 0");
  } else if (key == "steps") {
    if (to_int(e, value) < 0) fail(e.line, "steps must be >= 0");
  } else if (key == "size" || key == "batch") {
    if (to_int(e, value) < 1) fail(e.line, key + " must be >= 1");
  } else if (key == "bootstrap" || key == "scale_steps") {
    to_bool(e, value);
  } else if (key == "hidden") {
    try {
      parse_hidden(value);
    } catch (const std::exception&) {
      fail(e.line, "hidden must look like 50x50");
    }
  }
}

AgentConfig parse_agent(Section& s, const std::string& prior) {
  AgentConfig agent;
  agent.name = s.label;
  if (agent.name.empty()) fail(s.line, "agent section needs a name, as in [agent mlp]");
  const Entry* kind = s.find("kind");
  agent.kind = kind ? kind->value : agent.name;
  if (!kinds().count(agent.kind))
    fail(kind ? kind->line : s.line, "unknown agent kind '" + agent.kind + "'");
  if ((agent.kind == "marginal" || agent.kind == "prior") && prior != "logistic")
    fail(s.line, "agent kind '" + agent.kind + "' needs the logistic prior");
  if ((agent.kind == "beta_posterior" || agent.kind == "shared_p") && prior != "coins")
    fail(s.line, "agent kind '" + agent.kind + "' needs the coins prior");
  if (is_trained(agent.kind) && prior == "coins")
    fail(s.line, "trained agents need feature-vector inputs");

  const auto allowed = allowed_agent_keys(agent.kind);
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [key, e] : s.entries) {
    if (key == "kind") continue;
    if (!allowed.count(key)) fail(e.line, "key '" + key + "' does not apply to agent kind '" + agent.kind + "'");
    s.used.insert(key);
    auto values = split_list(e.value);
    if (values.empty()) fail(e.line, "empty value list");
    for (const auto& v : values) check_agent_value(e, key, v);
    axes.emplace_back(key, std::move(values));
  }

  std::vector<std::map<std::string, std::string>> points(1);
  for (const auto& [key, values] : axes) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        auto q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  for (auto& values : points) {
    HyperPoint point;
    for (const auto& [k, v] : values) point.id += (point.id.empty() ? "" : ",") + k + "=" + v;
    if (point.id.empty()) point.id = "default";
    point.values = std::move(values);
    agent.grid.push_back(std::move(point));
  }
  return agent;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    for (const char marker : {'#', ';'}) {
      const auto pos = line.find(marker);
      if (pos != std::string::npos) line.erase(pos);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      const std::string header = trim(line.substr(1, line.size() - 2));
      Section s;
      s.line = line_no;
      const auto space = header.find_first_of(" \t");
      s.name = header.substr(0, space);
      if (space != std::string::npos) s.label = trim(header.substr(space));
      if (s.name != "experiment" && s.name != "environment" && s.name != "estimator" && s.name != "agent")
        fail(line_no, "unknown section [" + s.name + "]");
      if (s.name != "agent" && !s.label.empty()) fail(line_no, "only agent sections take a name");
      for (const auto& other : sections)
        if (other.name == s.name && other.label == s.label) fail(line_no, "duplicate section [" + header + "]");
      sections.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    if (sections.empty()) fail(line_no, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    for (const auto& [k, e] : sections.back().entries)
      if (k == key) fail(line_no, "duplicate key '" + key + "'");
    sections.back().entries.emplace_back(key, Entry{trim(line.substr(eq + 1)), line_no});
  }

  auto section = [&](const std::string& name) -> Section* {
    for (auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  };

  ExperimentConfig cfg;
  cfg.source = text;

  Section* exp = section("experiment");
  if (!exp) fail(line_no, "missing [experiment] section");
  if (const Entry* e = exp->find("name")) cfg.name = e->value;
  if (cfg.name.empty()) fail(exp->line, "experiment name is required");
  if (cfg.name.find_first_of(",\"\n") != std::string::npos) fail(exp->line, "experiment name may not contain commas or quotes");
  if (const Entry* e = exp->find("seeds")) cfg.seeds = seed_list(*e);
  else cfg.seeds = {0};
  if (const Entry* e = exp->find("output")) cfg.output = resolve(base_dir, e->value);
  else cfg.output = "results/" + cfg.name + ".csv";
  if (const Entry* e = exp->find("baseline")) cfg.baseline = e->value;
  reject_unknown(*exp);

  Section* env = section("environment");
  if (!env) fail(line_no, "missing [environment] section");
  EnvironmentSpec& spec = cfg.environment;
  if (const Entry* e = env->find("prior")) spec.prior = e->value;
  if (spec.prior != "coins" && spec.prior != "logistic" && spec.prior != "mlp" && spec.prior != "empirical")
    fail(env->line, "prior must be one of coins, logistic, mlp, empirical");
  const Entry* dim = env->find("D");
  if (const Entry* m = env->find("M")) {
    if (dim) fail(m->line, "give either M or D, not both");
    dim = m;
  }
  if (const Entry* e = env->find("T")) spec.train_sizes = int_list(*e, 0);
  if (const Entry* e = env->find("lambda")) {
    if (!spec.train_sizes.empty()) fail(e->line, "give either T or lambda, not both");
    spec.lambdas = positive_list(*e);
  }
  if (const Entry* e = env->find("rho")) spec.rhos = positive_list(*e);
  if (const Entry* e = env->find("hidden")) spec.hidden = int_list(*e, 1);
  if (const Entry* e = env->find("classes")) spec.classes = static_cast<int>(to_int(*e, e->value));
  if (const Entry* e = env->find("train_csv")) spec.train_csv = resolve(base_dir, e->value);
  if (const Entry* e = env->find("test_csv")) spec.test_csv = resolve(base_dir, e->value);
  if (const Entry* e = env->find("anchors")) {
    if (e->value == "test") spec.anchors = AnchorPool::Test;
    else if (e->value == "train") spec.anchors = AnchorPool::Train;
    else fail(e->line, "anchors must be test or train");
  }
  if (const Entry* e = env->find("standardize")) spec.standardize = to_bool(*e, e->value);

  if (spec.prior == "empirical") {
    if (spec.train_csv.empty() || spec.test_csv.empty()) fail(env->line, "empirical prior needs train_csv and test_csv");
    if (dim) fail(dim->line, "the empirical prior takes D from the data");
    if (!spec.lambdas.empty()) fail(env->line, "the empirical prior takes T, not lambda");
    if (!spec.rhos.empty()) fail(env->line, "the empirical prior has no temperature");
    Dataset train;
    try {
      train = load_csv_dataset(spec.train_csv);
      load_csv_dataset(spec.test_csv);
    } catch (const std::exception& ex) {
      fail(env->line, ex.what());
    }
    spec.dimensions = {train.dimension()};
    if (spec.train_sizes.empty()) spec.train_sizes = {static_cast<int>(train.size())};
    for (int t : spec.train_sizes)
      if (t > static_cast<int>(train.size())) fail(env->line, "T exceeds the train pool");
    if (spec.classes == 2 && !env->find("classes")) spec.classes = 0;
  } else {
    if (!dim) fail(env->line, spec.prior == "coins" ? "coins prior needs M" : "prior needs D");
    spec.dimensions = int_list(*dim, 1);
    if (spec.prior == "coins" && !spec.rhos.empty()) fail(env->line, "the coins prior has no temperature");
    if (spec.prior == "coins" && !spec.lambdas.empty()) fail(env->line, "the coins prior takes T, not lambda");
    if (spec.rhos.empty() && spec.prior != "coins") spec.rhos = {spec.prior == "mlp" ? 0.1 : 1.0};
    if (spec.train_sizes.empty() && spec.lambdas.empty()) spec.train_sizes = {0};
    if (spec.prior == "mlp" && spec.classes < 2) fail(env->line, "classes must be >= 2");
    if (spec.prior != "mlp" && env->find("classes") && spec.classes != 2)
      fail(env->line, "this prior is binary");
    if (spec.prior != "mlp" && env->find("hidden")) fail(env->line, "hidden applies to the mlp prior only");
  }
  reject_unknown(*env);

  Section* est = section("estimator");
  if (!est) fail(line_no, "missing [estimator] section");
  if (const Entry* e = est->find("J")) cfg.J = static_cast<std::size_t>(int_list(*e, 1).front());
  if (const Entry* e = est->find("N")) cfg.N = static_cast<std::size_t>(int_list(*e, 1).front());
  if (const Entry* e = est->find("m_enn")) cfg.m_enn = static_cast<std::size_t>(int_list(*e, 1).front());
  const Entry* metrics = est->find("metrics");
  const Entry* taus = est->find("tau");
  const Entry* samplers = est->find("samplers");
  if (metrics) {
    if (taus || samplers) fail(metrics->line, "give either metrics or tau/samplers");
    cfg.evaluations = parse_metrics(*metrics);
  } else {
    if (!taus) fail(est->line, "estimator needs metrics or tau");
    std::vector<SamplerSpec> kinds_list;
    if (samplers) {
      for (const auto& item : split_list(samplers->value)) {
        try {
          kinds_list.push_back(SamplerSpec::parse(item));
        } catch (const std::invalid_argument& ex) {
          fail(samplers->line, ex.what());
        }
      }
    } else {
      kinds_list.push_back(SamplerSpec::iid());
    }
    for (int tau : int_list(*taus, 1))
      for (const auto& s : kinds_list) cfg.evaluations.push_back({static_cast<std::size_t>(tau), s});
  }
  for (std::size_t a = 0; a < cfg.evaluations.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      if (cfg.evaluations[a].tau == cfg.evaluations[b].tau &&
          cfg.evaluations[a].sampler == cfg.evaluations[b].sampler)
        fail(est->line, "duplicate metric");
  reject_unknown(*est);

  for (auto& s : sections) {
    if (s.name != "agent") continue;
    cfg.agents.push_back(parse_agent(s, spec.prior));
    reject_unknown(s);
  }
  if (cfg.agents.empty()) fail(line_no, "no [agent ...] sections: the agent grid is empty");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  const auto parent = std::filesystem::path(path).parent_path();
  return parse_config(text.str(), parent.empty() ? "." : parent.string());
}

std::vector<Setting> expand_settings(const EnvironmentSpec& env) {
  std::vector<Setting> out;
  const std::vector<double> rhos = env.rhos.empty() ? std::vector<double>{0.0} : env.rhos;
  for (int d : env.dimensions) {
    std::vector<int> ts = env.train_sizes;
    if (ts.empty())
      for (double lambda : env.lambdas) ts.push_back(static_cast<int>(std::llround(lambda * d)));
    for (int t : ts)
      for (double rho : rhos) out.push_back({d, t, rho});
  }
  return out;
}

std::unique_ptr<EnvironmentPrior> make_prior(const EnvironmentSpec& env, const Setting& setting) {
  if (env.prior == "coins") return std::make_unique<CoinsPrior>(setting.D, setting.T);
  if (env.prior == "logistic") return std::make_unique<LogisticPrior>(setting.D, setting.rho, setting.T);
  if (env.prior == "mlp") {
    MlpTestbedConfig c;
    c.dimension = setting.D;
    if (env.hidden.size() != 2) throw ConfigError("the mlp prior needs exactly two hidden widths");
    c.hidden = {env.hidden[0], env.hidden[1]};
    c.classes = env.classes;
    c.rho = setting.rho;
    c.train_pairs = setting.T;
    return std::make_unique<MlpTestbedPrior>(c);
  }
  if (env.prior == "empirical") {
    EmpiricalConfig c;
    c.train_subsample = setting.T;
    c.classes = env.classes;
    c.anchors = env.anchors;
    c.standardize = env.standardize;
    return std::make_unique<EmpiricalDatasetPrior>(load_csv_dataset(env.train_csv),
                                                   load_csv_dataset(env.test_csv), c);
  }
  throw ConfigError("unknown prior '" + env.prior + "'");
}

AgentFactory make_factory(const AgentConfig& agent, const HyperPoint& point,
                          const EnvironmentSpec& env, const Setting& setting) {
  const auto& v = point.values;
  auto get = [&v](const std::string& key) -> const std::string* {
    const auto it = v.find(key);
    return it == v.end() ? nullptr : &it->second;
  };
  AgentFactory f;
  f.name = agent.name + "[" + point.id + "]";
  const std::string& kind = agent.kind;

  if (!is_trained(kind)) {
    const double rho = get("rho") ? csv::parse_double(*get("rho")) : setting.rho;
    const std::string prior = env.prior;
    f.train = [kind, rho, prior](const TrainingData& data, Rng&, const TrainingContext& ctx)
        -> std::shared_ptr<const Agent> {
      if (kind == "uniform") return make_analytic(UniformSpec{ctx.classes});
      if (kind == "marginal") return make_analytic(LogisticMarginalSpec{rho});
      if (kind == "prior") return make_analytic(LogisticPriorSpec{rho, ctx.input_dimension});
      if (kind == "beta_posterior") return make_analytic(coins_posterior_counts(data, ctx.input_dimension));
      if (kind == "shared_p") return make_analytic(SharedPSpec{});
      return make_analytic(PerfectSpec{ctx.environment});
    };
    return f;
  }

  SgdSettings sgd;
  if (auto s = get("l2_decay")) sgd.l2_decay = csv::parse_double(*s);
  if (auto s = get("steps")) sgd.steps = static_cast<int>(csv::parse_int(*s));
  if (auto s = get("lr")) sgd.learning_rate = csv::parse_double(*s);
  if (auto s = get("momentum")) sgd.momentum = csv::parse_double(*s);
  if (auto s = get("batch")) sgd.max_batch = static_cast<int>(csv::parse_int(*s));
  if (auto s = get("scale_steps")) sgd.scale_steps_with_data = (*s == "true" || *s == "yes" || *s == "1");
  std::vector<int> hidden = {50, 50};
  if (auto s = get("hidden")) hidden = parse_hidden(*s);

  TrainedAgentSpec spec = MlpSpec{sgd};
  if (kind == "ensemble") {
    EnsembleSpec e;
    e.sgd = sgd;
    if (auto s = get("size")) e.size = static_cast<int>(csv::parse_int(*s));
    spec = e;
  } else if (kind == "ensemble+") {
    EnsemblePlusSpec e;
    e.sgd = sgd;
    if (auto s = get("size")) e.size = static_cast<int>(csv::parse_int(*s));
    if (auto s = get("prior_scale")) e.prior_scale = csv::parse_double(*s);
    if (auto s = get("bootstrap")) e.bootstrap = (*s == "true" || *s == "yes" || *s == "1");
    spec = e;
  }
  f.train = [spec, hidden](const TrainingData& data, Rng& rng, const TrainingContext& ctx) {
    return train_agent(spec, data, ModelShape{ctx.input_dimension, ctx.classes, hidden}, rng);
  };
  return f;
}

}  // namespace dyad
