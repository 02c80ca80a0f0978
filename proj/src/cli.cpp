#include "cttx/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "cttx/error.hpp"
#include "cttx/limits.hpp"
#include "cttx/markov.hpp"
#include "cttx/models.hpp"
#include "cttx/parallel.hpp"
#include "cttx/poisson.hpp"
#include "cttx/rng.hpp"
#include "format.hpp"

#ifndef CTTX_VERSION
#define CTTX_VERSION "0.0.0"
#endif

namespace cttx::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kCommands{"simulate", "dte", "ppp", "girsanov", "rate", "converge"};

// Checked view of one JSON object of the config.
class Section {
 public:
  Section(const json& j, std::string where, std::initializer_list<const char*> known)
      : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
    std::set<std::string> names(known.begin(), known.end());
    for (const auto& [key, _] : j_.items()) {
      if (!names.count(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  double num(const char* key) const {
    require(key);
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where_ + "." + key + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(where_ + "." + key + " must be finite");
    return d;
  }
  double num(const char* key, double fallback) const { return has(key) ? num(key) : fallback; }

  std::uint64_t count(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned())) {
      throw ConfigError(where_ + "." + key + " must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool flag(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError(where_ + "." + key + " must be true or false");
    return j_.at(key).get<bool>();
  }

  std::string str(const char* key, const std::string& fallback, std::initializer_list<const char*> allowed) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw ConfigError(where_ + "." + key + " must be a string");
    const auto v = j_.at(key).get<std::string>();
    if (allowed.size() != 0 && std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return v == a; })) {
      throw ConfigError(where_ + "." + key + " has unsupported value '" + v + "'");
    }
    return v;
  }

  std::vector<double> list(const char* key) const {
    require(key);
    const json& v = j_.at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(where_ + "." + key + " must be a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(where_ + "." + key + " must contain numbers only");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Section sub(const char* key, std::initializer_list<const char*> known) const {
    require(key);
    return Section(j_.at(key), where_ + "." + key, known);
  }

  const json& raw(const char* key) const {
    require(key);
    return j_.at(key);
  }

 private:
  void require(const char* key) const {
    if (!has(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + where_);
  }
  const json& j_;
  std::string where_;
};

struct ModelSpec {
  std::string name;
  json params;
  bool lagged() const { return name == "lagged-poisson"; }
};

ModelSpec parse_model(const Section& top) {
  const Section m = top.sub("model", {"name", "params"});
  ModelSpec spec;
  spec.name = m.str("name", "", {});
  if (spec.name.empty()) throw ConfigError("config.model.name is required");
  spec.params = m.has("params") ? m.raw("params") : json::object();
  if (spec.lagged()) {
    Section(spec.params, "config.model.params", {"lambda", "epsilon"});
  } else {
    make_jump_model(spec.name, spec.params);  // validates the parameter block
  }
  return spec;
}

poisson::LaggedPoissonParams lagged_params(const ModelSpec& model, const Section& window) {
  const Section p(model.params, "config.model.params", {"lambda", "epsilon"});
  poisson::LaggedPoissonParams out;
  out.lambda = p.num("lambda", 1.0);
  out.epsilon = p.num("epsilon", 1.0);
  out.r = window.num("r");
  out.s = window.num("s");
  out.t0 = window.num("t0", 0.0);
  out.T = window.num("T", 1.0);
  out.validate();
  return out;
}

HistorySpec parse_history(const Section& top, HistorySpec fallback) {
  if (!top.has("history")) return fallback;
  const Section h = top.sub("history", {"x_len", "y_len", "x_relative", "y_relative_to_x", "laplace"});
  HistorySpec spec;
  if (h.has("x_len")) spec.x_len = static_cast<NodeIndex>(h.count("x_len", 0));
  if (h.has("y_len")) spec.y_len = static_cast<NodeIndex>(h.count("y_len", 0));
  spec.x_relative = h.flag("x_relative", false);
  spec.y_relative_to_x = h.flag("y_relative_to_x", false);
  spec.laplace = h.num("laplace", 0.0);
  if (spec.laplace < 0.0) throw ConfigError("config.history.laplace must be nonnegative");
  return spec;
}

std::string num(double v) { return format_double(v); }

// Header line of every CSV artifact.
std::string csv_header(const RunConfig& c) {
  return "# cttx " CTTX_VERSION " command=" + c.command + " config_sha=" + c.config_hash +
         " seed=" + std::to_string(c.seed) + "\n";
}

json meta(const RunConfig& c) {
  return {{"version", CTTX_VERSION}, {"command", c.command}, {"config_sha", c.config_hash}, {"seed", c.seed}};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string dump(json j) { return j.dump(2) + "\n"; }

// ---- commands ----

std::vector<ProcessPair> simulate_pairs(const ModelSpec& model, const Section& window, double t0, double T,
                                        double margin, std::size_t n, std::uint64_t seed) {
  if (model.lagged()) {
    const auto p = lagged_params(model, window);
    return poisson::simulate_lagged_ensemble(p, margin, n, seed);
  }
  const auto jm = make_jump_model(model.name, model.params);
  // The comb evaluates paths at T itself, so they must run past it.
  return simulate_ensemble(*jm, t0 - margin - jm->warmup(), T + margin, n, seed);
}

RunOutcome cmd_simulate(const RunConfig& c) {
  const Section top(c.doc, "config", {"seed", "output", "n_paths", "model", "window"});
  const ModelSpec model = parse_model(top);
  const Section window = top.sub("window", {"t0", "T", "s", "r"});
  const double t0 = window.num("t0");
  const double T = window.num("T");
  if (!(t0 < T)) throw ConfigError("config.window: need t0 < T");
  const auto n = static_cast<std::size_t>(top.count("n_paths", 1));

  std::vector<ProcessPair> pairs;
  if (model.lagged()) {
    const Section p(model.params, "config.model.params", {"lambda", "epsilon"});
    const double lambda = p.num("lambda", 1.0);
    const double epsilon = p.num("epsilon", 1.0);
    if (!(lambda > 0.0) || !(epsilon > 0.0)) throw ParameterError("lagged Poisson: lambda and epsilon must be positive");
    for (std::size_t j = 0; j < n; ++j) {
      Rng rng(stream_seed(c.seed, j));
      SamplePath x = simulate_thppp(lambda, t0, T + epsilon, rng);
      SamplePath y = restrict_path(lag_path(x, epsilon), t0, T);
      pairs.emplace_back(restrict_path(x, t0, T), std::move(y));
    }
  } else {
    const auto jm = make_jump_model(model.name, model.params);
    pairs = simulate_ensemble(*jm, t0, T, n, c.seed);
  }

  std::string artifact;
  std::size_t events = 0;
  for (const auto& p : pairs) events += p.x.jump_count() + p.y.jump_count();
  if (c.format == "csv") {
    std::ostringstream os;
    os << csv_header(c) << "path,process,time,state\n";
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      for (const auto& [label, path] : {std::pair{"x", &pairs[j].x}, std::pair{"y", &pairs[j].y}}) {
        os << j << ',' << label << ',' << num(path->t_start()) << ',' << path->states()[0] << '\n';
        for (std::size_t k = 0; k < path->jump_count(); ++k) {
          os << j << ',' << label << ',' << num(path->jump_times()[k]) << ',' << path->states()[k + 1] << '\n';
        }
      }
    }
    artifact = os.str();
  } else {
    json arr = json::array();
    for (const auto& p : pairs) arr.push_back({{"x", to_json(p.x)}, {"y", to_json(p.y)}});
    artifact = dump({{"meta", meta(c)}, {"paths", arr}});
  }
  return {artifact, "simulate: " + std::to_string(n) + " pairs, " + std::to_string(events) + " events"};
}

RunOutcome cmd_dte(const RunConfig& c) {
  const Section top(c.doc, "config", {"seed", "output", "n_paths", "model", "window", "dt", "mode", "history"});
  const ModelSpec model = parse_model(top);
  const Section window = top.sub("window", {"t0", "T", "s", "r"});
  const double dt = top.num("dt");
  const std::string mode = top.str("mode", "plugin", {"plugin", "exact"});
  const auto n = static_cast<std::size_t>(top.count("n_paths", 1000));
  const double t0 = window.num("t0");
  const double T = window.num("T");
  const CombGrid grid = CombGrid::build(t0, T, window.num("s"), window.num("r"), dt);

  TEEstimate est;
  if (mode == "exact") {
    if (!model.lagged()) throw ConfigError("exact mode is available for the lagged-poisson model only");
    const auto p = lagged_params(model, window);
    const auto tables = poisson::exact_step_tables(p, dt);
    est = te_comb_sum([&](const CombGrid&, NodeIndex) { return tables; }, grid);
  } else {
    if (n < 2) throw EstimationError("plug-in estimation needs n_paths >= 2");
    HistorySpec fallback;
    if (model.lagged()) {
      fallback = poisson::lagged_history_spec(lagged_params(model, window), dt);
    } else {
      fallback.x_relative = make_jump_model(model.name, model.params)->counting();
    }
    const HistorySpec spec = parse_history(top, fallback);
    const double margin = std::max(window.num("s"), window.num("r")) + 2.0 * dt;
    const auto pairs = simulate_pairs(model, window, t0, T, model.lagged() ? dt : margin, n, c.seed);
    est = te_comb_sum(pairs, grid, spec);
  }
  std::string artifact;
  if (c.format == "csv") {
    artifact = csv_header(c) + per_step_csv(est);
  } else {
    json j = to_json(est);
    j["meta"] = meta(c);
    j["mode"] = mode;
    artifact = dump(j);
  }
  return {artifact, "dte: te=" + num(est.value) + " stderr=" + num(est.stderr) + " steps=" +
                        std::to_string(est.per_step.size())};
}

RunOutcome cmd_ppp(const RunConfig& c) {
  const Section top(c.doc, "config", {"seed", "output", "n_paths", "lambda", "epsilon", "window", "schedule"});
  const Section window = top.sub("window", {"t0", "T", "s", "r"});
  poisson::LaggedPoissonParams p;
  p.lambda = top.num("lambda");
  p.epsilon = top.num("epsilon");
  p.r = window.num("r");
  p.s = window.num("s");
  p.t0 = window.num("t0");
  p.T = window.num("T");
  p.validate();
  const std::vector<double> schedule = top.list("schedule");
  const auto n = static_cast<std::size_t>(top.count("n_paths", 1000));
  const auto rows = poisson::tau_S_schedule(p, schedule);
  const double limit = poisson::analytic_limit(p);

  std::vector<double> mc_te(rows.size(), std::nan("")), mc_se(rows.size(), std::nan(""));
  if (n > 0) {
    const double dt_max = *std::max_element(schedule.begin(), schedule.end());
    const auto pairs = poisson::simulate_lagged_ensemble(p, dt_max, n, c.seed);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      std::vector<double> v(n);
      parallel_for(n, [&](std::size_t k) { v[k] = poisson::path_kl(p, rows[j].dt, pairs[k]).value; });
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      mc_te[j] = mean;
      mc_se[j] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    }
  }

  std::string artifact;
  if (c.format == "csv") {
    std::ostringstream os;
    os << csv_header(c) << "dt,tau,S,tauS,analytic_limit,mc_te,mc_stderr\n";
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto& r = rows[j];
      os << num(r.dt) << ',' << r.tau << ',' << num(r.s) << ',' << num(r.tau_s) << ',' << num(limit) << ','
         << num(mc_te[j]) << ',' << num(mc_se[j]) << '\n';
    }
    artifact = os.str();
  } else {
    json arr = json::array();
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto& r = rows[j];
      arr.push_back({{"dt", r.dt}, {"tau", r.tau}, {"S", r.s}, {"tauS", r.tau_s}, {"analytic_limit", limit},
                     {"mc_te", finite_or_null(mc_te[j])}, {"mc_stderr", finite_or_null(mc_se[j])}});
    }
    artifact = dump({{"meta", meta(c)}, {"rows", arr}, {"tau_s_limit", poisson::tau_s_limit(p)}});
  }
  return {artifact, "ppp: " + std::to_string(rows.size()) + " rows, finest tauS=" + num(rows.back().tau_s) +
                        " analytic_limit=" + num(limit)};
}

RunOutcome cmd_girsanov(const RunConfig& c) {
  const Section top(c.doc, "config", {"seed", "output", "n_paths", "model", "window"});
  const ModelSpec model = parse_model(top);
  if (model.lagged()) throw ConfigError("girsanov needs a jump-rate model; lagged-poisson has none");
  const Section window = top.sub("window", {"t0", "T"});
  const double t0 = window.num("t0");
  const double T = window.num("T");
  const auto n = static_cast<std::size_t>(top.count("n_paths", 1000));
  const auto jm = make_jump_model(model.name, model.params);
  const EptResult r = ept_monte_carlo(*jm, t0, T, n, c.seed);
  const std::vector<double> probs{0.05, 0.25, 0.5, 0.75, 0.95};
  const auto q = quantiles(r.per_path, probs);

  std::string artifact;
  if (c.format == "csv") {
    std::ostringstream os;
    os << csv_header(c) << "ept,stderr,n_paths,q05,q25,q50,q75,q95\n";
    os << num(r.estimate.value) << ',' << num(r.estimate.stderr) << ',' << n;
    for (double v : q) os << ',' << num(v);
    os << '\n';
    artifact = os.str();
  } else {
    json qs = json::object();
    const char* names[] = {"0.05", "0.25", "0.5", "0.75", "0.95"};
    for (std::size_t j = 0; j < q.size(); ++j) qs[names[j]] = q[j];
    artifact = dump({{"meta", meta(c)},
                     {"ept", r.estimate.value},
                     {"stderr", r.estimate.stderr},
                     {"n_paths", n},
                     {"per_path_quantiles", qs}});
  }
  return {artifact, "girsanov: ept=" + num(r.estimate.value) + " stderr=" + num(r.estimate.stderr) +
                        " n_paths=" + std::to_string(n)};
}

RunOutcome cmd_rate(const RunConfig& c) {
  const Section top(c.doc, "config", {"seed", "output", "n_paths", "model", "window", "t", "h_schedule", "dt"});
  const ModelSpec model = parse_model(top);
  const double t = top.num("t");
  const std::vector<double> hs = top.list("h_schedule");
  const auto n = static_cast<std::size_t>(top.count("n_paths", 1000));

  RateReport report;
  if (model.lagged()) {
    const Section window = top.sub("window", {"t0", "T", "s", "r"});
    auto p = lagged_params(model, window);
    const double dt = top.num("dt", *std::min_element(hs.begin(), hs.end()) / 100.0);
    report = te_rate_fd(lagged_poisson_ept_surrogate(p, dt), t, hs);
  } else {
    const auto jm = make_jump_model(model.name, model.params);
    report = te_rate_fd(jump_model_ept(*jm, n, c.seed), t, hs);
  }

  std::string artifact;
  if (c.format == "csv") {
    std::ostringstream os;
    os << csv_header(c) << "h,ept_over_h\n";
    for (const auto& r : report.rows) os << num(r.h) << ',' << num(r.ept_over_h) << '\n';
    artifact = os.str();
  } else {
    json arr = json::array();
    for (const auto& r : report.rows) {
      arr.push_back({{"h", r.h}, {"ept_over_h", finite_or_null(r.ept_over_h)}, {"stderr", finite_or_null(r.stderr)}});
    }
    artifact = dump({{"meta", meta(c)}, {"rows", arr}, {"rate", finite_or_null(report.rate)},
                     {"divergent", report.divergent}});
  }
  return {artifact, "rate: extrapolated=" + num(report.rate) + " rows=" + std::to_string(report.rows.size())};
}

RunOutcome cmd_converge(const RunConfig& c) {
  const Section top(c.doc, "config", {"seed", "output", "n_paths", "model", "window", "schedule",
                                      "require_refinement", "mode", "history"});
  const ModelSpec model = parse_model(top);
  const Section window = top.sub("window", {"t0", "T", "s", "r"});
  Schedule schedule;
  schedule.dt_values = top.list("schedule");
  schedule.require_refinement = top.flag("require_refinement", false);
  schedule.validate();
  const std::string mode = top.str("mode", model.lagged() ? "exact" : "plugin", {"plugin", "exact"});
  const auto n = static_cast<std::size_t>(top.count("n_paths", mode == "exact" ? 0 : 1000));
  const double t0 = window.num("t0");
  const double T = window.num("T");
  const double s = window.num("s");
  const double r = window.num("r");
  const double dt_max = schedule.dt_values.front();

  std::vector<ProcessPair> pairs;
  std::unique_ptr<ConvergenceModel> cm;
  if (mode == "exact") {
    if (!model.lagged()) throw ConfigError("exact mode is available for the lagged-poisson model only");
    const auto p = lagged_params(model, window);
    if (n > 0) pairs = poisson::simulate_lagged_ensemble(p, dt_max, n, c.seed);
    cm = lagged_poisson_exact(p, pairs);
  } else {
    if (n < 2) throw EstimationError("plug-in estimation needs n_paths >= 2");
    std::function<HistorySpec(const CombGrid&)> history;
    if (model.lagged()) {
      const auto p = lagged_params(model, window);
      history = [p, &top](const CombGrid& g) { return parse_history(top, poisson::lagged_history_spec(p, g.dt())); };
    } else {
      HistorySpec fallback;
      fallback.x_relative = make_jump_model(model.name, model.params)->counting();
      const HistorySpec spec = parse_history(top, fallback);
      history = [spec](const CombGrid&) { return spec; };
    }
    const double margin = std::max(s, r) + 2.0 * dt_max;
    pairs = simulate_pairs(model, window, t0, T, model.lagged() ? dt_max : margin, n, c.seed);
    cm = plugin_ensemble(pairs, t0, T, s, r, history);
  }
  const ConvergenceReport report = converge_te(*cm, schedule);

  std::string artifact;
  if (c.format == "csv") {
    std::ostringstream os;
    os << csv_header(c) << "dt,te_sum,stderr,bound,fraction_in_bound\n";
    for (const auto& row : report.rows) {
      os << num(row.dt) << ',' << num(row.te_sum) << ',' << num(row.stderr) << ',' << num(row.bound) << ','
         << num(row.fraction_in_bound) << '\n';
    }
    artifact = os.str();
  } else {
    json j = to_json(report);
    j["meta"] = meta(c);
    j["mode"] = mode;
    artifact = dump(j);
  }
  return {artifact, "converge: limit_estimate=" + num(report.limit_estimate) + " cauchy_gap=" +
                        num(report.cauchy_gap) + (report.converged ? " converged" : " not-converged")};
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig load_config(const std::string& command, const std::string& config_text,
                      std::optional<std::uint64_t> seed, std::optional<std::string> out,
                      std::optional<std::string> format) {
  if (!kCommands.count(command)) throw ConfigError("unknown command '" + command + "'");
  RunConfig c;
  c.command = command;
  try {
    c.doc = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!c.doc.is_object()) throw ConfigError("config must be a JSON object");
  c.config_hash = fnv1a_hex(c.doc.dump());

  const json& doc = c.doc;
  if (seed) {
    c.seed = *seed;
  } else if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("config.seed must be a nonnegative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  std::string cfg_path, cfg_format;
  if (doc.contains("output")) {
    const Section o(doc["output"], "config.output", {"path", "format"});
    cfg_path = o.str("path", "", {});
    cfg_format = o.str("format", "", {"csv", "json"});
  }
  c.format = format ? *format : (cfg_format.empty() ? "csv" : cfg_format);
  if (c.format != "csv" && c.format != "json") throw ConfigError("format must be csv or json");
  c.out_path = out ? *out : (cfg_path.empty() ? command + "." + c.format : cfg_path);
  if (const char* dir = std::getenv("CTTX_OUT_DIR"); dir && *dir) {
    const std::filesystem::path p(c.out_path);
    if (p.is_relative()) c.out_path = (std::filesystem::path(dir) / p).string();
  }
  return c;
}

RunOutcome run(const RunConfig& config) {
  const std::string& cmd = config.command;
  if (cmd == "simulate") return cmd_simulate(config);
  if (cmd == "dte") return cmd_dte(config);
  if (cmd == "ppp") return cmd_ppp(config);
  if (cmd == "girsanov") return cmd_girsanov(config);
  if (cmd == "rate") return cmd_rate(config);
  if (cmd == "converge") return cmd_converge(config);
  throw ConfigError("unknown command '" + cmd + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
      dynamic_cast<const GridError*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const AbsoluteContinuityError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const ModelError*>(&e)) return 4;
  if (dynamic_cast<const EstimationError*>(&e)) return 5;
  return 1;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Continuous-time transfer entropy toolkit"};
  app.set_version_flag("--version", std::string("cttx ") + CTTX_VERSION);
  std::string command, config_file, out, format;
  std::uint64_t seed = 0;
  app.add_option("command", command, "simulate | dte | ppp | girsanov | rate | converge")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(kCommands.begin(), kCommands.end())));
  app.add_option("--config", config_file, "JSON run configuration")->required();
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides config)");
  auto* out_opt = app.add_option("--out", out, "output path (overrides config)");
  auto* fmt_opt = app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::ifstream in(config_file);
    if (!in) throw ConfigError("cannot read config file '" + config_file + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const RunConfig cfg = load_config(command, buffer.str(),
                                      seed_opt->count() ? std::optional(seed) : std::nullopt,
                                      out_opt->count() ? std::optional(out) : std::nullopt,
                                      fmt_opt->count() ? std::optional(format) : std::nullopt);
    const RunOutcome outcome = run(cfg);
    const std::filesystem::path path(cfg.out_path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write '" + cfg.out_path + "'");
    os << outcome.artifact;
    os.close();
    if (!os) throw Error("failed writing '" + cfg.out_path + "'");
    std::cout << outcome.summary << " -> " << cfg.out_path << std::endl;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "cttx " << command << ": " << e.what() << std::endl;
    return exit_code_for(e);
  }
}

}  // namespace cttx::cli
