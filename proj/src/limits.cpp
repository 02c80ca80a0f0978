#include "cttx/limits.hpp"

#include <algorithm>
#include <cmath>

#include "cttx/error.hpp"
#include "cttx/parallel.hpp"
#include "format.hpp"

namespace cttx {

void Schedule::validate() const {
  if (dt_values.empty()) throw ParameterError("schedule: no dt values");
  for (std::size_t j = 0; j < dt_values.size(); ++j) {
    const double dt = dt_values[j];
    if (!std::isfinite(dt) || !(dt > 0.0)) throw ParameterError("schedule: dt values must be positive");
    if (j == 0) continue;
    if (!(dt < dt_values[j - 1])) throw ParameterError("schedule: dt values must be strictly decreasing");
    if (require_refinement && !refines(dt, dt_values[j - 1])) {
      throw GridError("schedule: " + format_double(dt) + " does not divide " + format_double(dt_values[j - 1]));
    }
  }
}

namespace {

class LaggedPoissonExact : public ConvergenceModel {
 public:
  LaggedPoissonExact(const poisson::LaggedPoissonParams& params, std::span<const ProcessPair> ensemble)
      : params_(params), ensemble_(ensemble) {
    params_.validate();
  }

  ConvergenceRow row(double dt) const override {
    const CombGrid grid = params_.grid(dt);
    // Every step has the same tables.
    const auto tables = poisson::exact_step_tables(params_, dt);
    const TEEstimate est = te_comb_sum([&](const CombGrid&, NodeIndex) { return tables; }, grid);
    ConvergenceRow out;
    out.dt = dt;
    out.te_sum = est.value;
    out.divergent = !std::isfinite(est.value);
    const double S = poisson::single_event_step_kl(params_.lambda, dt, params_.epsilon, params_.r);
    out.bound = static_cast<double>(grid.tau()) * S;
    if (!ensemble_.empty()) {
      std::vector<char> inside(ensemble_.size());
      parallel_for(ensemble_.size(), [&](std::size_t j) {
        inside[j] = poisson::path_kl(params_, dt, ensemble_[j]).value <= out.bound;
      });
      const auto count = std::count(inside.begin(), inside.end(), 1);
      out.fraction_in_bound = static_cast<double>(count) / static_cast<double>(ensemble_.size());
    }
    return out;
  }

 private:
  poisson::LaggedPoissonParams params_;
  std::span<const ProcessPair> ensemble_;
};

class PluginEnsemble : public ConvergenceModel {
 public:
  PluginEnsemble(std::span<const ProcessPair> ensemble, double t0, double T, double s, double r,
                 std::function<HistorySpec(const CombGrid&)> history)
      : ensemble_(ensemble), t0_(t0), T_(T), s_(s), r_(r), history_(std::move(history)) {
    if (ensemble_.empty()) throw EstimationError("plug-in convergence: empty ensemble");
  }

  ConvergenceRow row(double dt) const override {
    const CombGrid grid = CombGrid::build(t0_, T_, s_, r_, dt);
    const HistorySpec spec = history_ ? history_(grid) : HistorySpec{};
    const TEEstimate est = te_comb_sum(ensemble_, grid, spec);
    ConvergenceRow out;
    out.dt = dt;
    out.te_sum = est.value;
    out.stderr = est.stderr;
    out.divergent = !std::isfinite(est.value);
    return out;
  }

 private:
  std::span<const ProcessPair> ensemble_;
  double t0_, T_, s_, r_;
  std::function<HistorySpec(const CombGrid&)> history_;
};

double linear_extrapolation(double x1, double v1, double x2, double v2) {
  return v2 - x2 * (v1 - v2) / (x1 - x2);
}

}  // namespace

std::unique_ptr<ConvergenceModel> lagged_poisson_exact(const poisson::LaggedPoissonParams& params,
                                                       std::span<const ProcessPair> ensemble) {
  return std::make_unique<LaggedPoissonExact>(params, ensemble);
}

std::unique_ptr<ConvergenceModel> plugin_ensemble(std::span<const ProcessPair> ensemble, double t0,
                                                  double T, double s, double r,
                                                  std::function<HistorySpec(const CombGrid&)> history) {
  return std::make_unique<PluginEnsemble>(ensemble, t0, T, s, r, std::move(history));
}

ConvergenceReport converge_te(const ConvergenceModel& model, const Schedule& schedule) {
  schedule.validate();
  ConvergenceReport report;
  for (double dt : schedule.dt_values) report.rows.push_back(model.row(dt));
  const auto& rows = report.rows;
  const std::size_t n = rows.size();
  if (n >= 2) {
    const auto& a = rows[n - 2];
    const auto& b = rows[n - 1];
    report.limit_estimate = a.divergent || b.divergent
                                ? std::numeric_limits<double>::infinity()
                                : linear_extrapolation(a.dt, a.te_sum, b.dt, b.te_sum);
    const std::size_t first = n >= 3 ? n - 3 : 0;
    double gap = 0.0;
    double se = 0.0;
    for (std::size_t j = first; j < n; ++j) {
      se = std::max(se, rows[j].stderr);
      if (j + 1 < n) gap = std::max(gap, std::abs(rows[j].te_sum - rows[j + 1].te_sum));
    }
    report.cauchy_gap = gap;
    report.converged = std::isfinite(gap) && gap < std::max(1e-3, 3.0 * se);
  } else {
    report.limit_estimate = rows[0].te_sum;
  }
  return report;
}

std::vector<double> bound_fractions(const std::vector<std::vector<double>>& kl, double gamma) {
  if (kl.empty()) return {};
  const std::size_t n_paths = kl[0].size();
  if (n_paths == 0) throw EstimationError("bound_fractions: no paths");
  for (const auto& row : kl) {
    if (row.size() != n_paths) throw ContractError("bound_fractions: rows differ in path count");
  }
  std::vector<double> sup(n_paths, -std::numeric_limits<double>::infinity());
  std::vector<double> out(kl.size());
  for (std::size_t j = kl.size(); j-- > 0;) {
    std::size_t inside = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
      sup[p] = std::max(sup[p], kl[j][p]);
      if (sup[p] <= gamma) ++inside;
    }
    out[j] = static_cast<double>(inside) / static_cast<double>(n_paths);
  }
  return out;
}

std::vector<double> check_bound(const poisson::LaggedPoissonParams& params,
                                std::span<const ProcessPair> ensemble, const Schedule& schedule,
                                double gamma) {
  schedule.validate();
  std::vector<std::vector<double>> kl(schedule.dt_values.size(), std::vector<double>(ensemble.size()));
  for (std::size_t j = 0; j < schedule.dt_values.size(); ++j) {
    const double dt = schedule.dt_values[j];
    parallel_for(ensemble.size(), [&](std::size_t p) {
      kl[j][p] = poisson::path_kl(params, dt, ensemble[p]).value;
    });
  }
  return bound_fractions(kl, gamma);
}

RateReport te_rate_fd(const EptFunction& ept, double t, std::span<const double> h_schedule) {
  if (h_schedule.empty()) throw ParameterError("te_rate_fd: empty window schedule");
  RateReport report;
  for (double h : h_schedule) {
    if (!std::isfinite(h) || !(h > 0.0)) throw ParameterError("te_rate_fd: window lengths must be positive");
    const auto [value, se] = ept(t, h);
    if (!std::isfinite(value)) report.divergent = true;
    report.rows.push_back(RateRow{h, value / h, se / h});
  }
  const auto& rows = report.rows;
  const std::size_t n = rows.size();
  if (report.divergent) {
    report.rate = std::numeric_limits<double>::infinity();
  } else if (n >= 2) {
    report.rate = linear_extrapolation(rows[n - 2].h, rows[n - 2].ept_over_h, rows[n - 1].h,
                                       rows[n - 1].ept_over_h);
  } else {
    report.rate = rows[0].ept_over_h;
  }
  return report;
}

EptFunction lagged_poisson_ept_surrogate(const poisson::LaggedPoissonParams& params, double dt) {
  return [params, dt](double t, double h) {
    poisson::LaggedPoissonParams p = params;
    p.t0 = t;
    p.T = t + h;
    const CombGrid grid = p.grid(dt);
    const double S = poisson::single_event_step_kl(p.lambda, dt, p.epsilon, p.r);
    return std::pair{static_cast<double>(grid.tau()) * S, 0.0};
  };
}

EptFunction jump_model_ept(const JumpModel& model, std::size_t n_paths, std::uint64_t seed) {
  return [&model, n_paths, seed](double t, double h) {
    const EptResult r = ept_monte_carlo(model, t, t + h, n_paths, seed);
    return std::pair{r.estimate.value, r.estimate.stderr};
  };
}

StationarityReport stationary_rate_check(const TEEstimate& comb, double t0, double T, bool exact,
                                         std::optional<RateEstimate> rate) {
  if (comb.per_step.empty()) throw ContractError("stationary_rate_check: no per-step values");
  if (!(t0 < T)) throw ParameterError("stationary_rate_check: need t0 < T");
  StationarityReport out;
  out.step_min = out.step_max = comb.per_step[0].te;
  double sum = 0.0;
  for (const auto& s : comb.per_step) {
    out.step_min = std::min(out.step_min, s.te);
    out.step_max = std::max(out.step_max, s.te);
    sum += s.te;
  }
  if (exact) {
    out.steps_equal = out.step_max - out.step_min <= 1e-10;
  } else {
    const double mean = sum / static_cast<double>(comb.per_step.size());
    out.steps_equal = std::all_of(comb.per_step.begin(), comb.per_step.end(), [&](const StepValue& s) {
      return std::abs(s.te - mean) <= std::max(3.0 * s.stderr, 1e-10);
    });
  }
  out.mean_rate = comb.value / (T - t0);
  out.mean_rate_stderr = comb.stderr / (T - t0);
  if (rate) {
    out.rate = rate->value;
    out.rate_stderr = rate->stderr;
    const double se = std::hypot(rate->stderr, out.mean_rate_stderr);
    out.rate_matches = std::abs(rate->value - out.mean_rate) <= 3.0 * se;
  }
  return out;
}

SubpartitionResult subpartition_ept(std::span<const ProcessPair> ensemble,
                                    std::span<const double> partition, double T, double s, double r,
                                    const SubpartitionOptions& options) {
  if (ensemble.empty()) throw EstimationError("subpartition_ept: empty ensemble");
  if (partition.empty()) throw ParameterError("subpartition_ept: empty partition");
  if (options.micro_nodes < 2) throw ParameterError("subpartition_ept: need at least 2 micro nodes");
  if (!(s > 0.0) || !(r > 0.0)) throw ParameterError("subpartition_ept: s and r must be positive");
  for (std::size_t j = 0; j < partition.size(); ++j) {
    if (!(partition[j] < T) || (j > 0 && !(partition[j] > partition[j - 1]))) {
      throw ParameterError("subpartition_ept: partition must be strictly increasing and below T");
    }
  }
  std::vector<double> cuts(partition.begin(), partition.end());
  cuts.push_back(T);

  const int m = options.micro_nodes;
  const double n_paths = static_cast<double>(ensemble.size());
  SubpartitionResult out;
  out.micro_nodes = m;
  for (std::size_t cell = 0; cell + 1 < cuts.size(); ++cell) {
    const double a = cuts[cell];
    const double b = cuts[cell + 1];
    auto nodes = [m](double lo, double hi) {
      std::vector<double> v(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) v[static_cast<std::size_t>(j)] = lo + (hi - lo) * j / (m - 1);
      v.back() = hi;
      return v;
    };
    const auto target_nodes = nodes(a, b);
    const auto source_nodes = nodes(b - r, b);
    const auto past_nodes = nodes(a - s, a);

    std::map<std::vector<Symbol>, long> n_abc, n_ac, n_bc, n_c;
    for (const ProcessPair& pair : ensemble) {
      const State base = options.relative ? pair.x.eval(a) : 0;
      std::vector<Symbol> A, B, C;
      for (std::size_t j = 1; j < target_nodes.size(); ++j) A.push_back(pair.x.eval(target_nodes[j]) - base);
      for (double t : source_nodes) B.push_back(pair.y.eval(t) - base);
      for (double t : past_nodes) C.push_back(pair.x.eval(t) - base);
      std::vector<Symbol> ac = A, bc = B;
      ac.insert(ac.end(), C.begin(), C.end());
      bc.insert(bc.end(), C.begin(), C.end());
      std::vector<Symbol> abc = A;
      abc.insert(abc.end(), bc.begin(), bc.end());
      ++n_abc[abc];
      ++n_ac[ac];
      ++n_bc[bc];
      ++n_c[C];
    }
    if (static_cast<double>(n_abc.size()) * options.min_paths_per_symbol > n_paths) {
      throw EstimationError("subpartition_ept: " + std::to_string(ensemble.size()) + " paths for " +
                            std::to_string(n_abc.size()) + " distinct joint symbols in cell [" +
                            format_double(a) + ", " + format_double(b) +
                            "]; increase n_paths or reduce micro_nodes");
    }
    const std::size_t la = target_nodes.size() - 1;
    const std::size_t lb = source_nodes.size();
    double cmi = 0.0;
    for (const auto& [key, count] : n_abc) {
      const std::vector<Symbol> C(key.begin() + static_cast<long>(la + lb), key.end());
      std::vector<Symbol> ac(key.begin(), key.begin() + static_cast<long>(la));
      ac.insert(ac.end(), C.begin(), C.end());
      const std::vector<Symbol> bc(key.begin() + static_cast<long>(la), key.end());
      const double ratio = static_cast<double>(count) * static_cast<double>(n_c.at(C)) /
                           (static_cast<double>(n_ac.at(ac)) * static_cast<double>(n_bc.at(bc)));
      cmi += static_cast<double>(count) / n_paths * std::log(ratio);
    }
    out.per_cell.push_back(cmi);
    out.value += cmi;
  }
  return out;
}

JointPmf marginalize(const JointPmf& p, std::span<const std::size_t> coords) {
  JointPmf out;
  for (const auto& [key, prob] : p) {
    std::vector<Symbol> sub;
    for (std::size_t c : coords) {
      if (c >= key.size()) throw ContractError("marginalize: coordinate out of range");
      sub.push_back(key[c]);
    }
    out[sub] += prob;
  }
  return out;
}

double kl_divergence(const JointPmf& p, const JointPmf& q) {
  double total = 0.0;
  for (const auto& [key, prob] : p) {
    if (prob == 0.0) continue;
    const auto it = q.find(key);
    if (it == q.end() || it->second == 0.0) return kInfiniteKl;
    total += prob * std::log(prob / it->second);
  }
  return total;
}

std::pair<double, double> kl_coarsening_check(const JointPmf& p, const JointPmf& q,
                                              std::span<const std::size_t> coords) {
  return {kl_divergence(p, q), kl_divergence(marginalize(p, coords), marginalize(q, coords))};
}

JointPmf product_joint(std::span<const Pmf> factors) {
  JointPmf out{{std::vector<Symbol>{}, 1.0}};
  for (const Pmf& f : factors) {
    JointPmf next;
    for (const auto& [key, prob] : out) {
      for (std::size_t j = 0; j < f.size(); ++j) {
        std::vector<Symbol> k = key;
        k.push_back(f.support()[j]);
        next[k] += prob * f.probs()[j];
      }
    }
    out = std::move(next);
  }
  return out;
}

nlohmann::json to_json(const ConvergenceReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& r : report.rows) {
    rows.push_back({{"dt", r.dt},
                    {"te_sum", num(r.te_sum)},
                    {"stderr", num(r.stderr)},
                    {"bound", num(r.bound)},
                    {"fraction_in_bound", num(r.fraction_in_bound)},
                    {"divergent", r.divergent}});
  }
  return {{"rows", rows},
          {"limit_estimate", num(report.limit_estimate)},
          {"cauchy_gap", num(report.cauchy_gap)},
          {"converged", report.converged}};
}

}  // namespace cttx
