#include "cttx/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "cttx/error.hpp"
#include "cttx/parallel.hpp"
#include "cttx/rng.hpp"
#include "format.hpp"

namespace cttx::poisson {

namespace {

double eta(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

struct StepGeometry {
  long L;
  double span;      // eps + (1 - L) dt: from node i+1 to the source node
  double remainder; // eps - L dt: from node i to the source node
  double p;         // dt / span
};

StepGeometry geometry(const LaggedPoissonParams& params, double dt) {
  const long L = lag_nodes(params, dt);
  const double span = params.epsilon + (1.0 - static_cast<double>(L)) * dt;
  const double rem = params.epsilon - static_cast<double>(L) * dt;
  return StepGeometry{L, span, rem, dt / span};
}

void check_dt(double dt) {
  if (!std::isfinite(dt) || !(dt > 0.0)) throw ParameterError("dt must be finite and positive");
}

Pmf normalized(std::vector<Symbol> support, std::vector<double> mass) {
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  for (double& m : mass) m /= total;
  return Pmf(std::move(support), std::move(mass));
}

}  // namespace

void LaggedPoissonParams::validate() const {
  if (!std::isfinite(lambda) || !(lambda > 0.0)) {
    throw ParameterError("lagged Poisson: lambda must be finite and positive");
  }
  if (!std::isfinite(epsilon) || !(epsilon > 0.0)) {
    throw ParameterError("lagged Poisson: epsilon must be positive");
  }
  if (!std::isfinite(r) || !(r > 0.0) || !(r < epsilon)) {
    throw ParameterError("lagged Poisson requires 0 < r < epsilon (got r=" + format_double(r) +
                         ", epsilon=" + format_double(epsilon) + ")");
  }
  if (!std::isfinite(s) || !(s > 0.0)) throw ParameterError("lagged Poisson: s must be positive");
  if (!std::isfinite(t0) || !std::isfinite(T) || !(t0 < T)) {
    throw ParameterError("lagged Poisson: need t0 < T");
  }
}

double pois(double x, long n) {
  if (!(x >= 0.0) || n < 0) throw ContractError("pois: arguments must be nonnegative");
  if (x == 0.0) return n == 0 ? 1.0 : 0.0;
  if (n > 20) {
    return std::exp(-x + static_cast<double>(n) * std::log(x) - std::lgamma(static_cast<double>(n) + 1.0));
  }
  double v = std::exp(-x);
  for (long j = 1; j <= n; ++j) v *= x / static_cast<double>(j);
  return v;
}

long lag_nodes(const LaggedPoissonParams& params, double dt) {
  params.validate();
  check_dt(dt);
  const long L = static_cast<long>(guarded_floor(params.r, dt));
  if (!(static_cast<double>(L) * dt < params.epsilon)) {
    throw ParameterError("lagged Poisson: dt too large, need floor(r/dt) * dt < epsilon");
  }
  return L;
}

Pmf cond_pmf_given_x(double lambda, double dt, State a, double tail) {
  if (!(lambda > 0.0)) throw ParameterError("cond_pmf_given_x: lambda must be positive");
  check_dt(dt);
  const double mean = lambda * dt;
  std::vector<Symbol> support;
  std::vector<double> mass;
  double cumulative = 0.0;
  for (long j = 0;; ++j) {
    const double m = pois(mean, j);
    support.push_back(a + j);
    mass.push_back(m);
    cumulative += m;
    if (1.0 - cumulative <= tail && static_cast<double>(j) >= mean) break;
  }
  return normalized(std::move(support), std::move(mass));
}

Pmf cond_pmf_given_xy(const LaggedPoissonParams& params, double dt, const StepContext& ctx) {
  const StepGeometry g = geometry(params, dt);
  const long d = static_cast<long>(ctx.d());
  if (d < 0) throw ContractError("cond_pmf_given_xy: need c >= a");
  std::vector<Symbol> support;
  std::vector<double> mass;
  const double log_p = std::log(g.p);
  const double log_q = std::log1p(-g.p);
  const double lg_d = std::lgamma(static_cast<double>(d) + 1.0);
  for (long b = 0; b <= d; ++b) {
    const double log_choose = lg_d - std::lgamma(static_cast<double>(b) + 1.0) -
                              std::lgamma(static_cast<double>(d - b) + 1.0);
    support.push_back(ctx.a + b);
    mass.push_back(std::exp(log_choose + static_cast<double>(b) * log_p +
                            static_cast<double>(d - b) * log_q));
  }
  return normalized(std::move(support), std::move(mass));
}

Pmf cond_pmf_given_xy_ratio(const LaggedPoissonParams& params, double dt, const StepContext& ctx) {
  const StepGeometry g = geometry(params, dt);
  const long d = static_cast<long>(ctx.d());
  if (d < 0) throw ContractError("cond_pmf_given_xy_ratio: need c >= a");
  const double lambda = params.lambda;
  const double denom = pois(lambda * g.span, d);
  std::vector<Symbol> support;
  std::vector<double> mass;
  for (long b = 0; b <= d; ++b) {
    support.push_back(ctx.a + b);
    mass.push_back(pois(lambda * g.remainder, d - b) * pois(lambda * dt, b) / denom);
  }
  return Pmf(std::move(support), std::move(mass));
}

double single_event_step_kl(double lambda, double dt, double epsilon, double r) {
  LaggedPoissonParams p;
  p.lambda = lambda;
  p.epsilon = epsilon;
  p.r = r;
  const StepGeometry g = geometry(p, dt);
  const double rho = g.remainder / g.span;
  return lambda * dt * rho + eta(rho) + (lambda * dt * dt - std::log(lambda) * dt) / g.span +
         dt * eta(1.0 / g.span);
}

double per_step_kl_finite_sum(const LaggedPoissonParams& params, double dt, long d,
                              LogTermBase base) {
  if (d < 0) throw ContractError("per_step_kl_finite_sum: d must be >= 0");
  const StepGeometry g = geometry(params, dt);
  const double lambda = params.lambda;
  const double rho = g.remainder / g.span;
  const double ff_base =
      base == LogTermBase::lag_corrected ? g.remainder : params.epsilon - lambda * dt;
  if (!(ff_base > 0.0)) throw ParameterError("per_step_kl_finite_sum: log-term base is not positive");

  const double dd = static_cast<double>(d);
  const double rho_d = std::exp(dd * std::log(rho));
  const double log_ratio = std::log(dt / g.remainder);
  const double lg_d = std::lgamma(dd + 1.0);
  double zeta_sum = 0.0;
  double weighted_log = 0.0;
  for (long b = 0; b <= d; ++b) {
    const double bb = static_cast<double>(b);
    const double lg_b = std::lgamma(bb + 1.0);
    const double lg_rest = std::lgamma(dd - bb + 1.0);
    const double zeta = std::exp(lg_d - lg_b - lg_rest + bb * log_ratio);
    const double log_falling = lg_d - lg_rest;
    zeta_sum += zeta;
    weighted_log += zeta * (log_falling - bb * std::log(lambda * ff_base));
  }
  return (eta(rho_d) + lambda * dt * rho_d) * zeta_sum + rho_d * weighted_log;
}

double per_step_kl(const LaggedPoissonParams& params, double dt, const StepContext& ctx) {
  const long d = static_cast<long>(ctx.d());
  if (d < 0) throw ContractError("per_step_kl: need c >= a");
  lag_nodes(params, dt);
  if (d == 0) return params.lambda * dt;
  if (d == 1) return single_event_step_kl(params.lambda, dt, params.epsilon, params.r);
  return per_step_kl_finite_sum(params, dt, d);
}

PathKl path_kl(const LaggedPoissonParams& params, double dt, const ProcessPair& pair) {
  const CombGrid grid = params.grid(dt);
  const long L = lag_nodes(params, dt);
  const NodeIndex n_hi = grid.n_hi();
  PathKl out;
  out.tau = static_cast<long>(grid.tau());
  std::vector<long> d_values(static_cast<std::size_t>(out.tau));
  for (NodeIndex i = 0; i < grid.tau(); ++i) {
    const State a = pair.x.eval(grid.time_at(n_hi - i - 1));
    const State c = pair.y.eval(grid.time_at(n_hi - i - L));
    const long d = static_cast<long>(c - a);
    if (d < 0) throw ContractError("path_kl: source count below destination count (not a lagged copy?)");
    d_values[static_cast<std::size_t>(i)] = d;
    out.q += d;
    if (d >= 2) out.multi_event = true;
  }
  const double base = params.lambda * dt;
  if (!out.multi_event) {
    const double S = single_event_step_kl(params.lambda, dt, params.epsilon, params.r);
    out.value = base * static_cast<double>(out.tau) + static_cast<double>(out.q) * (S - base);
    return out;
  }
  std::map<long, double> cache;
  for (long d : d_values) {
    auto it = cache.find(d);
    if (it == cache.end()) it = cache.emplace(d, per_step_kl(params, dt, StepContext{0, d})).first;
    out.value += it->second;
  }
  return out;
}

bool single_jump_ok(const SamplePath& path, double dt, double lo, double hi) {
  const auto& jumps = path.jump_times();
  bool have_prev = false;
  double prev = 0.0;
  for (double t : jumps) {
    if (t < lo || t > hi) continue;
    if (have_prev && !(t - prev > dt)) return false;
    prev = t;
    have_prev = true;
  }
  return true;
}

double analytic_limit(const LaggedPoissonParams& params) {
  params.validate();
  const double gap = params.epsilon - params.r;
  return (params.T - params.t0) * (params.lambda - std::log(params.lambda * gap) / gap);
}

double tau_s_limit(const LaggedPoissonParams& params) {
  params.validate();
  const double gap = params.epsilon - params.r;
  return (params.T - params.t0) * (params.lambda - (1.0 + std::log(params.lambda * gap)) / gap);
}

std::vector<TauSRow> tau_S_schedule(const LaggedPoissonParams& params,
                                    std::span<const double> dt_schedule) {
  std::vector<TauSRow> rows;
  for (double dt : dt_schedule) {
    const CombGrid grid = params.grid(dt);
    const double S = single_event_step_kl(params.lambda, dt, params.epsilon, params.r);
    const long tau = static_cast<long>(grid.tau());
    rows.push_back(TauSRow{dt, tau, S, static_cast<double>(tau) * S});
  }
  return rows;
}

std::pair<CondPmfTable, CondPmfTable> exact_step_tables(const LaggedPoissonParams& params,
                                                        double dt, double tail) {
  const StepGeometry g = geometry(params, dt);
  const double mean = params.lambda * g.span;
  std::map<HistoryKey, CondEntry> joint;
  double cumulative = 0.0;
  std::vector<std::pair<long, double>> weights;
  for (long d = 0;; ++d) {
    const double w = pois(mean, d);
    weights.emplace_back(d, w);
    cumulative += w;
    if (1.0 - cumulative <= tail && static_cast<double>(d) >= mean) break;
  }
  for (const auto& [d, w] : weights) {
    joint.emplace(HistoryKey{{0}, std::vector<Symbol>{d}},
                  CondEntry{cond_pmf_given_xy(params, dt, StepContext{0, d}), w / cumulative});
  }
  // The X-only pmf must cover every increment some context allows (up to the
  // largest d kept), or the step KL would be infinite.
  const long d_max = weights.back().first;
  std::vector<Symbol> support;
  std::vector<double> mass;
  double total = 0.0;
  for (long j = 0; j <= d_max || 1.0 - total > tail; ++j) {
    support.push_back(j);
    mass.push_back(pois(params.lambda * dt, j));
    total += mass.back();
  }
  for (double& m : mass) m /= total;
  std::map<HistoryKey, CondEntry> x_only;
  x_only.emplace(HistoryKey{{0}, std::nullopt}, CondEntry{Pmf(std::move(support), std::move(mass)), 1.0});
  return {CondPmfTable(std::move(joint)), CondPmfTable(std::move(x_only))};
}

double exact_step_te(const LaggedPoissonParams& params, double dt) {
  const auto [joint, x_only] = exact_step_tables(params, dt);
  return te_step(joint, x_only);
}

std::pair<double, double> simulation_window(const LaggedPoissonParams& params, double dt_max) {
  params.validate();
  check_dt(dt_max);
  // Lowest node any history touches is >= t0 - max(s, r) - dt; the highest
  // source node maps to <= T + epsilon on X.
  const double lo = params.t0 - std::max(params.s, params.r) - 2.0 * dt_max;
  const double hi = params.T + params.epsilon + 2.0 * dt_max;
  return {lo, hi};
}

ProcessPair simulate_lagged_pair(const LaggedPoissonParams& params, double dt_max,
                                 std::uint64_t seed) {
  const auto [lo, hi] = simulation_window(params, dt_max);
  Rng rng(seed);
  SamplePath x = simulate_thppp(params.lambda, lo, hi, rng);
  SamplePath y = lag_path(x, params.epsilon);
  return ProcessPair(std::move(x), std::move(y));
}

std::vector<ProcessPair> simulate_lagged_ensemble(const LaggedPoissonParams& params,
                                                  double dt_max, std::size_t n,
                                                  std::uint64_t seed) {
  std::vector<std::optional<ProcessPair>> slots(n);
  parallel_for(n, [&](std::size_t j) {
    slots[j].emplace(simulate_lagged_pair(params, dt_max, stream_seed(seed, j)));
  });
  std::vector<ProcessPair> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

HistorySpec lagged_history_spec(const LaggedPoissonParams& params, double dt) {
  const long L = lag_nodes(params, dt);
  if (L < 1) throw ParameterError("lagged_history_spec: need r >= dt so the source history is non-empty");
  HistorySpec spec;
  spec.x_relative = true;
  spec.y_relative_to_x = true;
  spec.y_len = L - 1;
  return spec;
}

}  // namespace cttx::poisson
