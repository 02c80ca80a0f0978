#pragma once

#include <span>
#include <utility>
#include <vector>

#include "cttx/comb.hpp"
#include "cttx/dte.hpp"
#include "cttx/paths.hpp"

namespace cttx::poisson {

/// Destination X is a THPPP counting process with intensity lambda; the
/// source is its lagged copy Y_t = X_{t + epsilon}. Requires 0 < r < epsilon.
struct LaggedPoissonParams {
  double lambda = 1.0;
  double epsilon = 1.0;
  double r = 0.5;
  double s = 0.25;
  double t0 = 0.0;
  double T = 1.0;

  void validate() const;
  CombGrid grid(double dt) const { return CombGrid::build(t0, T, s, r, dt); }
};

/// Counts a = X at node i+1 and c = X at node i+L shifted by epsilon.
struct StepContext {
  State a = 0;
  State c = 0;
  State d() const { return c - a; }
};

/// exp(-x) x^n / n!, in log space for n > 20.
double pois(double x, long n);

/// L = floor(r / dt) (guarded); requires L * dt < epsilon.
long lag_nodes(const LaggedPoissonParams& params, double dt);

/// Law of X at node i given X at node i+1 = a: a + Poisson(lambda dt),
/// truncated at `tail` mass and renormalized.
Pmf cond_pmf_given_x(double lambda, double dt, State a, double tail = 1e-12);

/// Law of X at node i given (a, c): a + Binomial(c - a, dt / (eps + (1 - L) dt)).
Pmf cond_pmf_given_xy(const LaggedPoissonParams& params, double dt, const StepContext& ctx);

/// The same law as a ratio of Poisson masses; kept as an independent check of
/// the binomial form.
Pmf cond_pmf_given_xy_ratio(const LaggedPoissonParams& params, double dt, const StepContext& ctx);

/// Which base the falling-factorial log term uses. The printed expression has
/// (eps - lambda dt); the derivation gives (eps - L dt).
enum class LogTermBase { lag_corrected, as_printed };

/// KL(cond_pmf_given_xy || cond_pmf_given_x) for one context: lambda dt for
/// d = 0, single_event_step_kl for d = 1, the finite sum otherwise.
double per_step_kl(const LaggedPoissonParams& params, double dt, const StepContext& ctx);

/// Falling-factorial finite sum for general d.
double per_step_kl_finite_sum(const LaggedPoissonParams& params, double dt, long d,
                              LogTermBase base = LogTermBase::lag_corrected);

/// Per-step KL when exactly one event is available (d = 1), S(lambda, dt):
///   lambda dt rho + eta(rho) + (lambda dt^2 - ln(lambda) dt) / D + dt eta(1 / D)
/// with D = eps + (1 - L) dt, rho = (eps - L dt) / D, eta(x) = x ln x.
double single_event_step_kl(double lambda, double dt, double epsilon, double r);

struct PathKl {
  double value = 0.0;
  long tau = 0;
  /// Sum of d_i over the steps.
  long q = 0;
  /// Some step saw d_i >= 2, so the general per-step sum was used.
  bool multi_event = false;
};

/// Per-path KL of the grid-restricted conditional path measures: the sum over
/// steps of per_step_kl. When every d_i <= 1 this is lambda tau dt + Q (S - lambda dt).
PathKl path_kl(const LaggedPoissonParams& params, double dt, const ProcessPair& pair);

/// True iff all gaps between consecutive jumps inside [lo, hi] exceed dt.
bool single_jump_ok(const SamplePath& path, double dt, double lo = -1e300, double hi = 1e300);

/// The limit of tau * S(lambda, dt) as printed:
///   (T - t0) (lambda - ln(lambda (eps - r)) / (eps - r)).
double analytic_limit(const LaggedPoissonParams& params);

/// The actual limit of tau * S(lambda, dt):
///   (T - t0) (lambda - (1 + ln(lambda (eps - r))) / (eps - r)).
double tau_s_limit(const LaggedPoissonParams& params);

struct TauSRow {
  double dt;
  long tau;
  double s;
  double tau_s;
};

std::vector<TauSRow> tau_S_schedule(const LaggedPoissonParams& params,
                                    std::span<const double> dt_schedule);

/// Exact per-step tables in relative encoding: x-history {0}, y-history {d}
/// with d ~ Poisson(lambda (eps + (1 - L) dt)).
std::pair<CondPmfTable, CondPmfTable> exact_step_tables(const LaggedPoissonParams& params,
                                                        double dt, double tail = 1e-12);

/// Exact TE of one step (identical for every step).
double exact_step_te(const LaggedPoissonParams& params, double dt);

/// Window on which X must be simulated so that every grid with dt <= dt_max
/// can be evaluated on X and on its lagged copy.
std::pair<double, double> simulation_window(const LaggedPoissonParams& params, double dt_max);

/// X on simulation_window(params, dt_max) paired with Y = lag_path(X, epsilon).
ProcessPair simulate_lagged_pair(const LaggedPoissonParams& params, double dt_max,
                                 std::uint64_t seed);

/// Ensemble of n lagged pairs; pair j uses stream_seed(seed, j).
std::vector<ProcessPair> simulate_lagged_ensemble(const LaggedPoissonParams& params,
                                                  double dt_max, std::size_t n,
                                                  std::uint64_t seed);

/// Plug-in history layout under which the lagged-Poisson reduction is exact:
/// relative encodings, y-history of L nodes (i+1..i+L).
HistorySpec lagged_history_spec(const LaggedPoissonParams& params, double dt);

}  // namespace cttx::poisson
