#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cttx/dte.hpp"
#include "cttx/markov.hpp"
#include "cttx/poisson.hpp"

namespace cttx {

struct Schedule {
  std::vector<double> dt_values;
  bool require_refinement = false;
  /// Strictly decreasing positive values; each divides the previous when
  /// require_refinement is set.
  void validate() const;
};

struct ConvergenceRow {
  double dt = 0.0;
  double te_sum = 0.0;
  double stderr = 0.0;
  /// NaN when the model has no per-path bound.
  double bound = std::numeric_limits<double>::quiet_NaN();
  double fraction_in_bound = std::numeric_limits<double>::quiet_NaN();
  bool divergent = false;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  /// Linear-in-dt extrapolation through the last two rows.
  double limit_estimate = std::numeric_limits<double>::quiet_NaN();
  /// max |row_j - row_{j+1}| over the last three rows.
  double cauchy_gap = std::numeric_limits<double>::quiet_NaN();
  /// cauchy_gap < max(1e-3, 3 stderr) over the last three rows.
  bool converged = false;
};

/// Something that can produce one convergence row per dt.
class ConvergenceModel {
 public:
  virtual ~ConvergenceModel() = default;
  virtual ConvergenceRow row(double dt) const = 0;
};

/// Lagged Poisson in exact mode. te_sum is the exact comb sum, bound is
/// tau S(lambda, dt); with an ensemble, fraction_in_bound is the share of
/// paths whose path_kl is at most the bound.
std::unique_ptr<ConvergenceModel> lagged_poisson_exact(const poisson::LaggedPoissonParams& params,
                                                       std::span<const ProcessPair> ensemble = {});

/// Plug-in comb sums over a fixed ensemble. `history` picks the history
/// layout for each dt.
std::unique_ptr<ConvergenceModel> plugin_ensemble(
    std::span<const ProcessPair> ensemble, double t0, double T, double s, double r,
    std::function<HistorySpec(const CombGrid&)> history = {});

ConvergenceReport converge_te(const ConvergenceModel& model, const Schedule& schedule);

/// Fractions of paths in B_{dt, gamma}: sup over schedule entries dt' <= dt
/// of the path KL is at most gamma. kl[row][path], rows in schedule order.
std::vector<double> bound_fractions(const std::vector<std::vector<double>>& kl, double gamma);

/// Lagged Poisson: path_kl for each schedule row and path, then bound_fractions.
std::vector<double> check_bound(const poisson::LaggedPoissonParams& params,
                                std::span<const ProcessPair> ensemble, const Schedule& schedule,
                                double gamma);

struct RateRow {
  double h;
  double ept_over_h;
  double stderr;
};

struct RateReport {
  std::vector<RateRow> rows;
  /// Linear-in-h extrapolation through the last two rows.
  double rate = std::numeric_limits<double>::quiet_NaN();
  bool divergent = false;
};

/// EPT over [t, t + h) for a window length h, with its standard error.
using EptFunction = std::function<std::pair<double, double>(double t, double h)>;

RateReport te_rate_fd(const EptFunction& ept, double t, std::span<const double> h_schedule);

/// tau S(lambda, dt) over [t, t + h) as a surrogate for the lagged-Poisson EPT.
EptFunction lagged_poisson_ept_surrogate(const poisson::LaggedPoissonParams& params, double dt);

/// Girsanov Monte Carlo EPT of a jump model over [t, t + h).
EptFunction jump_model_ept(const JumpModel& model, std::size_t n_paths, std::uint64_t seed);

struct StationarityReport {
  double step_min = 0.0;
  double step_max = 0.0;
  /// Exact: spread <= 1e-10. Plug-in: every step within 3 sigma of the mean step.
  bool steps_equal = false;
  /// EPT / (T - t0) from the comb sum.
  double mean_rate = 0.0;
  double mean_rate_stderr = 0.0;
  std::optional<double> rate;
  std::optional<double> rate_stderr;
  /// |rate - mean_rate| <= 3 combined stderr; absent without a rate.
  std::optional<bool> rate_matches;
};

StationarityReport stationary_rate_check(const TEEstimate& comb, double t0, double T, bool exact,
                                         std::optional<RateEstimate> rate = std::nullopt);

struct SubpartitionOptions {
  int micro_nodes = 4;
  /// Encode everything relative to X at the start of each cell.
  bool relative = true;
  /// Minimum paths per distinct joint symbol before estimation is refused.
  double min_paths_per_symbol = 2.0;
};

struct SubpartitionResult {
  double value = 0.0;
  std::vector<double> per_cell;
  int micro_nodes = 0;
};

/// Sum over cells [t_{j-1}, t_j] (closed with T) of the plug-in
/// I(X on the cell ; Y on [t_j - r, t_j] | X on [t_{j-1} - s, t_{j-1}]),
/// each segment represented by micro_nodes equally spaced samples.
SubpartitionResult subpartition_ept(std::span<const ProcessPair> ensemble,
                                    std::span<const double> partition, double T, double s, double r,
                                    const SubpartitionOptions& options = {});

/// Joint pmf on a product space: outcome tuple -> probability.
using JointPmf = std::map<std::vector<Symbol>, double>;

JointPmf marginalize(const JointPmf& p, std::span<const std::size_t> coords);
double kl_divergence(const JointPmf& p, const JointPmf& q);

/// (KL of the full pmfs, KL of their marginals on `coords`).
std::pair<double, double> kl_coarsening_check(const JointPmf& p, const JointPmf& q,
                                              std::span<const std::size_t> coords);

/// Product pmf from per-coordinate factors, by enumeration.
JointPmf product_joint(std::span<const Pmf> factors);

nlohmann::json to_json(const ConvergenceReport& report);

}  // namespace cttx
