#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cttx/dte.hpp"
#include "cttx/paths.hpp"

namespace cttx {

/// Conditional transition rates of the destination X. Rates at time t are
/// predictable: they may depend on the paths strictly before t only, so
/// implementations read eval_left(t) and jumps < t. Rates are expected to be
/// constant between jumps of (X, Y); this is checked on every segment and a
/// quadrature fallback is used where it fails.
class ConditionalRates {
 public:
  virtual ~ConditionalRates() = default;

  /// States X may jump to from `from`.
  virtual std::vector<State> targets(State from) const = 0;
  /// psi[x' | X history, Y history](t).
  virtual double psi_xy(double t, const ProcessPair& pair, State target) const = 0;
  /// psi[x' | X history](t).
  virtual double psi_x(double t, const SamplePath& x, State target) const = 0;

  /// Exact integral of the X-only escape rate over [a, b], for models whose
  /// psi_x varies between jumps. Only called when X has no jump in (a, b).
  virtual std::optional<double> escape_integral_x(double a, double b, const SamplePath& x) const {
    (void)a, (void)b, (void)x;
    return std::nullopt;
  }
};

enum class RateKind { xy, x };

/// Sum over x' != X(t-) of the requested psi.
double escape_rate(const ConditionalRates& rates, RateKind which, double t, const ProcessPair& pair);

struct JumpTEResult {
  double pathwise_te = 0.0;
  double jump_sum = 0.0;
  double integral_term = 0.0;
  long n_jumps = 0;
};

struct GirsanovOptions {
  /// Quadrature step for segments whose rates turn out not to be constant.
  double fallback_step = 1e-4;
};

/// Pathwise TE over [t0, T): sum over X jumps in (t0, T) of ln(psi_xy / psi_x)
/// plus the integral of (lambda_x - lambda_xy) over [t0, T).
JumpTEResult girsanov_pathwise_te(const ConditionalRates& rates, const ProcessPair& pair, double t0,
                                  double T, const GirsanovOptions& options = {});

/// A generative (X, Y) model together with its true conditional rates.
class JumpModel {
 public:
  virtual ~JumpModel() = default;
  virtual std::string name() const = 0;
  /// One pair on [t_start, t_end).
  virtual ProcessPair simulate(double t_start, double t_end, std::uint64_t seed) const = 0;
  virtual const ConditionalRates& rates() const = 0;
  /// How far before t0 paths start when the model is used on [t0, T).
  virtual double warmup() const { return 0.0; }
  /// True if X is a counting process (single +1 transition channel).
  virtual bool counting() const { return false; }
};

struct EptResult {
  TEEstimate estimate;
  std::vector<double> per_path;
};

/// Pair j is simulated on [t_start, t_end) from stream_seed(seed, j).
std::vector<ProcessPair> simulate_ensemble(const JumpModel& model, double t_start, double t_end,
                                           std::size_t n_paths, std::uint64_t seed);

/// Mean and standard error of the pathwise TE over n_paths simulated pairs.
EptResult ept_monte_carlo(const JumpModel& model, double t0, double T, std::size_t n_paths,
                          std::uint64_t seed, const GirsanovOptions& options = {});

/// Same over a given ensemble.
EptResult ept_over_ensemble(const ConditionalRates& rates, std::span<const ProcessPair> ensemble,
                            double t0, double T, const GirsanovOptions& options = {});

struct RateEstimate {
  double value = 0.0;
  double stderr = 0.0;
  std::size_t n_paths = 0;
};

/// Monte Carlo mean of lambda_xy (ln(lambda_xy / lambda_x) - 1) + lambda_x at
/// time t, for counting destinations.
RateEstimate poisson_dest_te_rate(const JumpModel& model, double t, std::size_t n_paths,
                                  std::uint64_t seed);

/// Quantiles (linear interpolation) of a sample.
std::vector<double> quantiles(std::vector<double> values, std::span<const double> probs);

}  // namespace cttx
