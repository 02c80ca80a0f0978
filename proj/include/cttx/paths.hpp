#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cttx/rng.hpp"

namespace cttx {

using State = std::int64_t;

/// Right-continuous piecewise-constant trajectory on [t_start, t_end).
///
/// states[0] holds on [t_start, jump_times[0]); states[j + 1] holds from
/// jump_times[j] up to the next jump. Jump times are strictly increasing and
/// interior to the window, and every listed jump changes the state.
class SamplePath {
 public:
  SamplePath(double t_start, double t_end, std::vector<double> jump_times,
             std::vector<State> states);

  static SamplePath constant(double t_start, double t_end, State value);

  /// Builds a path from values observed at t_start + j*dt, j = 0..n-1. The
  /// value changes exactly at the sample times; repeated values collapse.
  static SamplePath from_samples(double t_start, double dt, std::span<const State> values,
                                 double t_end);

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  const std::vector<double>& jump_times() const { return jump_times_; }
  const std::vector<State>& states() const { return states_; }
  std::size_t jump_count() const { return jump_times_.size(); }

  /// Value at t (post-jump value at a jump time).
  State eval(double t) const;
  /// Left limit at t (pre-jump value at a jump time).
  State eval_left(double t) const;

  /// Number of jumps with time in (a, b].
  std::size_t jumps_in(double a, double b) const;

  bool operator==(const SamplePath&) const = default;

 private:
  void check_domain(double t) const;

  double t_start_;
  double t_end_;
  std::vector<double> jump_times_;
  std::vector<State> states_;
};

/// Element-wise eval over a sorted list of times.
std::vector<State> sample_on_grid(const SamplePath& path, std::span<const double> times);

/// Homogeneous Poisson intensity together with the lag used for its lagged copy.
struct PoissonSpec {
  double lambda = 1.0;
  double epsilon = 1.0;
};

struct CtmcSpec {
  std::size_t n_states = 1;
  /// n x n; off-diagonal entries are jump rates, the diagonal is ignored.
  std::vector<std::vector<double>> rate_matrix;
  State init_state = 0;

  void validate() const;
  double exit_rate(State i) const;
};

/// A destination/source pair sharing one time window.
struct ProcessPair {
  ProcessPair(SamplePath x_path, SamplePath y_path);

  SamplePath x;
  SamplePath y;
};

/// Counting path of a THPPP starting at 0 at t_start.
SamplePath simulate_thppp(const PoissonSpec& spec, double t_start, double t_end,
                          std::uint64_t seed);
SamplePath simulate_thppp(double lambda, double t_start, double t_end, Rng& rng);

/// y(t) = x(t + epsilon) on [t_start - epsilon, t_end - epsilon).
SamplePath lag_path(const SamplePath& x, double epsilon);

/// Gillespie simulation of a time-homogeneous Markov jump process.
SamplePath simulate_ctmc(const CtmcSpec& spec, double t_start, double t_end, std::uint64_t seed);
SamplePath simulate_ctmc(const CtmcSpec& spec, double t_start, double t_end, Rng& rng);

/// Restricts a path to a sub-window [t_start, t_end) of its own window.
SamplePath restrict_path(const SamplePath& path, double t_start, double t_end);

nlohmann::json to_json(const SamplePath& path);
SamplePath path_from_json(const nlohmann::json& j);

/// `time,state` event list: header, one row for the initial state at t_start,
/// one row per jump.
std::string to_csv(const SamplePath& path);
SamplePath path_from_csv(std::string_view text, double t_end);

}  // namespace cttx
