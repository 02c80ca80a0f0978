#include "cttx/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cttx/error.hpp"
#include "format.hpp"

namespace cttx {

SamplePath::SamplePath(double t_start, double t_end, std::vector<double> jump_times,
                       std::vector<State> states)
    : t_start_(t_start),
      t_end_(t_end),
      jump_times_(std::move(jump_times)),
      states_(std::move(states)) {
  if (!std::isfinite(t_start_) || !std::isfinite(t_end_) || !(t_start_ < t_end_)) {
    throw ContractError("SamplePath: window must satisfy t_start < t_end");
  }
  if (states_.size() != jump_times_.size() + 1) {
    throw ContractError("SamplePath: need exactly one more state than jump times");
  }
  for (std::size_t j = 0; j < jump_times_.size(); ++j) {
    const double t = jump_times_[j];
    if (!(t > t_start_ && t < t_end_)) {
      throw ContractError("SamplePath: jump time outside (t_start, t_end)");
    }
    if (j > 0 && !(t > jump_times_[j - 1])) {
      throw ContractError("SamplePath: jump times must be strictly increasing");
    }
    if (states_[j + 1] == states_[j]) {
      throw ContractError("SamplePath: listed jump does not change the state");
    }
  }
}

SamplePath SamplePath::constant(double t_start, double t_end, State value) {
  return SamplePath(t_start, t_end, {}, {value});
}

SamplePath SamplePath::from_samples(double t_start, double dt, std::span<const State> values,
                                    double t_end) {
  if (values.empty()) throw ContractError("from_samples: need at least one value");
  std::vector<double> jumps;
  std::vector<State> states{values[0]};
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] == states.back()) continue;
    jumps.push_back(t_start + static_cast<double>(j) * dt);
    states.push_back(values[j]);
  }
  return SamplePath(t_start, t_end, std::move(jumps), std::move(states));
}

void SamplePath::check_domain(double t) const {
  if (!(t >= t_start_ && t < t_end_)) {
    throw DomainError("SamplePath: time " + format_double(t) + " outside [" +
                      format_double(t_start_) + ", " + format_double(t_end_) + ")");
  }
}

State SamplePath::eval(double t) const {
  check_domain(t);
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  return states_[static_cast<std::size_t>(it - jump_times_.begin())];
}

State SamplePath::eval_left(double t) const {
  check_domain(t);
  const auto it = std::lower_bound(jump_times_.begin(), jump_times_.end(), t);
  return states_[static_cast<std::size_t>(it - jump_times_.begin())];
}

std::size_t SamplePath::jumps_in(double a, double b) const {
  if (!(b > a)) return 0;
  const auto lo = std::upper_bound(jump_times_.begin(), jump_times_.end(), a);
  const auto hi = std::upper_bound(jump_times_.begin(), jump_times_.end(), b);
  return static_cast<std::size_t>(hi - lo);
}

std::vector<State> sample_on_grid(const SamplePath& path, std::span<const double> times) {
  std::vector<State> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(path.eval(t));
  return out;
}

void CtmcSpec::validate() const {
  if (n_states == 0) throw ParameterError("CtmcSpec: n_states must be positive");
  if (rate_matrix.size() != n_states) {
    throw ParameterError("CtmcSpec: rate matrix must have n_states rows");
  }
  for (std::size_t i = 0; i < n_states; ++i) {
    if (rate_matrix[i].size() != n_states) {
      throw ParameterError("CtmcSpec: rate matrix must be square");
    }
    for (std::size_t j = 0; j < n_states; ++j) {
      if (i == j) continue;
      const double q = rate_matrix[i][j];
      if (!std::isfinite(q) || q < 0.0) {
        throw ParameterError("CtmcSpec: off-diagonal rates must be finite and nonnegative");
      }
    }
  }
  if (init_state < 0 || static_cast<std::size_t>(init_state) >= n_states) {
    throw ParameterError("CtmcSpec: init_state out of range");
  }
}

double CtmcSpec::exit_rate(State i) const {
  double total = 0.0;
  const auto row = static_cast<std::size_t>(i);
  for (std::size_t j = 0; j < n_states; ++j) {
    if (j != row) total += rate_matrix[row][j];
  }
  return total;
}

ProcessPair::ProcessPair(SamplePath x_path, SamplePath y_path)
    : x(std::move(x_path)), y(std::move(y_path)) {}

SamplePath simulate_thppp(double lambda, double t_start, double t_end, Rng& rng) {
  if (!std::isfinite(lambda) || !(lambda > 0.0)) {
    throw ParameterError("THPPP intensity must be finite and positive");
  }
  if (!(t_start < t_end)) throw ParameterError("THPPP window must satisfy t_start < t_end");
  std::vector<double> jumps;
  std::vector<State> states{0};
  double t = t_start;
  for (;;) {
    t += rng.exponential(lambda);
    if (!(t < t_end)) break;
    // A zero-length gap would not be a jump of a right-continuous path.
    if (!jumps.empty() && !(t > jumps.back())) continue;
    if (!(t > t_start)) continue;
    jumps.push_back(t);
    states.push_back(states.back() + 1);
  }
  return SamplePath(t_start, t_end, std::move(jumps), std::move(states));
}

SamplePath simulate_thppp(const PoissonSpec& spec, double t_start, double t_end,
                          std::uint64_t seed) {
  if (!std::isfinite(spec.epsilon) || !(spec.epsilon > 0.0)) {
    throw ParameterError("PoissonSpec: lag epsilon must be positive");
  }
  Rng rng(seed);
  return simulate_thppp(spec.lambda, t_start, t_end, rng);
}

SamplePath lag_path(const SamplePath& x, double epsilon) {
  if (!std::isfinite(epsilon) || !(epsilon > 0.0)) {
    throw ParameterError("lag_path: epsilon must be strictly positive");
  }
  std::vector<double> jumps;
  jumps.reserve(x.jump_count());
  for (double t : x.jump_times()) jumps.push_back(t - epsilon);
  return SamplePath(x.t_start() - epsilon, x.t_end() - epsilon, std::move(jumps), x.states());
}

SamplePath simulate_ctmc(const CtmcSpec& spec, double t_start, double t_end, Rng& rng) {
  spec.validate();
  if (!(t_start < t_end)) throw ParameterError("CTMC window must satisfy t_start < t_end");
  std::vector<double> jumps;
  std::vector<State> states{spec.init_state};
  std::vector<double> weights(spec.n_states);
  double t = t_start;
  for (;;) {
    const State cur = states.back();
    const double exit = spec.exit_rate(cur);
    if (exit <= 0.0) break;  // absorbing
    t += rng.exponential(exit);
    if (!(t < t_end)) break;
    for (std::size_t j = 0; j < spec.n_states; ++j) {
      weights[j] = (static_cast<State>(j) == cur) ? 0.0 : spec.rate_matrix[cur][j];
    }
    const auto next = static_cast<State>(rng.choose(weights, exit));
    if (!(t > t_start) || (!jumps.empty() && !(t > jumps.back()))) continue;
    jumps.push_back(t);
    states.push_back(next);
  }
  return SamplePath(t_start, t_end, std::move(jumps), std::move(states));
}

SamplePath simulate_ctmc(const CtmcSpec& spec, double t_start, double t_end, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_ctmc(spec, t_start, t_end, rng);
}

SamplePath restrict_path(const SamplePath& path, double t_start, double t_end) {
  if (!(t_start >= path.t_start() && t_end <= path.t_end() && t_start < t_end)) {
    throw DomainError("restrict_path: sub-window outside the path window");
  }
  std::vector<double> jumps;
  std::vector<State> states{path.eval(t_start)};
  for (std::size_t j = 0; j < path.jump_count(); ++j) {
    const double t = path.jump_times()[j];
    if (t > t_start && t < t_end) {
      jumps.push_back(t);
      states.push_back(path.states()[j + 1]);
    }
  }
  return SamplePath(t_start, t_end, std::move(jumps), std::move(states));
}

nlohmann::json to_json(const SamplePath& path) {
  return nlohmann::json{{"t_start", path.t_start()},
                        {"t_end", path.t_end()},
                        {"jump_times", path.jump_times()},
                        {"states", path.states()}};
}

SamplePath path_from_json(const nlohmann::json& j) {
  try {
    return SamplePath(j.at("t_start").get<double>(), j.at("t_end").get<double>(),
                      j.at("jump_times").get<std::vector<double>>(),
                      j.at("states").get<std::vector<State>>());
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("path JSON: ") + e.what());
  }
}

std::string to_csv(const SamplePath& path) {
  std::string out = "time,state\n";
  out += format_double(path.t_start()) + "," + std::to_string(path.states()[0]) + "\n";
  for (std::size_t j = 0; j < path.jump_count(); ++j) {
    out += format_double(path.jump_times()[j]) + "," + std::to_string(path.states()[j + 1]) + "\n";
  }
  return out;
}

SamplePath path_from_csv(std::string_view text, double t_end) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("time,state", 0) != 0) {
    throw ContractError("path CSV: missing `time,state` header");
  }
  std::vector<double> times;
  std::vector<State> states;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ContractError("path CSV: malformed row: " + line);
    try {
      times.push_back(std::stod(line.substr(0, comma)));
      states.push_back(std::stoll(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ContractError("path CSV: malformed row: " + line);
    }
  }
  if (times.empty()) throw ContractError("path CSV: no initial-state row");
  const double t_start = times.front();
  times.erase(times.begin());
  return SamplePath(t_start, t_end, std::move(times), std::move(states));
}

}  // namespace cttx
