#include "cttx/markov.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

#include "cttx/error.hpp"
#include "cttx/parallel.hpp"
#include "cttx/rng.hpp"
#include "format.hpp"

namespace cttx {

namespace {

void check_rate(double v, const char* what, double t) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ModelError(std::string(what) + " returned " + format_double(v) + " at t=" + format_double(t) +
                     "; rates must be finite and nonnegative");
  }
}

bool same_rate(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

void warn_fallback() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "cttx: warning: rates vary inside a segment between jumps; using quadrature\n";
  }
}

double midpoint_quadrature(double a, double b, double step, auto&& f) {
  const long n = std::max(1L, static_cast<long>(std::ceil((b - a) / step)));
  const double h = (b - a) / static_cast<double>(n);
  double sum = 0.0;
  for (long j = 0; j < n; ++j) sum += f(a + (static_cast<double>(j) + 0.5) * h);
  return sum * h;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

double escape_rate(const ConditionalRates& rates, RateKind which, double t, const ProcessPair& pair) {
  const State from = pair.x.eval_left(t);
  double total = 0.0;
  for (State target : rates.targets(from)) {
    if (target == from) continue;
    const double v = which == RateKind::xy ? rates.psi_xy(t, pair, target) : rates.psi_x(t, pair.x, target);
    check_rate(v, which == RateKind::xy ? "psi_xy" : "psi_x", t);
    total += v;
  }
  return total;
}

JumpTEResult girsanov_pathwise_te(const ConditionalRates& rates, const ProcessPair& pair, double t0,
                                  double T, const GirsanovOptions& options) {
  if (!(t0 < T)) throw ParameterError("girsanov: need t0 < T");
  if (t0 < pair.x.t_start() || T > pair.x.t_end()) {
    throw DomainError("girsanov: window [" + format_double(t0) + ", " + format_double(T) +
                      ") not covered by the paths");
  }
  if (!(options.fallback_step > 0.0)) throw ParameterError("girsanov: fallback_step must be positive");
  const auto& xj = pair.x.jump_times();
  const auto& yj = pair.y.jump_times();
  JumpTEResult out;

  // A jump exactly at t0 contributes nothing only if both rates agree there.
  if (std::binary_search(xj.begin(), xj.end(), t0)) {
    const State target = pair.x.eval(t0);
    const double a = rates.psi_xy(t0, pair, target);
    const double b = rates.psi_x(t0, pair.x, target);
    check_rate(a, "psi_xy", t0);
    check_rate(b, "psi_x", t0);
    if (!same_rate(a, b)) {
      throw AbsoluteContinuityError("girsanov: X jumps at t0 with psi_xy=" + format_double(a) +
                                    " != psi_x=" + format_double(b) + " (initial rates must agree)");
    }
  }

  for (auto it = std::upper_bound(xj.begin(), xj.end(), t0); it != xj.end() && *it < T; ++it) {
    const double tj = *it;
    const State target = pair.x.eval(tj);
    const double a = rates.psi_xy(tj, pair, target);
    const double b = rates.psi_x(tj, pair.x, target);
    check_rate(a, "psi_xy", tj);
    check_rate(b, "psi_x", tj);
    if (b == 0.0 && a > 0.0) {
      throw AbsoluteContinuityError("girsanov: psi_x = 0 < psi_xy at the X jump at t=" + format_double(tj));
    }
    if (a == 0.0) {
      throw ModelError("girsanov: realized X jump at t=" + format_double(tj) + " has zero joint rate");
    }
    out.jump_sum += std::log(a / b);
    ++out.n_jumps;
  }

  std::vector<double> cuts{t0};
  for (const auto* js : {&xj, &yj}) {
    for (auto it = std::upper_bound(js->begin(), js->end(), t0); it != js->end() && *it < T; ++it) {
      cuts.push_back(*it);
    }
  }
  cuts.push_back(T);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    const double a = cuts[j];
    const double b = cuts[j + 1];
    const double mid = 0.5 * (a + b);
    const double probe = a + 0.25 * (b - a);

    const double lxy = escape_rate(rates, RateKind::xy, mid, pair);
    double int_xy;
    if (same_rate(lxy, escape_rate(rates, RateKind::xy, probe, pair))) {
      int_xy = lxy * (b - a);
    } else {
      warn_fallback();
      int_xy = midpoint_quadrature(a, b, options.fallback_step,
                                   [&](double t) { return escape_rate(rates, RateKind::xy, t, pair); });
    }

    double int_x;
    if (auto exact = rates.escape_integral_x(a, b, pair.x)) {
      int_x = *exact;
    } else {
      const double lx = escape_rate(rates, RateKind::x, mid, pair);
      if (same_rate(lx, escape_rate(rates, RateKind::x, probe, pair))) {
        int_x = lx * (b - a);
      } else {
        warn_fallback();
        int_x = midpoint_quadrature(a, b, options.fallback_step,
                                    [&](double t) { return escape_rate(rates, RateKind::x, t, pair); });
      }
    }
    out.integral_term += int_x - int_xy;
  }

  out.pathwise_te = out.jump_sum + out.integral_term;
  if (!std::isfinite(out.pathwise_te)) throw NumericalError("girsanov: non-finite pathwise TE");
  return out;
}

std::vector<ProcessPair> simulate_ensemble(const JumpModel& model, double t_start, double t_end,
                                           std::size_t n_paths, std::uint64_t seed) {
  std::vector<std::optional<ProcessPair>> slots(n_paths);
  parallel_for(n_paths, [&](std::size_t j) {
    slots[j].emplace(model.simulate(t_start, t_end, stream_seed(seed, j)));
  });
  std::vector<ProcessPair> out;
  out.reserve(n_paths);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

EptResult ept_over_ensemble(const ConditionalRates& rates, std::span<const ProcessPair> ensemble,
                            double t0, double T, const GirsanovOptions& options) {
  if (ensemble.empty()) throw EstimationError("ept: empty ensemble");
  EptResult out;
  out.per_path.resize(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t j) {
    out.per_path[j] = girsanov_pathwise_te(rates, ensemble[j], t0, T, options).pathwise_te;
  });
  out.estimate.value = mean_of(out.per_path);
  out.estimate.stderr = stderr_of(out.per_path, out.estimate.value);
  out.estimate.n_paths = ensemble.size();
  return out;
}

EptResult ept_monte_carlo(const JumpModel& model, double t0, double T, std::size_t n_paths,
                          std::uint64_t seed, const GirsanovOptions& options) {
  if (n_paths == 0) throw EstimationError("ept_monte_carlo: n_paths must be positive");
  if (!(t0 < T)) throw ParameterError("ept_monte_carlo: need t0 < T");
  const double start = t0 - model.warmup();
  EptResult out;
  out.per_path.resize(n_paths);
  parallel_for(n_paths, [&](std::size_t j) {
    const ProcessPair pair = model.simulate(start, T, stream_seed(seed, j));
    out.per_path[j] = girsanov_pathwise_te(model.rates(), pair, t0, T, options).pathwise_te;
  });
  out.estimate.value = mean_of(out.per_path);
  out.estimate.stderr = stderr_of(out.per_path, out.estimate.value);
  out.estimate.n_paths = n_paths;
  return out;
}

RateEstimate poisson_dest_te_rate(const JumpModel& model, double t, std::size_t n_paths,
                                  std::uint64_t seed) {
  if (!model.counting()) throw ModelError("poisson_dest_te_rate: destination must be a counting process");
  if (n_paths == 0) throw EstimationError("poisson_dest_te_rate: n_paths must be positive");
  const double start = t - model.warmup();
  std::vector<double> values(n_paths);
  parallel_for(n_paths, [&](std::size_t j) {
    // Paths must cover t itself; anything after t is never read.
    const ProcessPair pair = model.simulate(start, t + 1.0, stream_seed(seed, j));
    const double lxy = escape_rate(model.rates(), RateKind::xy, t, pair);
    const double lx = escape_rate(model.rates(), RateKind::x, t, pair);
    if (lxy > 0.0 && lx == 0.0) {
      throw AbsoluteContinuityError("poisson_dest_te_rate: lambda_x = 0 < lambda_xy at t=" + format_double(t));
    }
    values[j] = (lxy > 0.0 ? lxy * (std::log(lxy / lx) - 1.0) : 0.0) + lx;
  });
  RateEstimate out;
  out.value = mean_of(values);
  out.stderr = stderr_of(values, out.value);
  out.n_paths = n_paths;
  return out;
}

std::vector<double> quantiles(std::vector<double> values, std::span<const double> probs) {
  if (values.empty()) throw EstimationError("quantiles: empty sample");
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("quantiles: probability outside [0, 1]");
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    out.push_back(values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]));
  }
  return out;
}

}  // namespace cttx
