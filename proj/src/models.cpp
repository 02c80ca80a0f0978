#include "cttx/models.hpp"

#include <cmath>
#include <set>

#include "cttx/error.hpp"
#include "cttx/rng.hpp"
#include "format.hpp"

namespace cttx {

namespace {

// 2x2 matrix acting on column vectors.
struct Mat2 {
  double a, b, c, d;  // [[a, b], [c, d]]
};

// e^{Ah} v = exp(log_scale) * w, computed without overflow from the
// eigen-decomposition m +- delta (real for matrices with nonnegative
// off-diagonal entries).
struct Scaled {
  std::array<double, 2> w;
  double log_scale;
};

Scaled expm_apply(const Mat2& A, double h, const std::array<double, 2>& v) {
  const double m = 0.5 * (A.a + A.d);
  const double disc = 0.25 * (A.a - A.d) * (A.a - A.d) + A.b * A.c;
  const double delta = std::sqrt(std::max(0.0, disc));
  const double x = delta * h;
  const double e2 = std::exp(-2.0 * x);
  const double ch = 0.5 * (1.0 + e2);
  // sinh(x) / delta scaled by e^{-x}; tends to h as delta -> 0
  const double sh = x < 1e-8 ? h * 0.5 * (1.0 + e2) : 0.5 * (1.0 - e2) / delta;
  const std::array<double, 2> u{(A.a - m) * v[0] + A.b * v[1], A.c * v[0] + (A.d - m) * v[1]};
  return Scaled{{ch * v[0] + sh * u[0], ch * v[1] + sh * u[1]}, (m + delta) * h};
}

std::array<double, 2> normalize(std::array<double, 2> v) {
  const double s = v[0] + v[1];
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("filter: posterior lost all mass");
  return {v[0] / s, v[1] / s};
}

int y_state(State y) {
  if (y != 0 && y != 1) throw ModelError("two-state source must take values 0 or 1, got " + std::to_string(y));
  return static_cast<int>(y);
}

void check_binary(State x) {
  if (x != 0 && x != 1) throw ModelError("two-state destination must take values 0 or 1, got " + std::to_string(x));
}

void require_positive(double v, const char* name) {
  if (!std::isfinite(v) || !(v > 0.0)) throw ParameterError(std::string(name) + " must be finite and positive");
}

void require_nonneg(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) throw ParameterError(std::string(name) + " must be finite and nonnegative");
}

SamplePath poisson_on_segments(const SamplePath& y, const std::array<double, 2>& lambda, Rng& rng) {
  std::vector<double> times;
  std::vector<State> states{0};
  const auto& yj = y.jump_times();
  const auto& ys = y.states();
  for (std::size_t seg = 0; seg < ys.size(); ++seg) {
    const double a = seg == 0 ? y.t_start() : yj[seg - 1];
    const double b = seg + 1 < ys.size() ? yj[seg] : y.t_end();
    const double rate = lambda[static_cast<std::size_t>(y_state(ys[seg]))];
    if (rate == 0.0) continue;
    for (double t = a + rng.exponential(rate); t < b; t += rng.exponential(rate)) {
      times.push_back(t);
      states.push_back(states.back() + 1);
    }
  }
  return SamplePath(y.t_start(), y.t_end(), std::move(times), std::move(states));
}

}  // namespace

// ---- hidden two-state filter ----

double HiddenTwoStateRates::escape(State x, int y) const {
  double total = 0.0;
  for (State to : targets(x)) {
    if (to != x) total += x_rate(x, to, y);
  }
  return total;
}

std::array<double, 2> HiddenTwoStateRates::filter(const SamplePath& x, double t,
                                                  bool include_jump_at_t) const {
  const auto& jumps = x.jump_times();
  const auto& states = x.states();
  std::array<double, 2> pi = prior(states[0]);
  double now = x.t_start();
  auto drift = [&](State xs) {
    const auto q = y_rates(xs);
    return Mat2{-q[0] - escape(xs, 0), q[1], q[0], -q[1] - escape(xs, 1)};
  };
  for (std::size_t j = 0; j < jumps.size(); ++j) {
    const double tj = jumps[j];
    if (tj > t || (tj == t && !include_jump_at_t)) break;
    pi = normalize(expm_apply(drift(states[j]), tj - now, pi).w);
    pi = normalize({pi[0] * x_rate(states[j], states[j + 1], 0), pi[1] * x_rate(states[j], states[j + 1], 1)});
    now = tj;
  }
  if (t > now) pi = normalize(expm_apply(drift(x.eval_left(t)), t - now, pi).w);
  return pi;
}

double HiddenTwoStateRates::psi_xy(double t, const ProcessPair& pair, State target) const {
  const State from = pair.x.eval_left(t);
  return x_rate(from, target, y_state(pair.y.eval_left(t)));
}

double HiddenTwoStateRates::psi_x(double t, const SamplePath& x, State target) const {
  const State from = x.eval_left(t);
  const auto pi = mode_ == XHistory::full ? filter(x, t, false) : prior(from);
  return pi[0] * x_rate(from, target, 0) + pi[1] * x_rate(from, target, 1);
}

std::optional<double> HiddenTwoStateRates::escape_integral_x(double a, double b, const SamplePath& x) const {
  if (mode_ == XHistory::none) return std::nullopt;
  const auto pi = filter(x, a, true);
  const State xs = x.eval(a);
  const auto q = y_rates(xs);
  const Mat2 A{-q[0] - escape(xs, 0), q[1], q[0], -q[1] - escape(xs, 1)};
  const Scaled s = expm_apply(A, b - a, pi);
  return -(s.log_scale + std::log(s.w[0] + s.w[1]));
}

// ---- independent Poisson ----

IndependentPoissonModel::IndependentPoissonModel(Params p) : p_(p) {
  require_positive(p_.lambda_x, "lambda_x");
  require_positive(p_.lambda_y, "lambda_y");
}

ProcessPair IndependentPoissonModel::simulate(double t_start, double t_end, std::uint64_t seed) const {
  Rng rng(seed);
  SamplePath x = simulate_thppp(p_.lambda_x, t_start, t_end, rng);
  SamplePath y = simulate_thppp(p_.lambda_y, t_start, t_end, rng);
  return ProcessPair(std::move(x), std::move(y));
}

double IndependentPoissonModel::psi_xy(double t, const ProcessPair& pair, State target) const {
  return target == pair.x.eval_left(t) + 1 ? p_.lambda_x : 0.0;
}

double IndependentPoissonModel::psi_x(double t, const SamplePath& x, State target) const {
  return target == x.eval_left(t) + 1 ? p_.lambda_x : 0.0;
}

// ---- modulated Poisson ----

ModulatedPoissonModel::ModulatedPoissonModel(Params p) : HiddenTwoStateRates(p.x_history), p_(p) {
  require_nonneg(p_.lambda0, "lambda0");
  require_nonneg(p_.lambda1, "lambda1");
  require_positive(p_.y_rate01, "y_rate01");
  require_positive(p_.y_rate10, "y_rate10");
  require_nonneg(p_.warmup, "warmup");
  if (p_.lambda0 == 0.0 && p_.lambda1 == 0.0) throw ParameterError("modulated-poisson: both intensities are zero");
}

std::array<double, 2> ModulatedPoissonModel::stationary() const {
  const double s = p_.y_rate01 + p_.y_rate10;
  return {p_.y_rate10 / s, p_.y_rate01 / s};
}

double ModulatedPoissonModel::stationary_te_rate_none() const {
  const auto pi = stationary();
  const double bar = pi[0] * p_.lambda0 + pi[1] * p_.lambda1;
  double rate = 0.0;
  for (int y = 0; y < 2; ++y) {
    const double l = y == 0 ? p_.lambda0 : p_.lambda1;
    rate += pi[static_cast<std::size_t>(y)] * ((l > 0.0 ? l * (std::log(l / bar) - 1.0) : 0.0) + bar);
  }
  return rate;
}

ProcessPair ModulatedPoissonModel::simulate(double t_start, double t_end, std::uint64_t seed) const {
  Rng rng(seed);
  const auto pi = stationary();
  CtmcSpec spec;
  spec.n_states = 2;
  spec.rate_matrix = {{0.0, p_.y_rate01}, {p_.y_rate10, 0.0}};
  spec.init_state = rng.uniform() < pi[1] ? 1 : 0;
  SamplePath y = simulate_ctmc(spec, t_start, t_end, rng);
  SamplePath x = poisson_on_segments(y, {p_.lambda0, p_.lambda1}, rng);
  return ProcessPair(std::move(x), std::move(y));
}

double ModulatedPoissonModel::x_rate(State from, State to, int y) const {
  if (to != from + 1) return 0.0;
  return y == 0 ? p_.lambda0 : p_.lambda1;
}

std::array<double, 2> ModulatedPoissonModel::y_rates(State) const { return {p_.y_rate01, p_.y_rate10}; }

std::array<double, 2> ModulatedPoissonModel::prior(State) const { return stationary(); }

// ---- two-state feedback ----

TwoStateFeedbackModel::TwoStateFeedbackModel(Params p) : HiddenTwoStateRates(p.x_history), p_(p) {
  for (int j = 0; j < 2; ++j) {
    require_positive(p_.x_up[static_cast<std::size_t>(j)], "x_up");
    require_positive(p_.x_down[static_cast<std::size_t>(j)], "x_down");
    require_positive(p_.y_up[static_cast<std::size_t>(j)], "y_up");
    require_positive(p_.y_down[static_cast<std::size_t>(j)], "y_down");
  }
  require_nonneg(p_.warmup, "warmup");
  // Solve pi Q = 0, sum pi = 1 by Gaussian elimination on Q^T with the last
  // row replaced by the normalization.
  const CtmcSpec spec = joint_spec(0);
  double M[4][5] = {};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i != j) {
        M[j][i] += spec.rate_matrix[i][j];
        M[i][i] -= spec.rate_matrix[i][j];
      }
    }
  }
  for (int j = 0; j < 5; ++j) M[3][j] = 1.0;
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
    }
    for (int j = 0; j < 5; ++j) std::swap(M[col][j], M[piv][j]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = M[r][col] / M[col][col];
      for (int j = col; j < 5; ++j) M[r][j] -= f * M[col][j];
    }
  }
  for (int i = 0; i < 4; ++i) joint_pi_[static_cast<std::size_t>(i)] = M[i][4] / M[i][i];
}

CtmcSpec TwoStateFeedbackModel::joint_spec(State init) const {
  CtmcSpec spec;
  spec.n_states = 4;
  spec.rate_matrix.assign(4, std::vector<double>(4, 0.0));
  for (std::size_t x = 0; x < 2; ++x) {
    for (std::size_t y = 0; y < 2; ++y) {
      const std::size_t s = 2 * x + y;
      spec.rate_matrix[s][2 * (1 - x) + y] = x == 0 ? p_.x_up[y] : p_.x_down[y];
      spec.rate_matrix[s][2 * x + (1 - y)] = y == 0 ? p_.y_up[x] : p_.y_down[x];
    }
  }
  spec.init_state = init;
  return spec;
}

ProcessPair TwoStateFeedbackModel::simulate(double t_start, double t_end, std::uint64_t seed) const {
  Rng rng(seed);
  const auto init = static_cast<State>(rng.choose(joint_pi_, 1.0));
  const SamplePath joint = simulate_ctmc(joint_spec(init), t_start, t_end, rng);
  std::vector<double> xt, yt;
  std::vector<State> xs{joint.states()[0] / 2}, ys{joint.states()[0] % 2};
  for (std::size_t j = 0; j < joint.jump_count(); ++j) {
    const State s = joint.states()[j + 1];
    if (s / 2 != xs.back()) {
      xt.push_back(joint.jump_times()[j]);
      xs.push_back(s / 2);
    } else {
      yt.push_back(joint.jump_times()[j]);
      ys.push_back(s % 2);
    }
  }
  return ProcessPair(SamplePath(t_start, t_end, std::move(xt), std::move(xs)),
                     SamplePath(t_start, t_end, std::move(yt), std::move(ys)));
}

std::vector<State> TwoStateFeedbackModel::targets(State from) const {
  check_binary(from);
  return {1 - from};
}

double TwoStateFeedbackModel::x_rate(State from, State to, int y) const {
  check_binary(from);
  if (to != 1 - from) return 0.0;
  const auto yi = static_cast<std::size_t>(y);
  return from == 0 ? p_.x_up[yi] : p_.x_down[yi];
}

std::array<double, 2> TwoStateFeedbackModel::y_rates(State x) const {
  check_binary(x);
  const auto xi = static_cast<std::size_t>(x);
  return {p_.y_up[xi], p_.y_down[xi]};
}

std::array<double, 2> TwoStateFeedbackModel::prior(State x0) const {
  check_binary(x0);
  const auto xi = static_cast<std::size_t>(x0);
  const double a = joint_pi_[2 * xi];
  const double b = joint_pi_[2 * xi + 1];
  return {a / (a + b), b / (a + b)};
}

// ---- registry ----

namespace {

void reject_unknown(const nlohmann::json& params, std::initializer_list<const char*> known,
                    const std::string& model) {
  if (params.is_null()) return;
  if (!params.is_object()) throw ConfigError("model params for '" + model + "' must be an object");
  std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, _] : params.items()) {
    if (!names.count(key)) throw ConfigError("unknown parameter '" + key + "' for model '" + model + "'");
  }
}

template <typename T>
T get_or(const nlohmann::json& params, const char* key, T fallback) {
  if (params.is_null() || !params.contains(key)) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("model parameter '") + key + "' has the wrong type");
  }
}

XHistory parse_x_history(const nlohmann::json& params) {
  const auto v = get_or<std::string>(params, "x_history", "full");
  if (v == "none") return XHistory::none;
  if (v == "full") return XHistory::full;
  throw ConfigError("x_history must be 'none' or 'full'");
}

}  // namespace

std::unique_ptr<JumpModel> make_jump_model(const std::string& name, const nlohmann::json& params) {
  if (name == "independent-poisson") {
    reject_unknown(params, {"lambda_x", "lambda_y"}, name);
    IndependentPoissonModel::Params p;
    p.lambda_x = get_or(params, "lambda_x", p.lambda_x);
    p.lambda_y = get_or(params, "lambda_y", p.lambda_y);
    return std::make_unique<IndependentPoissonModel>(p);
  }
  if (name == "modulated-poisson") {
    reject_unknown(params, {"lambda0", "lambda1", "y_rate01", "y_rate10", "x_history", "warmup"}, name);
    ModulatedPoissonModel::Params p;
    p.lambda0 = get_or(params, "lambda0", p.lambda0);
    p.lambda1 = get_or(params, "lambda1", p.lambda1);
    p.y_rate01 = get_or(params, "y_rate01", p.y_rate01);
    p.y_rate10 = get_or(params, "y_rate10", p.y_rate10);
    p.x_history = parse_x_history(params);
    p.warmup = get_or(params, "warmup", p.warmup);
    return std::make_unique<ModulatedPoissonModel>(p);
  }
  if (name == "two-state-feedback") {
    reject_unknown(params, {"x_up", "x_down", "y_up", "y_down", "x_history", "warmup"}, name);
    TwoStateFeedbackModel::Params p;
    p.x_up = get_or(params, "x_up", p.x_up);
    p.x_down = get_or(params, "x_down", p.x_down);
    p.y_up = get_or(params, "y_up", p.y_up);
    p.y_down = get_or(params, "y_down", p.y_down);
    p.x_history = parse_x_history(params);
    p.warmup = get_or(params, "warmup", p.warmup);
    return std::make_unique<TwoStateFeedbackModel>(p);
  }
  throw ConfigError("unknown model '" + name + "' (known: independent-poisson, modulated-poisson, two-state-feedback)");
}

std::vector<std::string> jump_model_names() {
  return {"independent-poisson", "modulated-poisson", "two-state-feedback"};
}

}  // namespace cttx
