#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "cttx/error.hpp"
#include "cttx/markov.hpp"
#include "cttx/models.hpp"

using namespace cttx;

namespace {

// Counting destination with rates given as plain functions of time and Y.
class TableRates : public ConditionalRates {
 public:
  std::function<double(double, State)> xy;  // (t, Y(t-))
  std::function<double(double)> x;
  std::vector<State> targets(State from) const override { return {from + 1}; }
  double psi_xy(double t, const ProcessPair& pair, State target) const override {
    return target == pair.x.eval_left(t) + 1 ? xy(t, pair.y.eval_left(t)) : 0.0;
  }
  double psi_x(double t, const SamplePath& path, State target) const override {
    return target == path.eval_left(t) + 1 ? x(t) : 0.0;
  }
};

class BinaryRates : public ConditionalRates {
 public:
  std::vector<State> targets(State from) const override { return {1 - from}; }
  double psi_xy(double t, const ProcessPair& pair, State target) const override {
    return target == 1 - pair.x.eval_left(t) ? 3.0 : 0.0;
  }
  double psi_x(double t, const SamplePath& x, State target) const override {
    return target == 1 - x.eval_left(t) ? 3.0 : 0.0;
  }
};

ProcessPair no_jumps() { return ProcessPair(SamplePath::constant(0.0, 1.0, 0), SamplePath::constant(0.0, 1.0, 0)); }

}  // namespace

TEST(EscapeRate, PoissonDestination) {
  IndependentPoissonModel m({2.5, 1.0});
  const ProcessPair pair = m.simulate(0.0, 5.0, 3);
  for (double t : {0.1, 1.7, 4.9}) {
    EXPECT_EQ(escape_rate(m.rates(), RateKind::xy, t, pair), 2.5);
    EXPECT_EQ(escape_rate(m.rates(), RateKind::x, t, pair), 2.5);
  }
}

TEST(EscapeRate, TwoStateChain) {
  BinaryRates r;
  EXPECT_EQ(escape_rate(r, RateKind::xy, 0.3, no_jumps()), 3.0);
}

TEST(EscapeRate, ModulatedFlipsWithY) {
  ModulatedPoissonModel::Params p;
  p.x_history = XHistory::none;
  ModulatedPoissonModel m(p);
  const ProcessPair pair(SamplePath::constant(0.0, 3.0, 0), SamplePath(0.0, 3.0, {1.0, 2.0}, {0, 1, 0}));
  EXPECT_EQ(escape_rate(m.rates(), RateKind::xy, 0.5, pair), 1.0);
  EXPECT_EQ(escape_rate(m.rates(), RateKind::xy, 1.0, pair), 1.0);  // left limit at Y's jump
  EXPECT_EQ(escape_rate(m.rates(), RateKind::xy, 1.5, pair), 4.0);
  EXPECT_EQ(escape_rate(m.rates(), RateKind::xy, 2.5, pair), 1.0);
  EXPECT_EQ(escape_rate(m.rates(), RateKind::x, 1.5, pair), 2.5);
}

TEST(EscapeRate, NegativeRateIsModelError) {
  TableRates r;
  r.xy = [](double, State) { return -1.0; };
  r.x = [](double) { return 1.0; };
  EXPECT_THROW(escape_rate(r, RateKind::xy, 0.5, no_jumps()), ModelError);
}

TEST(Girsanov, IdenticalRatesGiveZero) {
  for (int seed = 0; seed < 100; ++seed) {
    IndependentPoissonModel m({3.0, 2.0});
    const auto res = girsanov_pathwise_te(m.rates(), m.simulate(0.0, 2.0, seed), 0.0, 2.0);
    EXPECT_EQ(res.pathwise_te, 0.0);
  }
}

TEST(Girsanov, NoJumpsConstantRates) {
  TableRates r;
  r.xy = [](double, State) { return 1.0; };
  r.x = [](double) { return 2.0; };
  const auto res = girsanov_pathwise_te(r, no_jumps(), 0.0, 1.0);
  EXPECT_EQ(res.n_jumps, 0);
  EXPECT_NEAR(res.pathwise_te, 1.0, 1e-12);
}

TEST(Girsanov, OneJumpRatioTwo) {
  TableRates r;
  const double c = 0.75;
  r.xy = [c](double, State) { return 2.0 * (1.0 + c); };
  r.x = [c](double) { return 1.0 + c; };
  const ProcessPair pair(SamplePath(0.0, 1.0, {0.4}, {0, 1}), SamplePath::constant(0.0, 1.0, 0));
  const auto res = girsanov_pathwise_te(r, pair, 0.0, 1.0);
  EXPECT_EQ(res.n_jumps, 1);
  EXPECT_NEAR(res.jump_sum, std::log(2.0), 1e-12);
  EXPECT_NEAR(res.integral_term, -(1.0 + c), 1e-12);
  EXPECT_NEAR(res.pathwise_te, std::log(2.0) - (1.0 + c), 1e-12);
  EXPECT_EQ(res.pathwise_te, res.jump_sum + res.integral_term);
}

TEST(Girsanov, SegmentsFollowSourceJumps) {
  // lambda_xy = 1 + Y, lambda_x = 1.5; Y = 1 on [0.25, 0.75)
  TableRates r;
  r.xy = [](double, State y) { return 1.0 + static_cast<double>(y); };
  r.x = [](double) { return 1.5; };
  const ProcessPair pair(SamplePath::constant(0.0, 1.0, 0), SamplePath(0.0, 1.0, {0.25, 0.75}, {0, 1, 0}));
  const auto res = girsanov_pathwise_te(r, pair, 0.0, 1.0);
  EXPECT_NEAR(res.integral_term, 1.5 - (0.5 * 1.0 + 0.5 * 2.0), 1e-12);
}

TEST(Girsanov, NonConstantRatesUseQuadrature) {
  TableRates r;
  r.xy = [](double t, State) { return 1.0 + t; };
  r.x = [](double) { return 1.0; };
  const auto res = girsanov_pathwise_te(r, no_jumps(), 0.0, 1.0);
  EXPECT_NEAR(res.integral_term, -0.5, 1e-8);
}

TEST(Girsanov, AbsoluteContinuityViolation) {
  TableRates r;
  r.xy = [](double, State) { return 1.0; };
  r.x = [](double t) { return t > 0.3 && t < 0.5 ? 0.0 : 1.0; };
  const ProcessPair pair(SamplePath(0.0, 1.0, {0.4}, {0, 1}), SamplePath::constant(0.0, 1.0, 0));
  EXPECT_THROW(girsanov_pathwise_te(r, pair, 0.0, 1.0), AbsoluteContinuityError);
}

TEST(Girsanov, JumpAtStartMustHaveEqualRates) {
  TableRates r;
  r.xy = [](double, State) { return 2.0; };
  r.x = [](double) { return 1.0; };
  const ProcessPair pair(SamplePath(-1.0, 1.0, {0.0}, {0, 1}), SamplePath::constant(-1.0, 1.0, 0));
  EXPECT_THROW(girsanov_pathwise_te(r, pair, 0.0, 1.0), AbsoluteContinuityError);
}

TEST(Girsanov, WindowOutsidePaths) {
  TableRates r;
  r.xy = [](double, State) { return 1.0; };
  r.x = [](double) { return 1.0; };
  EXPECT_THROW(girsanov_pathwise_te(r, no_jumps(), -0.5, 1.0), DomainError);
}

TEST(ModulatedPoisson, FilterIntegralMatchesQuadrature) {
  ModulatedPoissonModel::Params p;
  p.x_history = XHistory::full;
  ModulatedPoissonModel m(p);
  const ProcessPair pair = m.simulate(0.0, 3.0, 17);
  const auto& rates = m.rates();
  const auto exact = rates.escape_integral_x(0.0, pair.x.jump_count() ? pair.x.jump_times()[0] : 3.0, pair.x);
  ASSERT_TRUE(exact.has_value());
  const double b = pair.x.jump_count() ? pair.x.jump_times()[0] : 3.0;
  const int n = 20000;
  double q = 0.0;
  for (int j = 0; j < n; ++j) {
    const double t = (j + 0.5) * b / n;
    q += escape_rate(rates, RateKind::x, t, pair);
  }
  EXPECT_NEAR(*exact, q * b / n, 1e-6);
}

TEST(ModulatedPoisson, FilteredRateStartsAtMean) {
  ModulatedPoissonModel m({});
  const ProcessPair pair = m.simulate(0.0, 1.0, 2);
  EXPECT_NEAR(escape_rate(m.rates(), RateKind::x, 0.0, pair), 2.5, 1e-12);
}

TEST(ModulatedPoisson, StationaryRateNone) {
  ModulatedPoissonModel::Params p;
  p.x_history = XHistory::none;
  ModulatedPoissonModel m(p);
  const double expected = 0.5 * (1.0 * (std::log(0.4) - 1.0) + 2.5) + 0.5 * (4.0 * (std::log(1.6) - 1.0) + 2.5);
  EXPECT_NEAR(m.stationary_te_rate_none(), expected, 1e-14);
  const RateEstimate r = poisson_dest_te_rate(m, 0.5, 20000, 4);
  EXPECT_NEAR(r.value, expected, 3.0 * r.stderr + 1e-12);
}

TEST(PoissonDestRate, ZeroUnderIndependence) {
  IndependentPoissonModel m({1.7, 1.0});
  const RateEstimate r = poisson_dest_te_rate(m, 0.3, 100, 1);
  EXPECT_NEAR(r.value, 0.0, 1e-14);
}

TEST(PoissonDestRate, RejectsNonCounting) {
  TwoStateFeedbackModel m({});
  EXPECT_THROW(poisson_dest_te_rate(m, 0.3, 10, 1), ModelError);
}

TEST(EptMonteCarlo, IndependentIsZero) {
  IndependentPoissonModel m({1.0, 1.0});
  const EptResult r = ept_monte_carlo(m, 0.0, 1.0, 1000, 9);
  EXPECT_EQ(r.estimate.value, 0.0);
}

TEST(EptMonteCarlo, ModulatedPositiveAndReproducible) {
  ModulatedPoissonModel m({});
  const EptResult a = ept_monte_carlo(m, 0.0, 1.0, 4000, 10);
  const EptResult b = ept_monte_carlo(m, 0.0, 1.0, 4000, 10);
  EXPECT_GT(a.estimate.value, 5.0 * a.estimate.stderr);
  EXPECT_EQ(a.estimate.value, b.estimate.value);
  EXPECT_EQ(a.per_path, b.per_path);
}

TEST(EptMonteCarlo, LinearInWindowForStationaryModel) {
  ModulatedPoissonModel::Params p;
  p.x_history = XHistory::none;
  ModulatedPoissonModel m(p);
  const EptResult one = ept_monte_carlo(m, 0.0, 1.0, 20000, 11);
  const EptResult two = ept_monte_carlo(m, 0.0, 2.0, 20000, 12);
  const double se = std::hypot(2.0 * one.estimate.stderr, two.estimate.stderr);
  EXPECT_NEAR(two.estimate.value, 2.0 * one.estimate.value, 3.0 * se);
}

TEST(EptMonteCarlo, RateIntegratesToEpt) {
  ModulatedPoissonModel::Params p;
  p.x_history = XHistory::none;
  ModulatedPoissonModel m(p);
  const EptResult ept = ept_monte_carlo(m, 0.0, 1.0, 20000, 13);
  const RateEstimate r = poisson_dest_te_rate(m, 0.5, 20000, 14);
  EXPECT_NEAR(ept.estimate.value, r.value, 3.0 * std::hypot(ept.estimate.stderr, r.stderr));
}

TEST(FeedbackModel, StationaryLawSolvesBalance) {
  TwoStateFeedbackModel m({});
  const auto& pi = m.stationary();
  const CtmcSpec spec = m.joint_spec(0);
  double total = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    double flow = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      if (i != j) flow += pi[i] * spec.rate_matrix[i][j] - pi[j] * spec.rate_matrix[j][i];
    }
    EXPECT_NEAR(flow, 0.0, 1e-14);
    total += pi[j];
  }
  EXPECT_NEAR(total, 1.0, 1e-14);
}

TEST(FeedbackModel, PathsNeverJumpTogetherAndEptIsFinite) {
  TwoStateFeedbackModel m({});
  const ProcessPair pair = m.simulate(0.0, 10.0, 3);
  for (double t : pair.x.jump_times()) {
    EXPECT_FALSE(std::binary_search(pair.y.jump_times().begin(), pair.y.jump_times().end(), t));
  }
  const EptResult r = ept_monte_carlo(m, 0.0, 2.0, 2000, 4);
  EXPECT_TRUE(std::isfinite(r.estimate.value));
  EXPECT_GT(r.estimate.value, 0.0);
}

TEST(Registry, BuildsAndRejects) {
  for (const auto& name : jump_model_names()) EXPECT_EQ(make_jump_model(name, nlohmann::json::object())->name(), name);
  EXPECT_THROW(make_jump_model("nope", nlohmann::json::object()), ConfigError);
  EXPECT_THROW(make_jump_model("modulated-poisson", {{"lambda2", 1.0}}), ConfigError);
  EXPECT_THROW(make_jump_model("modulated-poisson", {{"x_history", "partial"}}), ConfigError);
  EXPECT_THROW(make_jump_model("independent-poisson", {{"lambda_x", -1.0}}), ParameterError);
}

TEST(Quantiles, Interpolates) {
  const std::vector<double> probs{0.0, 0.5, 1.0, 0.25};
  const auto q = quantiles({4.0, 1.0, 3.0, 2.0, 5.0}, probs);
  EXPECT_EQ(q, (std::vector<double>{1.0, 3.0, 5.0, 2.0}));
}
