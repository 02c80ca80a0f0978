#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cttx/markov.hpp"

namespace cttx {

/// How psi_x sees the destination's own past.
enum class XHistory { none, full };

/// Rates for a destination X driven by a hidden two-state source Y. psi_xy
/// reads Y(t-) directly; psi_x either averages over the law of Y given X(t-)
/// alone ("none") or runs the exact two-state filter over the whole X history
/// since the path start ("full").
class HiddenTwoStateRates : public ConditionalRates {
 public:
  explicit HiddenTwoStateRates(XHistory mode) : mode_(mode) {}

  double psi_xy(double t, const ProcessPair& pair, State target) const override;
  double psi_x(double t, const SamplePath& x, State target) const override;
  std::optional<double> escape_integral_x(double a, double b, const SamplePath& x) const override;

  /// Law of Y at time t given X on [path start, t), left limit if
  /// include_jump_at_t is false.
  std::array<double, 2> filter(const SamplePath& x, double t, bool include_jump_at_t) const;

  XHistory mode() const { return mode_; }

 protected:
  /// Rate of X jumping from -> to while Y = y.
  virtual double x_rate(State from, State to, int y) const = 0;
  /// {q01, q10} of Y while X = x.
  virtual std::array<double, 2> y_rates(State x) const = 0;
  /// Law of Y at the path start given X there.
  virtual std::array<double, 2> prior(State x0) const = 0;

 private:
  double escape(State x, int y) const;
  XHistory mode_;
};

/// X Poisson(lambda_x), Y Poisson(lambda_y), independent.
class IndependentPoissonModel : public JumpModel, private ConditionalRates {
 public:
  struct Params {
    double lambda_x = 1.0;
    double lambda_y = 1.0;
  };
  explicit IndependentPoissonModel(Params p);

  std::string name() const override { return "independent-poisson"; }
  ProcessPair simulate(double t_start, double t_end, std::uint64_t seed) const override;
  const ConditionalRates& rates() const override { return *this; }
  bool counting() const override { return true; }

 private:
  std::vector<State> targets(State from) const override { return {from + 1}; }
  double psi_xy(double t, const ProcessPair& pair, State target) const override;
  double psi_x(double t, const SamplePath& x, State target) const override;
  Params p_;
};

/// Y a two-state chain started from its stationary law; X counts events at
/// intensity lambda0 or lambda1 according to Y.
class ModulatedPoissonModel : public JumpModel, private HiddenTwoStateRates {
 public:
  struct Params {
    double lambda0 = 1.0;
    double lambda1 = 4.0;
    double y_rate01 = 1.0;
    double y_rate10 = 1.0;
    XHistory x_history = XHistory::full;
    double warmup = 0.0;
  };
  explicit ModulatedPoissonModel(Params p);

  std::string name() const override { return "modulated-poisson"; }
  ProcessPair simulate(double t_start, double t_end, std::uint64_t seed) const override;
  const ConditionalRates& rates() const override { return *this; }
  double warmup() const override { return p_.warmup; }
  bool counting() const override { return true; }

  const Params& params() const { return p_; }
  std::array<double, 2> stationary() const;
  /// Rate of the "none" mode at stationarity:
  /// sum_y pi_y [lambda_y (ln(lambda_y / lambda_bar) - 1) + lambda_bar].
  double stationary_te_rate_none() const;

 private:
  std::vector<State> targets(State from) const override { return {from + 1}; }
  double x_rate(State from, State to, int y) const override;
  std::array<double, 2> y_rates(State x) const override;
  std::array<double, 2> prior(State x0) const override;
  Params p_;
};

/// X and Y two-state chains on a joint four-state chain: X flips at rates set
/// by Y, Y flips at rates set by X.
class TwoStateFeedbackModel : public JumpModel, private HiddenTwoStateRates {
 public:
  struct Params {
    /// Indexed by the other process's state.
    std::array<double, 2> x_up{0.5, 2.0};
    std::array<double, 2> x_down{1.0, 1.0};
    std::array<double, 2> y_up{0.5, 2.0};
    std::array<double, 2> y_down{1.0, 1.0};
    XHistory x_history = XHistory::full;
    double warmup = 0.0;
  };
  explicit TwoStateFeedbackModel(Params p);

  std::string name() const override { return "two-state-feedback"; }
  ProcessPair simulate(double t_start, double t_end, std::uint64_t seed) const override;
  const ConditionalRates& rates() const override { return *this; }
  double warmup() const override { return p_.warmup; }

  /// Stationary law of the joint chain, indexed 2 x + y.
  const std::array<double, 4>& stationary() const { return joint_pi_; }
  CtmcSpec joint_spec(State init) const;

 private:
  std::vector<State> targets(State from) const override;
  double x_rate(State from, State to, int y) const override;
  std::array<double, 2> y_rates(State x) const override;
  std::array<double, 2> prior(State x0) const override;
  Params p_;
  std::array<double, 4> joint_pi_{};
};

/// Registry: "independent-poisson", "modulated-poisson", "two-state-feedback".
std::unique_ptr<JumpModel> make_jump_model(const std::string& name, const nlohmann::json& params);
std::vector<std::string> jump_model_names();

}  // namespace cttx
