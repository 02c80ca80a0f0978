#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cttx/error.hpp"
#include "cttx/paths.hpp"
#include "cttx/rng.hpp"

using namespace cttx;

TEST(SamplePath, RightContinuousEval) {
  const SamplePath p(0.0, 5.0, {2.0}, {0, 1});
  EXPECT_EQ(p.eval(2.0), 1);
  EXPECT_EQ(p.eval_left(2.0), 0);
  EXPECT_EQ(p.eval(1.999), 0);
  EXPECT_EQ(p.eval_left(3.0), 1);
}

TEST(SamplePath, ConstantPathEvalEqualsLeft) {
  const auto p = SamplePath::constant(-1.0, 1.0, 7);
  for (double t : {-1.0, -0.5, 0.0, 0.99}) {
    EXPECT_EQ(p.eval(t), 7);
    EXPECT_EQ(p.eval_left(t), 7);
  }
}

TEST(SamplePath, DomainErrors) {
  const auto p = SamplePath::constant(0.0, 1.0, 0);
  EXPECT_THROW(p.eval(1.0), DomainError);
  EXPECT_THROW(p.eval(-1e-12), DomainError);
  EXPECT_THROW(p.eval_left(2.0), DomainError);
}

TEST(SamplePath, RejectsMalformed) {
  EXPECT_THROW(SamplePath(0.0, 1.0, {0.5, 0.4}, {0, 1, 2}), ContractError);
  EXPECT_THROW(SamplePath(0.0, 1.0, {0.5}, {1, 1}), ContractError);
  EXPECT_THROW(SamplePath(0.0, 1.0, {0.0}, {0, 1}), ContractError);
  EXPECT_THROW(SamplePath(0.0, 1.0, {1.0}, {0, 1}), ContractError);
  EXPECT_THROW(SamplePath(0.0, 1.0, {}, {0, 1}), ContractError);
  EXPECT_THROW(SamplePath(1.0, 1.0, {}, {0}), ContractError);
}

TEST(SamplePath, RandomPathEvalMatchesLeftAwayFromJumps) {
  Rng rng(11);
  const SamplePath p = simulate_thppp(3.0, 0.0, 10.0, rng);
  ASSERT_GT(p.jump_count(), 5u);
  for (int j = 0; j < 1000; ++j) {
    const double t = j * 0.01;
    EXPECT_EQ(p.eval(t), p.eval_left(t));
  }
  for (double t : p.jump_times()) EXPECT_EQ(p.eval(t), p.eval_left(t) + 1);
}

TEST(SamplePath, JumpsInHalfOpen) {
  const SamplePath p(0.0, 5.0, {1.0, 2.0, 3.0}, {0, 1, 2, 3});
  EXPECT_EQ(p.jumps_in(1.0, 3.0), 2u);
  EXPECT_EQ(p.jumps_in(0.0, 1.0), 1u);
  EXPECT_EQ(p.jumps_in(3.0, 1.0), 0u);
}

TEST(SampleOnGrid, MatchesEvalLoop) {
  const SamplePath p(0.0, 4.0, {1.5}, {2, 5});
  EXPECT_TRUE(sample_on_grid(p, std::vector<double>{}).empty());
  EXPECT_EQ(sample_on_grid(p, std::vector<double>{1.0}), std::vector<State>{2});
  const std::vector<double> grid{0.5, 1.0, 1.5, 2.0};
  EXPECT_EQ(sample_on_grid(p, grid), (std::vector<State>{2, 2, 5, 5}));
  EXPECT_THROW(sample_on_grid(p, std::vector<double>{4.0}), DomainError);
}

TEST(Thppp, TinyIntensityHasNoJumps) {
  const SamplePath p = simulate_thppp(PoissonSpec{1e-9, 1.0}, 0.0, 1.0, 3);
  EXPECT_EQ(p.jump_count(), 0u);
  EXPECT_EQ(p.eval(0.5), 0);
}

TEST(Thppp, DeterministicGivenSeed) {
  const PoissonSpec spec{2.0, 1.0};
  EXPECT_EQ(simulate_thppp(spec, 0.0, 10.0, 99), simulate_thppp(spec, 0.0, 10.0, 99));
  EXPECT_NE(simulate_thppp(spec, 0.0, 10.0, 99).jump_times(),
            simulate_thppp(spec, 0.0, 10.0, 100).jump_times());
}

TEST(Thppp, RejectsBadIntensity) {
  EXPECT_THROW(simulate_thppp(PoissonSpec{0.0, 1.0}, 0.0, 1.0, 1), ParameterError);
  EXPECT_THROW(simulate_thppp(PoissonSpec{-1.0, 1.0}, 0.0, 1.0, 1), ParameterError);
  EXPECT_THROW(simulate_thppp(PoissonSpec{NAN, 1.0}, 0.0, 1.0, 1), ParameterError);
}

TEST(Thppp, MeanCountMatchesPoissonLaw) {
  // lambda = 2 on [0, 10): count ~ Poisson(20)
  const int n = 10000;
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    sum += static_cast<double>(simulate_thppp(PoissonSpec{2.0, 1.0}, 0.0, 10.0, stream_seed(5, j)).jump_count());
  }
  EXPECT_NEAR(sum / n, 20.0, 3.0 * std::sqrt(20.0 / n));
}

TEST(Thppp, IncrementsArePoissonChiSquare) {
  // Increments over [0,1) and [1,2) with lambda = 1.5: each Poisson(1.5) and
  // independent. Chi-square on the joint table with cells {0..4, 5+}^2.
  const int n = 10000;
  const double lambda = 1.5;
  const int cells = 6;
  std::vector<double> pmf(cells);
  double acc = 0.0;
  for (int k = 0; k < cells - 1; ++k) {
    pmf[k] = std::exp(-lambda + k * std::log(lambda) - std::lgamma(k + 1.0));
    acc += pmf[k];
  }
  pmf[cells - 1] = 1.0 - acc;
  std::vector<double> counts(cells * cells, 0.0);
  for (int j = 0; j < n; ++j) {
    const SamplePath p = simulate_thppp(PoissonSpec{lambda, 1.0}, 0.0, 2.0, stream_seed(17, j));
    const int a = std::min<int>(cells - 1, static_cast<int>(p.eval(std::nextafter(1.0, 0.0))));
    const int b = std::min<int>(cells - 1, static_cast<int>(p.eval(1.999999999) - p.eval(std::nextafter(1.0, 0.0))));
    counts[a * cells + b] += 1.0;
  }
  double chi2 = 0.0;
  for (int a = 0; a < cells; ++a) {
    for (int b = 0; b < cells; ++b) {
      const double e = n * pmf[a] * pmf[b];
      chi2 += (counts[a * cells + b] - e) * (counts[a * cells + b] - e) / e;
    }
  }
  // 35 degrees of freedom; the 0.999 quantile is 66.62.
  EXPECT_LT(chi2, 66.62);
}

TEST(LagPath, ShiftsJumpTimes) {
  const SamplePath x(0.0, 2.0, {1.0}, {0, 1});
  const SamplePath y = lag_path(x, 0.25);
  ASSERT_EQ(y.jump_count(), 1u);
  EXPECT_DOUBLE_EQ(y.jump_times()[0], 0.75);
  EXPECT_DOUBLE_EQ(y.t_start(), -0.25);
  EXPECT_DOUBLE_EQ(y.t_end(), 1.75);
  EXPECT_THROW(lag_path(x, 0.0), ParameterError);
  EXPECT_THROW(lag_path(x, -1.0), ParameterError);
}

TEST(LagPath, AgreesWithShiftedEvaluation) {
  for (int j = 0; j < 50; ++j) {
    Rng rng(stream_seed(3, j));
    const SamplePath x = simulate_thppp(2.0, 0.0, 5.0, rng);
    const double eps = 0.7;
    const SamplePath y = lag_path(x, eps);
    EXPECT_EQ(y.jump_count(), x.jumps_in(y.t_start() + eps, y.t_end() + eps));
    for (int k = 0; k < 100; ++k) {
      const double t = -0.7 + k * 0.043;
      EXPECT_EQ(y.eval(t), x.eval(t + eps));
    }
  }
}

TEST(LagPath, Composes) {
  Rng rng(8);
  const SamplePath x = simulate_thppp(3.0, 0.0, 4.0, rng);
  // dyadic lags keep the shifted times exact
  const SamplePath twice = lag_path(lag_path(x, 0.25), 0.5);
  const SamplePath once = lag_path(x, 0.75);
  EXPECT_EQ(twice, once);
}

TEST(Ctmc, SingleStateIsConstant) {
  CtmcSpec spec;
  spec.n_states = 1;
  spec.rate_matrix = {{0.0}};
  const SamplePath p = simulate_ctmc(spec, 0.0, 10.0, 1);
  EXPECT_EQ(p.jump_count(), 0u);
}

TEST(Ctmc, AbsorbingStateStays) {
  CtmcSpec spec;
  spec.n_states = 2;
  spec.rate_matrix = {{0.0, 5.0}, {0.0, 0.0}};
  const SamplePath p = simulate_ctmc(spec, 0.0, 100.0, 4);
  EXPECT_LE(p.jump_count(), 1u);
  EXPECT_EQ(p.eval(99.0), 1);
}

TEST(Ctmc, RejectsNegativeRates) {
  CtmcSpec spec;
  spec.n_states = 2;
  spec.rate_matrix = {{0.0, -1.0}, {1.0, 0.0}};
  EXPECT_THROW(simulate_ctmc(spec, 0.0, 1.0, 1), ParameterError);
}

namespace {

// Occupancy fraction of state 0 plus a batch-means standard error.
std::pair<double, double> occupancy0(double a, double b, std::uint64_t seed) {
  CtmcSpec spec;
  spec.n_states = 2;
  spec.rate_matrix = {{0.0, a}, {b, 0.0}};
  const int batches = 40;
  const double len = 250.0;
  std::vector<double> fr;
  for (int k = 0; k < batches; ++k) {
    const SamplePath p = simulate_ctmc(spec, 0.0, len, stream_seed(seed, k));
    double t0 = 0.0;
    double occ = 0.0;
    for (std::size_t j = 0; j <= p.jump_count(); ++j) {
      const double t1 = j < p.jump_count() ? p.jump_times()[j] : len;
      if (p.states()[j] == 0) occ += t1 - t0;
      t0 = t1;
    }
    fr.push_back(occ / len);
  }
  double m = 0.0;
  for (double f : fr) m += f;
  m /= batches;
  double ss = 0.0;
  for (double f : fr) ss += (f - m) * (f - m);
  return {m, std::sqrt(ss / (batches - 1) / batches)};
}

}  // namespace

TEST(Ctmc, SymmetricOccupancyIsHalf) {
  const auto [m, se] = occupancy0(1.0, 1.0, 21);
  EXPECT_NEAR(m, 0.5, 3.0 * se + 1e-3);
}

TEST(Ctmc, AsymmetricOccupancy) {
  const auto [m, se] = occupancy0(2.0, 1.0, 22);
  EXPECT_NEAR(m, 1.0 / 3.0, 3.0 * se + 1e-3);
}

TEST(PathIo, JsonRoundTrip) {
  Rng rng(2);
  const SamplePath p = simulate_thppp(4.0, 0.0, 3.0, rng);
  EXPECT_EQ(path_from_json(to_json(p)), p);
}

TEST(PathIo, CsvRoundTrip) {
  Rng rng(12);
  const SamplePath p = simulate_thppp(4.0, -1.0, 3.0, rng);
  const std::string csv = to_csv(p);
  EXPECT_EQ(csv.rfind("time,state\n", 0), 0u);
  EXPECT_EQ(path_from_csv(csv, 3.0), p);
  EXPECT_THROW(path_from_csv("t,s\n0,0\n", 1.0), ContractError);
}

TEST(RestrictPath, KeepsInteriorJumps) {
  const SamplePath p(0.0, 5.0, {1.0, 2.0, 3.0}, {0, 1, 2, 3});
  const SamplePath r = restrict_path(p, 1.0, 3.0);
  EXPECT_EQ(r.states()[0], 1);
  EXPECT_EQ(r.jump_times(), std::vector<double>{2.0});
  EXPECT_THROW(restrict_path(p, -1.0, 2.0), DomainError);
}

TEST(StreamSeed, DistinctStreams) {
  EXPECT_NE(stream_seed(1, 0), stream_seed(1, 1));
  EXPECT_NE(stream_seed(1, 0), stream_seed(2, 0));
  EXPECT_EQ(stream_seed(7, 3), stream_seed(7, 3));
}
