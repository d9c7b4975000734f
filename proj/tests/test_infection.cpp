#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "npi/infection.hpp"

using namespace npi;

namespace {
DelayPmf delta_at(std::size_t lag, std::size_t size) {
  DelayPmf pmf;
  pmf.probabilities.assign(size, 0.0);
  pmf.probabilities[lag] = 1.0;
  return pmf;
}
}  // namespace

TEST(PropagateGrowth, UnitMultipliersKeepLevel) {
  const std::vector<double> n0 = {7.0, 3.0};
  const auto n = propagate_growth(n0, Grid(20, 2, 1.0));
  for (std::size_t t = 0; t < 20; ++t) {
    EXPECT_EQ(n(t, 0), 7.0);
    EXPECT_EQ(n(t, 1), 3.0);
  }
}

TEST(PropagateGrowth, TwoDaysOfGrowth) {
  const std::vector<double> n0 = {100.0};
  const auto n = propagate_growth(n0, Grid(3, 1, 1.2));
  EXPECT_NEAR(n(2, 0), 144.0, 1e-12);
}

TEST(PropagateGrowth, LogIsAffineInCumulativeLogMultiplier) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.7, 1.4);
  Grid m(31, 1);
  for (std::size_t t = 1; t < 31; ++t) m(t, 0) = u(rng);
  const std::vector<double> n0 = {12.0};
  const auto n = propagate_growth(n0, m);
  double cum = 0.0;
  for (std::size_t t = 1; t < 31; ++t) {
    cum += std::log(m(t, 0));
    EXPECT_NEAR(std::log(n(t, 0)), std::log(12.0) + cum, 1e-12);
    EXPECT_GT(n(t, 0), 0.0);
  }
}

TEST(PropagateGrowth, RejectsNonPositiveInitial) {
  const std::vector<double> n0 = {0.0};
  EXPECT_THROW(propagate_growth(n0, Grid(3, 1, 1.0)), DomainError);
}

TEST(PropagateRenewal, DeltaKernelDoubles) {
  const std::vector<double> n0 = {1.0};
  const auto n = propagate_renewal(n0, Grid(6, 1, 2.0), delta_at(1, 29));
  double expect = 1.0;
  for (std::size_t t = 0; t < 6; ++t, expect *= 2.0) EXPECT_EQ(n(t, 0), expect);
}

TEST(PropagateRenewal, ZeroReproductionNumber) {
  const std::vector<double> n0 = {5.0};
  const auto n = propagate_renewal(n0, Grid(6, 1, 0.0), delta_at(1, 29));
  for (std::size_t t = 1; t < 6; ++t) EXPECT_EQ(n(t, 0), 0.0);
}

TEST(PropagateRenewal, UnitReproductionIsFixedPoint) {
  const std::vector<double> n0 = {5.0};
  const auto n = propagate_renewal(n0, Grid(30, 1, 1.0), delta_at(1, 29));
  for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(n(t, 0), 5.0);
}

TEST(PropagateRenewal, DeltaKernelEqualsGrowthExactly) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Grid r(50, 2);
  for (auto& v : r.raw()) v = u(rng);
  const std::vector<double> n0 = {3.0, 40.0};
  EXPECT_EQ(propagate_renewal(n0, r, delta_at(1, 29)), propagate_growth(n0, r));
}

TEST(PropagateRenewal, PadsHistoryWithInitialLevel) {
  DelayPmf gi = delta_at(3, 4);
  const std::vector<double> n0 = {2.0};
  const auto n = propagate_renewal(n0, Grid(5, 1, 1.5), gi);
  EXPECT_EQ(n(1, 0), 3.0);  // lag-3 history is pre-window, padded with N0
  EXPECT_EQ(n(3, 0), 3.0);  // looks back to day 0
  EXPECT_EQ(n(4, 0), 4.5);
}

TEST(PropagateRenewal, KernelShapeErrors) {
  const std::vector<double> n0 = {1.0};
  EXPECT_THROW(propagate_renewal(n0, Grid(3, 1, 1.0), delta_at(0, 29)), ShapeError);
  EXPECT_THROW(propagate_renewal(n0, Grid(3, 1, 1.0), delta_at(0, 1)), ShapeError);
}

TEST(ExpectedCounts, IdentityDelay) {
  Grid n(10, 2);
  for (std::size_t k = 0; k < n.raw().size(); ++k) n.raw()[k] = 1.0 + k;
  EXPECT_EQ(expected_counts(n, delta_at(0, 1)), n);
}

TEST(ExpectedCounts, ConstantInputStaysConstant) {
  const auto delay = discretize_delay(default_case_delay());
  const auto y = expected_counts(Grid(40, 1, 17.0), delay);
  for (std::size_t t = 0; t < 40; ++t) EXPECT_NEAR(y(t, 0), 17.0, 1e-12);
}

TEST(ExpectedCounts, MatchesBruteForceConvolution) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  Grid n(60, 3);
  for (auto& v : n.raw()) v = u(rng);
  DelayPmf delay;
  double z = 0.0;
  for (int k = 0; k < 17; ++k) {
    delay.probabilities.push_back(u(rng));
    z += delay.probabilities.back();
  }
  for (auto& p : delay.probabilities) p /= z;
  const auto y = expected_counts(n, delay);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 60; ++t) {
      double acc = 0.0;
      for (int tau = 0; tau < 17; ++tau) {
        const long s = static_cast<long>(t) - tau;
        acc += n(s < 0 ? 0 : static_cast<std::size_t>(s), c) * delay[static_cast<std::size_t>(tau)];
      }
      EXPECT_NEAR(y(t, c), acc, 1e-10);
    }
}

TEST(ExpectedCounts, LinearInInfections) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  Grid a(30, 1), b(30, 1), mix(30, 1);
  for (std::size_t t = 0; t < 30; ++t) {
    a(t, 0) = u(rng);
    b(t, 0) = u(rng);
    mix(t, 0) = 2.0 * a(t, 0) + 3.0 * b(t, 0);
  }
  const auto delay = discretize_delay(default_death_delay());
  const auto ya = expected_counts(a, delay), yb = expected_counts(b, delay), ym = expected_counts(mix, delay);
  for (std::size_t t = 0; t < 30; ++t) EXPECT_NEAR(ym(t, 0), 2.0 * ya(t, 0) + 3.0 * yb(t, 0), 1e-10);
}
