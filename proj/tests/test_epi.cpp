#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "npi/epi.hpp"

using namespace npi;

namespace {
// Independent NB mass in long double, straight from the gamma-function form.
long double nb_pmf_ld(int y, long double mu, long double psi) {
  const long double log_p = std::lgamma(y + psi) - std::lgamma(psi) - std::lgamma(y + 1.0L) +
                            psi * std::log(psi / (psi + mu)) + y * std::log(mu / (psi + mu));
  return std::exp(log_p);
}
}  // namespace

TEST(DiscretizeDelay, CaseDelaySumsToOne) {
  const auto pmf = discretize_delay(default_case_delay());
  ASSERT_EQ(pmf.size(), 32u);
  long double s = 0.0L;
  for (double p : pmf.probabilities) {
    EXPECT_GE(p, 0.0);
    s += p;
  }
  EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-12);
}

TEST(DiscretizeDelay, SingleBinTakesAllMass) {
  const auto pmf = discretize_delay({7.0, 2.0, 1});
  ASSERT_EQ(pmf.size(), 1u);
  EXPECT_EQ(pmf[0], 1.0);
}

TEST(DiscretizeDelay, DeathDelayModeMatchesBruteForce) {
  const auto pmf = discretize_delay(default_death_delay());
  ASSERT_EQ(pmf.size(), 48u);
  int oracle = 0;
  for (int lag = 1; lag < 48; ++lag)
    if (nb_pmf_ld(lag, 21.82L, 14.26L) > nb_pmf_ld(oracle, 21.82L, 14.26L)) oracle = lag;
  const auto it = std::max_element(pmf.probabilities.begin(), pmf.probabilities.end());
  EXPECT_EQ(it - pmf.probabilities.begin(), oracle);
  // Whole shape agrees with the renormalised brute-force mass.
  long double z = 0.0L;
  for (int lag = 0; lag < 48; ++lag) z += nb_pmf_ld(lag, 21.82L, 14.26L);
  for (int lag = 0; lag < 48; ++lag)
    EXPECT_NEAR(pmf[static_cast<std::size_t>(lag)], static_cast<double>(nb_pmf_ld(lag, 21.82L, 14.26L) / z), 1e-14);
}

TEST(DiscretizeDelay, RandomSpecsNormalise) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mean(0.5, 30.0), disp(0.3, 50.0);
  std::uniform_int_distribution<int> trunc(1, 80);
  for (int rep = 0; rep < 200; ++rep) {
    const auto pmf = discretize_delay({mean(rng), disp(rng), trunc(rng)});
    EXPECT_NEAR(std::accumulate(pmf.probabilities.begin(), pmf.probabilities.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(DiscretizeDelay, RejectsInvalidSpec) {
  EXPECT_THROW(discretize_delay({0.0, 1.0, 5}), DomainError);
  EXPECT_THROW(discretize_delay({1.0, -2.0, 5}), DomainError);
  EXPECT_THROW(discretize_delay({1.0, 2.0, 0}), DomainError);
}

TEST(GiParams, DefaultMoments) {
  const auto gi = default_generation_interval();
  const long double mu = 5.06L, sd = 2.11L;
  EXPECT_NEAR(gi.shape, static_cast<double>(mu * mu / (sd * sd)), 1e-13);
  EXPECT_NEAR(gi.rate, static_cast<double>(mu / (sd * sd)), 1e-13);
  EXPECT_NEAR(gi.shape, 5.7509, 5e-5);
  EXPECT_NEAR(gi.rate, 1.1365, 5e-5);
}

TEST(GiParams, UnitMoments) {
  const auto gi = gi_params(1.0, 1.0);
  EXPECT_EQ(gi.shape, 1.0);
  EXPECT_EQ(gi.rate, 1.0);
}

TEST(GiParams, SensitivityMean) {
  const auto gi = gi_params(6.06, 2.11);
  EXPECT_NEAR(gi.shape, 6.06 * 6.06 / (2.11 * 2.11), 1e-13);
  EXPECT_NEAR(gi.rate, 6.06 / (2.11 * 2.11), 1e-13);
}

TEST(GiParams, GammaRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 20.0);
  for (int rep = 0; rep < 100; ++rep) {
    const double m = u(rng), s = u(rng);
    const auto gi = gi_params(m, s);
    EXPECT_NEAR(gi.shape / gi.rate, m, 1e-12 * std::max(1.0, m));
    EXPECT_NEAR(std::sqrt(gi.shape) / gi.rate, s, 1e-12 * std::max(1.0, s));
  }
}

TEST(GiParams, RejectsNonPositive) {
  EXPECT_THROW(gi_params(0.0, 1.0), DomainError);
  EXPECT_THROW(gi_params(1.0, -1.0), DomainError);
}

TEST(RToGrowth, UnitReproductionNumberIsStationary) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.5, 15.0);
  for (int rep = 0; rep < 100; ++rep) EXPECT_EQ(r_to_growth(1.0, gi_params(u(rng), u(rng))), 1.0);
}

TEST(RToGrowth, DefaultValue) {
  const auto gi = default_generation_interval();
  const long double nu = gi.shape, beta = gi.rate;
  const long double oracle = std::exp(beta * (std::pow(3.25L, 1.0L / nu) - 1.0L));
  EXPECT_NEAR(r_to_growth(3.25, gi), static_cast<double>(oracle), 1e-14);
  EXPECT_NEAR(r_to_growth(3.25, gi), 1.295, 5e-4);
}

TEST(RToGrowth, StrictlyIncreasing) {
  const auto gi = default_generation_interval();
  double prev = 0.0;
  for (double r : {0.5, 1.0, 2.0, 4.0}) {
    const double m = r_to_growth(r, gi);
    EXPECT_GT(m, prev);
    prev = m;
  }
}

TEST(RToGrowth, InverseRoundTrip) {
  const auto gi = default_generation_interval();
  for (double r : {0.3, 1.0, 2.5, 6.0}) EXPECT_NEAR(growth_to_r(r_to_growth(r, gi), gi), r, 1e-12 * r);
  EXPECT_THROW(r_to_growth(0.0, gi), DomainError);
  EXPECT_THROW(growth_to_r(std::exp(-2.0 * gi.rate), gi), DomainError);
}

TEST(GenerationIntervalPmf, SupportAndNormalisation) {
  const auto pmf = discretize_generation_interval(default_generation_interval());
  ASSERT_EQ(pmf.size(), 29u);
  EXPECT_EQ(pmf[0], 0.0);
  EXPECT_NEAR(std::accumulate(pmf.probabilities.begin(), pmf.probabilities.end(), 0.0), 1.0, 1e-12);
  // Gamma(5.75, 1.14) has its mode at (nu - 1) / beta ~ 4.2 days.
  const auto it = std::max_element(pmf.probabilities.begin(), pmf.probabilities.end());
  EXPECT_EQ(it - pmf.probabilities.begin(), 4);
}
