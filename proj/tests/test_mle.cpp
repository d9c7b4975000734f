#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "npi/inference.hpp"
#include "npi/mle.hpp"

using namespace npi;

namespace {

std::vector<std::string> names(const char* prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

MlProblem constant_problem(std::size_t countries, std::size_t npis, std::size_t days, double target, double r0) {
  MlProblem p;
  p.x = NpiPanel(names("npi", npis), names("C", countries), parse_iso_date("2020-03-01"), days);
  p.target = Grid(days, countries, target);
  p.r0.assign(countries, r0);
  return p;
}

// Simplified log-likelihoods written out independently of the library.
double noisy_r_ll(const MlProblem& p, const std::vector<double>& a) {
  double ll = 0.0;
  for (std::size_t c = 0; c < p.x.n_countries(); ++c)
    for (std::size_t t = 0; t < p.x.n_days; ++t) {
      double pred = p.r0[c];
      for (std::size_t i = 0; i < a.size(); ++i)
        if (p.x.at(i, t, c)) pred *= std::exp(-a[i]);
      const double e = std::log(p.target(t, c) / pred);
      ll -= 0.5 * e * e;
    }
  return ll;
}

double default_ll(const MlProblem& p, const std::vector<double>& a) {
  double ll = 0.0;
  for (std::size_t c = 0; c < p.x.n_countries(); ++c)
    for (std::size_t t = 0; t < p.x.n_days; ++t) {
      double pred = p.r0[c];
      for (std::size_t i = 0; i < a.size(); ++i)
        if (p.x.at(i, t, c)) pred *= std::exp(-a[i]);
      const double e = std::log(p.target(t, c)) - p.beta * (std::pow(pred, 1.0 / p.nu) - 1.0);
      ll -= 0.5 * e * e;
    }
  return ll;
}

double oracle_ll(Theorem th, const MlProblem& p, const std::vector<double>& a) {
  return th == Theorem::NoisyR ? noisy_r_ll(p, a) : default_ll(p, a);
}

// 1-D grid search written against the test's own likelihood.
double grid_oracle(Theorem th, const MlProblem& p, std::size_t i, std::vector<double> a) {
  double best = 0.0, best_ll = -INFINITY;
  for (long k = -20000; k <= 20000; ++k) {
    a[i] = static_cast<double>(k) * 1e-4;
    const double ll = oracle_ll(th, p, a);
    if (ll > best_ll) {
      best_ll = ll;
      best = a[i];
    }
  }
  return best;
}

}  // namespace

TEST(GeometricMean, Examples) {
  const std::vector<double> a{2.0, 8.0};
  EXPECT_DOUBLE_EQ(geometric_mean(a), 4.0);
  const std::vector<double> c(7, 3.25);
  EXPECT_DOUBLE_EQ(geometric_mean(c), 3.25);
}

TEST(GeometricMean, MatchesDirectProduct) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<double> v(1000);
  for (auto& x : v) x = u(rng);
  long double prod = 1.0L;
  for (double x : v) prod *= x;
  const double direct = static_cast<double>(std::pow(prod, 1.0L / 1000.0L));
  EXPECT_NEAR(geometric_mean(v) / direct, 1.0, 1e-10);
}

TEST(GeometricMean, RejectsBadInput) {
  EXPECT_THROW(geometric_mean(std::vector<double>{}), DomainError);
  EXPECT_THROW(geometric_mean(std::vector<double>{1.0, 0.0}), DomainError);
  EXPECT_THROW(geometric_mean(std::vector<double>{1.0, -2.0}), DomainError);
}

TEST(GeneralizedWeightedMean, Examples) {
  const std::vector<double> v{2.0, 4.0};
  EXPECT_DOUBLE_EQ(generalized_weighted_mean(v, 1.0, std::vector<double>{1.0, 1.0}), 3.0);
  EXPECT_DOUBLE_EQ(generalized_weighted_mean(v, 1.0, std::vector<double>{1.0, 3.0}), 3.5);
  EXPECT_DOUBLE_EQ(generalized_weighted_mean(std::vector<double>{2.0, 2.0}, -1.0, std::vector<double>{1.0, 1.0}), 2.0);
  // Harmonic mean of 1 and 3 is 1.5.
  EXPECT_NEAR(generalized_weighted_mean(std::vector<double>{1.0, 3.0}, -1.0, std::vector<double>{1.0, 1.0}), 1.5,
              1e-15);
}

TEST(GeneralizedWeightedMean, RejectsBadInput) {
  const std::vector<double> v{2.0, 4.0}, w{1.0, 1.0};
  EXPECT_THROW(generalized_weighted_mean(v, 0.0, w), DomainError);
  EXPECT_THROW(generalized_weighted_mean(v, 1.0, std::vector<double>{1.0}), DomainError);
  EXPECT_THROW(generalized_weighted_mean(std::vector<double>{2.0, -1.0}, 1.0, w), DomainError);
  EXPECT_THROW(generalized_weighted_mean(v, 1.0, std::vector<double>{1.0, 0.0}), DomainError);
  EXPECT_THROW(generalized_weighted_mean(std::vector<double>{}, 1.0, std::vector<double>{}), DomainError);
}

TEST(Theorem1, ConstantExample) {
  auto p = constant_problem(1, 1, 10, 2.0, 4.0);
  for (std::size_t t = 0; t < 10; ++t) p.x.set(0, t, 0, true);
  EXPECT_DOUBLE_EQ(theorem1_update(p, 0, std::vector<double>{0.0}), 0.5);
}

TEST(Theorem1, NoEffectWhenPredictionMatches) {
  auto p = random_ml_problem(Theorem::NoisyR, 4, 3, 3, 30);
  const std::vector<double> alpha{0.1, 0.2, 0.3};
  // Make R equal to the prediction without NPI 0 wherever NPI 0 is active.
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 30; ++t)
      if (p.x.at(0, t, c)) p.target(t, c) = p.r_without(0, t, c, alpha);
  EXPECT_NEAR(theorem1_update(p, 0, alpha), 1.0, 1e-14);
}

TEST(Theorem1, InvariantUnderRelabelling) {
  const auto p = random_ml_problem(Theorem::NoisyR, 8, 4, 3, 40);
  const std::vector<double> alpha{0.1, 0.2, 0.3};
  // Reverse the country order.
  MlProblem q = p;
  const std::size_t C = p.x.n_countries(), T = p.x.n_days;
  for (std::size_t c = 0; c < C; ++c) {
    q.r0[c] = p.r0[C - 1 - c];
    for (std::size_t t = 0; t < T; ++t) {
      q.target(t, c) = p.target(t, C - 1 - c);
      for (std::size_t i = 0; i < 3; ++i) q.x.set(i, t, c, p.x.at(i, t, C - 1 - c));
    }
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(theorem1_update(q, i, alpha), theorem1_update(p, i, alpha), 1e-14);
}

TEST(Theorem1, CommonScalingCancels) {
  const auto p = random_ml_problem(Theorem::NoisyR, 9, 3, 2, 30);
  const std::vector<double> alpha{0.05, 0.25};
  MlProblem q = p;
  for (double& r : q.r0) r *= 2.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 30; ++t) q.target(t, c) *= 2.0;
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(theorem1_update(q, i, alpha), theorem1_update(p, i, alpha), 1e-12);
}

TEST(Theorem1, NeverActiveNpiIsUnidentifiable) {
  auto p = constant_problem(2, 2, 10, 2.0, 3.0);
  p.x.set(0, 3, 0, true);
  EXPECT_THROW(theorem1_update(p, 1, std::vector<double>{0.0, 0.0}), IdentifiabilityError);
  EXPECT_THROW(coordinate_ascent(p, Theorem::NoisyR), IdentifiabilityError);
}

TEST(Theorem2, ConstantExample) {
  auto p = constant_problem(1, 1, 10, 1.0, 4.0);
  const auto gi = default_generation_interval();
  p.nu = gi.shape;
  p.beta = gi.rate;
  for (std::size_t t = 0; t < 10; ++t) {
    p.x.set(0, t, 0, true);
    p.target(t, 0) = r_to_growth(2.0, gi);  // implied R is 2
  }
  EXPECT_NEAR(theorem2_update(p, 0, std::vector<double>{0.0}), 0.5, 1e-12);
}

TEST(Theorem2, NoEffectWhenPredictionMatches) {
  auto p = random_ml_problem(Theorem::Default, 5, 3, 3, 30);
  const std::vector<double> alpha{0.1, 0.2, 0.3};
  const GenerationInterval gi{5.06, 2.11, p.nu, p.beta};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 30; ++t)
      if (p.x.at(1, t, c)) p.target(t, c) = r_to_growth(p.r_without(1, t, c, alpha), gi);
  EXPECT_NEAR(theorem2_update(p, 1, alpha), 1.0, 1e-12);
}

TEST(Theorem2, UnitShapeMatchesArithmeticWeightedMean) {
  auto p = random_ml_problem(Theorem::Default, 6, 3, 2, 25);
  p.nu = 1.0;
  const std::vector<double> alpha{0.2, 0.1};
  std::vector<double> rbar, rtilde;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 25; ++t)
      if (p.x.at(0, t, c)) {
        rbar.push_back(1.0 + std::log(p.target(t, c)) / p.beta);
        rtilde.push_back(p.r_without(0, t, c, alpha));
      }
  const double expected =
      generalized_weighted_mean(rbar, 1.0, rtilde) / generalized_weighted_mean(rtilde, 1.0, rtilde);
  EXPECT_NEAR(theorem2_update(p, 0, alpha), expected, 1e-12);
}

TEST(Theorem2, GuardsImpossibleGrowth) {
  auto p = constant_problem(1, 1, 5, 1.0, 3.0);
  p.beta = 1.0;
  p.nu = 2.0;
  for (std::size_t t = 0; t < 5; ++t) p.x.set(0, t, 0, true);
  p.target(2, 0) = std::exp(-1.5);
  EXPECT_THROW(theorem2_update(p, 0, std::vector<double>{0.0}), DomainError);
}

class TheoremGrid : public ::testing::TestWithParam<Theorem> {};

TEST_P(TheoremGrid, UpdateMaximisesOneDimensionalLikelihood) {
  const Theorem th = GetParam();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto p = random_ml_problem(th, seed, 5, 3, 40);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 0.4);
    std::vector<double> alpha{u(rng), u(rng), u(rng)};
    for (std::size_t i = 0; i < 3; ++i) {
      const double closed = theorem_update(th, p, i, alpha);
      EXPECT_NEAR(closed, std::exp(-grid_oracle(th, p, i, alpha)), 1e-4) << "seed " << seed << " npi " << i;
      // Strict local maximum in the coordinate.
      auto a = alpha;
      a[i] = -std::log(closed);
      const double at = oracle_ll(th, p, a);
      a[i] += 1e-3;
      EXPECT_LT(oracle_ll(th, p, a), at);
      a[i] -= 2e-3;
      EXPECT_LT(oracle_ll(th, p, a), at);
    }
  }
}

TEST_P(TheoremGrid, CoordinateAscentMatchesJointOptimiser) {
  const Theorem th = GetParam();
  const auto p = random_ml_problem(th, 11, 4, 3, 50);
  const auto res = coordinate_ascent(p, th);
  std::function<double(std::span<const double>, std::span<double>)> f = [&](std::span<const double> a,
                                                                            std::span<double> g) {
    const std::vector<double> av(a.begin(), a.end());
    const double h = 1e-6;
    for (std::size_t i = 0; i < av.size(); ++i) {
      auto up = av, dn = av;
      up[i] += h;
      dn[i] -= h;
      g[i] = (oracle_ll(th, p, up) - oracle_ll(th, p, dn)) / (2 * h);
    }
    return oracle_ll(th, p, av);
  };
  OptimizeSettings os;
  os.grad_tol = 1e-7;
  const auto joint = maximize(f, std::vector<double>(3, 0.0), os);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(res.alpha[i], joint.theta[i], 1e-5);
  for (double r : res.residuals) EXPECT_LT(std::abs(r), 1e-4);
  EXPECT_GT(res.iterations, 1);
}

INSTANTIATE_TEST_SUITE_P(BothTheorems, TheoremGrid, ::testing::Values(Theorem::NoisyR, Theorem::Default),
                         [](const auto& info) { return info.param == Theorem::NoisyR ? "NoisyR" : "Default"; });

TEST(CoordinateAscent, SingleNpiConvergesInOneSweep) {
  auto p = random_ml_problem(Theorem::NoisyR, 21, 3, 1, 30);
  const auto res = coordinate_ascent(p, Theorem::NoisyR);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_NEAR(std::exp(-res.alpha[0]), theorem1_update(p, 0, std::vector<double>{0.0}), 1e-15);
}

TEST(CoordinateAscent, DisjointNpisConvergeInOneSweep) {
  auto p = random_ml_problem(Theorem::NoisyR, 22, 3, 3, 30);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 30; ++t)
      for (std::size_t i = 0; i < 3; ++i) p.x.set(i, t, c, i == c && t >= 10);
  const auto res = coordinate_ascent(p, Theorem::NoisyR);
  EXPECT_EQ(res.iterations, 1);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(res.alpha[i], grid_oracle(Theorem::NoisyR, p, i, res.alpha), 1e-4);
}

TEST(CoordinateAscent, BudgetErrorCarriesLastIterate) {
  const auto p = random_ml_problem(Theorem::NoisyR, 23, 4, 3, 50);
  try {
    coordinate_ascent(p, Theorem::NoisyR, 1e-8, 1);
    FAIL() << "expected a budget error";
  } catch (const BudgetError& e) {
    EXPECT_EQ(e.last_iterate.size(), 3u);
  }
}

TEST(MleCheck, RowsAgree) {
  const auto p = random_ml_problem(Theorem::Default, 31, 3, 2, 30);
  const auto rows = mle_check(p, Theorem::Default);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.theorem_value, r.grid_value, 1e-4);
    EXPECT_NEAR(r.theorem_value, r.joint_value, 1e-7);
  }
}
