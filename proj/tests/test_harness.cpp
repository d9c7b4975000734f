#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "npi/harness.hpp"
#include "support.hpp"

using namespace npi;

namespace {

std::vector<std::string> codes(std::size_t n, const char* prefix = "C") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

const auto kStart = parse_iso_date("2020-02-01");

/// Flat daily counts with no NPIs and nothing masked.
struct Toy {
  NpiPanel panel;
  CountData counts;
  Toy(std::size_t countries, std::size_t days, double daily_cases, double daily_deaths, std::size_t npis = 2)
      : panel(codes(npis, "N"), codes(countries), kStart, days), counts(codes(countries), kStart, days) {
    for (std::size_t c = 0; c < countries; ++c)
      for (std::size_t t = 0; t < days; ++t) {
        counts.cases(t, c) = daily_cases;
        counts.deaths(t, c) = daily_deaths;
      }
  }
};

std::size_t unmasked(const MaskGrid& m) { return m.n_days() * m.n_countries() - m.count(); }

Trace trace_from(const Model& model, const std::vector<std::vector<double>>& thetas) {
  Trace tr;
  tr.names = model.constrained_names();
  tr.n_chains = 1;
  tr.n_samples = thetas.size();
  for (const auto& th : thetas) {
    const auto c = model.constrain(th);
    tr.values.insert(tr.values.end(), c.begin(), c.end());
    tr.divergent.push_back(0);
  }
  return tr;
}

SensitivityResult result(SensitivityCategory cat, std::vector<std::pair<std::string, double>> medians,
                         EffectUnit unit = EffectUnit::PercentReductionInR) {
  SensitivityResult r;
  r.category = cat;
  r.unit = unit;
  for (auto& [name, m] : medians) r.npis.push_back({name, m, m - 1, m + 1});
  return r;
}

ExperimentSpec base_spec(std::size_t countries, std::size_t npis, const std::string& variant = "default") {
  ExperimentSpec s;
  s.config = ModelConfig::for_variant(variant);
  s.countries = codes(countries);
  s.npis = codes(npis, "N");
  return s;
}

}  // namespace

TEST(PreprocessMask, CasesMaskedUntilThresholdDay) {
  Toy toy(1, 40, 6.0, 1.0);  // cumulative cases reach 102 on day 16
  toy.counts.cases(16, 0) = 10.0;
  const auto out = preprocess_mask(toy.counts, toy.panel).counts;
  // cumulative: 6 * 16 = 96 through day 15, then 106 on day 16
  for (std::size_t t = 0; t < 16; ++t) EXPECT_TRUE(out.case_mask(t, 0)) << t;
  EXPECT_FALSE(out.case_mask(16, 0));
  // deaths reach 10 on day 9
  for (std::size_t t = 0; t < 9; ++t) EXPECT_TRUE(out.death_mask(t, 0));
  EXPECT_FALSE(out.death_mask(9, 0));
}

TEST(PreprocessMask, Day17Crossing) {
  Toy toy(1, 30, 0.0, 0.0);
  toy.counts.cases(17, 0) = 100.0;
  toy.counts.deaths(0, 0) = 10.0;
  const auto out = preprocess_mask(toy.counts, toy.panel).counts;
  for (std::size_t t = 0; t < 17; ++t) EXPECT_TRUE(out.case_mask(t, 0));
  for (std::size_t t = 17; t < 30; ++t) EXPECT_FALSE(out.case_mask(t, 0));
}

TEST(PreprocessMask, NoLiftNoTruncation) {
  Toy toy(1, 60, 200.0, 20.0);
  for (std::size_t t = 10; t < 60; ++t) toy.panel.set(0, t, 0, true);
  const auto out = preprocess_mask(toy.counts, toy.panel);
  EXPECT_EQ(out.counts.case_mask.count(), 0u);
  EXPECT_EQ(out.counts.death_mask.count(), 0u);
  EXPECT_TRUE(out.warnings.empty());
}

TEST(PreprocessMask, LiftOnDay50) {
  Toy toy(1, 80, 200.0, 20.0);
  for (std::size_t t = 10; t < 50; ++t) toy.panel.set(1, t, 0, true);
  ASSERT_EQ(first_lift_day(toy.panel, 0), 50u);
  const auto out = preprocess_mask(toy.counts, toy.panel).counts;
  for (std::size_t t = 0; t < 80; ++t) {
    EXPECT_EQ(out.case_mask(t, 0), t >= 53) << t;
    EXPECT_EQ(out.death_mask(t, 0), t >= 62) << t;
  }
}

TEST(PreprocessMask, NeverReachingThresholdMasksStreamWithWarning) {
  Toy toy(2, 30, 1.0, 0.0);
  toy.counts.cases(5, 1) = 500.0;
  toy.counts.deaths(5, 1) = 50.0;
  const auto out = preprocess_mask(toy.counts, toy.panel);
  for (std::size_t t = 0; t < 30; ++t) {
    EXPECT_TRUE(out.counts.case_mask(t, 0));
    EXPECT_TRUE(out.counts.death_mask(t, 0));
  }
  ASSERT_EQ(out.warnings.size(), 2u);
  EXPECT_NE(out.warnings[0].find("C0"), std::string::npos);
}

TEST(PreprocessMask, KeepsExistingMasks) {
  Toy toy(1, 20, 200.0, 20.0);
  toy.counts.case_mask.set(12, 0, true);
  const auto out = preprocess_mask(toy.counts, toy.panel).counts;
  EXPECT_TRUE(out.case_mask(12, 0));
  EXPECT_EQ(out.case_mask.count(), 1u);
}

TEST(PreprocessMask, RejectsBadRules) {
  Toy toy(1, 10, 1.0, 1.0);
  MaskRules r;
  r.case_threshold = -1.0;
  EXPECT_THROW(preprocess_mask(toy.counts, toy.panel, r), ConfigError);
  r = {};
  r.death_window_lag = -2;
  EXPECT_THROW(preprocess_mask(toy.counts, toy.panel, r), ConfigError);
}

TEST(PreprocessMask, RaisingThresholdNeverUnmasks) {
  const auto data = npi::testing::small_dataset("default", 3, 5, 3, 60);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 400.0);
  for (int trial = 0; trial < 30; ++trial) {
    MaskRules lo, hi;
    lo.case_threshold = u(rng);
    hi.case_threshold = lo.case_threshold + u(rng);
    lo.death_threshold = u(rng) / 10.0;
    hi.death_threshold = lo.death_threshold + u(rng) / 10.0;
    const auto a = preprocess_mask(data.counts, data.panel, lo).counts;
    const auto b = preprocess_mask(data.counts, data.panel, hi).counts;
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t t = 0; t < 60; ++t) {
        if (a.case_mask(t, c)) EXPECT_TRUE(b.case_mask(t, c));
        if (a.death_mask(t, c)) EXPECT_TRUE(b.death_mask(t, c));
      }
  }
}

TEST(Holdout, DefaultTestCountries) {
  EXPECT_EQ(default_test_countries(),
            (std::vector<std::string>{"Germany", "Romania", "Mexico", "Italy", "Austria", "Portugal"}));
}

TEST(Holdout, HeldoutCellCountMatchesMaskOracle) {
  std::vector<std::string> names = default_test_countries();
  names.push_back("Spain");
  names.push_back("France");
  CountData data(names, kStart, 100);
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.2);
  for (std::size_t c = 0; c < names.size(); ++c)
    for (std::size_t t = 0; t < 100; ++t) {
      data.case_mask.set(t, c, coin(rng));
      data.death_mask.set(t, c, t < 20 || coin(rng));
    }
  const auto split = holdout_split(data, default_test_countries());
  // Oracle: per test country, unmasked cells minus the 14 kept (or all of them if fewer).
  auto expected = [&](const MaskGrid& m) {
    std::size_t n = 0;
    for (std::size_t c = 0; c < 6; ++c) {
      std::size_t free = 0;
      for (std::size_t t = 0; t < 100; ++t) free += m(t, c) ? 0 : 1;
      n += free > 14 ? free - 14 : 0;
    }
    return n;
  };
  EXPECT_EQ(unmasked(split.heldout.case_mask), expected(data.case_mask));
  EXPECT_EQ(unmasked(split.heldout.death_mask), expected(data.death_mask));

  CountData clean(names, kStart, 100);
  const auto s2 = holdout_split(clean, default_test_countries());
  EXPECT_EQ(unmasked(s2.heldout.case_mask), 6u * 86u);
  EXPECT_EQ(unmasked(s2.heldout.death_mask), 6u * 86u);
}

TEST(Holdout, DisjointAndExhaustive) {
  const auto data = npi::testing::small_dataset("default", 9, 6, 3, 50);
  const auto masked = preprocess_mask(data.counts, data.panel).counts;
  const auto split = holdout_split(masked, {masked.countries[1], masked.countries[4]}, 7);
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t t = 0; t < 50; ++t) {
      const bool train = !split.train.case_mask(t, c), held = !split.heldout.case_mask(t, c);
      EXPECT_FALSE(train && held);
      EXPECT_EQ(train || held, !masked.case_mask(t, c));
      const bool dtrain = !split.train.death_mask(t, c), dheld = !split.heldout.death_mask(t, c);
      EXPECT_FALSE(dtrain && dheld);
      EXPECT_EQ(dtrain || dheld, !masked.death_mask(t, c));
    }
  EXPECT_EQ(split.test_countries, (std::vector<std::size_t>{1, 4}));
}

TEST(Holdout, KeepAllDaysLeavesNothingHeldOut) {
  Toy toy(3, 30, 5.0, 1.0);
  const auto split = holdout_split(toy.counts, {"C0"}, 30);
  EXPECT_EQ(unmasked(split.heldout.case_mask), 0u);
  EXPECT_EQ(split.train, toy.counts);
}

TEST(Holdout, UnknownCountry) {
  Toy toy(2, 10, 1.0, 1.0);
  EXPECT_THROW(holdout_split(toy.counts, {"Atlantis"}), LookupError);
}

class Predictive : public ::testing::Test {
 protected:
  void SetUp() override {
    data = npi::testing::small_dataset("default-no-noise", 4, 2, 2, 30);
    // Hold out a single death cell; everything else is training data.
    train = data.counts;
    heldout = data.counts;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t t = 0; t < 30; ++t) {
        heldout.case_mask.set(t, c, true);
        heldout.death_mask.set(t, c, !(c == 1 && t == 25));
      }
    train.death_mask.set(25, 1, true);
    model.emplace(ModelConfig::for_variant("default-no-noise"), data.panel, train);
    std::mt19937_64 rng(8);
    th1 = npi::testing::random_point(*model, rng);
    th2 = npi::testing::random_point(*model, rng);
  }
  double cell_ll(const std::vector<double>& th) const {
    const auto fw = model->forward(th);
    const auto c = model->constrain(th);
    Trace names = trace_from(*model, {th});
    return nb_logpmf(data.counts.deaths(25, 1), fw.expected_deaths(25, 1), c[names.index_of("psi_deaths")]);
  }

  SimulatedDataset data;
  CountData train, heldout;
  std::optional<Model> model;
  std::vector<double> th1, th2;
};

TEST_F(Predictive, SingleDrawEqualsCellLikelihood) {
  const auto s = predictive_loglik(*model, trace_from(*model, {th1}), heldout, 1);
  EXPECT_EQ(s.case_cells, 0u);
  EXPECT_EQ(s.death_cells, 1u);
  EXPECT_TRUE(std::isnan(s.cases));
  EXPECT_NEAR(s.deaths, cell_ll(th1), 1e-10);
  EXPECT_NEAR(s.total(), s.deaths, 0.0);
}

TEST_F(Predictive, DuplicatedDrawsMatchSingleDraw) {
  const auto one = predictive_loglik(*model, trace_from(*model, {th1}), heldout, 1);
  const auto three = predictive_loglik(*model, trace_from(*model, {th1, th1, th1}), heldout, 1);
  EXPECT_NEAR(three.deaths, one.deaths, 1e-12);
}

TEST_F(Predictive, TwoDrawsAverageLikelihoods) {
  const double l1 = cell_ll(th1), l2 = cell_ll(th2);
  const auto s = predictive_loglik(*model, trace_from(*model, {th1, th2}), heldout, 1);
  EXPECT_NEAR(s.deaths, std::log((std::exp(l1) + std::exp(l2)) / 2.0), 1e-10);
}

TEST_F(Predictive, CellsAreAveragedSeparately) {
  heldout.death_mask.set(24, 1, false);
  train.death_mask.set(24, 1, true);
  model.emplace(ModelConfig::for_variant("default-no-noise"), data.panel, train);
  auto ll = [&](const std::vector<double>& th, std::size_t t) {
    const auto fw = model->forward(th);
    const auto c = model->constrain(th);
    Trace names = trace_from(*model, {th});
    return nb_logpmf(data.counts.deaths(t, 1), fw.expected_deaths(t, 1), c[names.index_of("psi_deaths")]);
  };
  double expected = 0.0;
  for (std::size_t t : {24u, 25u}) expected += std::log((std::exp(ll(th1, t)) + std::exp(ll(th2, t))) / 2.0);
  const auto s = predictive_loglik(*model, trace_from(*model, {th1, th2}), heldout, 1);
  EXPECT_EQ(s.death_cells, 2u);
  EXPECT_NEAR(s.deaths, expected, 1e-10);
}

TEST_F(Predictive, EmptyHeldoutIsUnavailable) {
  CountData none = heldout;
  none.death_mask.set(25, 1, true);
  EXPECT_THROW(predictive_loglik(*model, trace_from(*model, {th1}), none, 1), UnavailableError);
}

TEST(PredictiveNoise, FreshNoiseOnlyAfterTrainingWindow) {
  const auto data = npi::testing::small_dataset("default", 6, 2, 2, 30);
  CountData heldout = data.counts;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 30; ++t) {
      heldout.case_mask.set(t, c, true);
      heldout.death_mask.set(t, c, t != 10);
    }
  const Model model(ModelConfig::for_variant("default"), data.panel, data.counts);
  std::mt19937_64 rng(3);
  const auto th = npi::testing::random_point(model, rng);
  // Every day is observed in training, so no noise is redrawn and the seed is irrelevant.
  const auto a = predictive_loglik(model, trace_from(model, {th}), heldout, 1);
  const auto b = predictive_loglik(model, trace_from(model, {th}), heldout, 2);
  EXPECT_EQ(a.deaths, b.deaths);

  CountData train = data.counts;
  for (std::size_t t = 5; t < 30; ++t) train.death_mask.set(t, 0, true), train.death_mask.set(t, 1, true);
  const Model short_model(ModelConfig::for_variant("default"), data.panel, train);
  const auto c1 = predictive_loglik(short_model, trace_from(short_model, {th}), heldout, 1);
  const auto c2 = predictive_loglik(short_model, trace_from(short_model, {th}), heldout, 2);
  const auto c1again = predictive_loglik(short_model, trace_from(short_model, {th}), heldout, 1);
  EXPECT_NE(c1.deaths, c2.deaths);
  EXPECT_EQ(c1.deaths, c1again.deaths);
}

TEST(Effectiveness, Percent) {
  EXPECT_NEAR(effectiveness_percent(std::log(2.0), EffectForm::Multiplicative), 50.0, 1e-12);
  EXPECT_EQ(effectiveness_percent(0.0, EffectForm::Multiplicative), 0.0);
  EXPECT_EQ(effectiveness_percent(0.0, EffectForm::Additive), 0.0);
  EXPECT_NEAR(effectiveness_percent(0.35, EffectForm::Additive), 35.0, 1e-12);
  EXPECT_NEAR(effectiveness_percent(0.2, EffectForm::DifferentEffects), 100.0 * (1.0 - std::exp(-0.2)), 1e-12);
}

TEST(SensitivityGrid, RestrictedCategories) {
  const auto grid = build_sensitivity_grid(base_spec(5, 3), {},
                                           {SensitivityCategory::GiMean, SensitivityCategory::CaseThreshold});
  ASSERT_EQ(grid.size(), 9u);
  std::size_t gi = 0;
  for (const auto& c : grid) gi += c.category == SensitivityCategory::GiMean;
  EXPECT_EQ(gi, 4u);
  EXPECT_EQ(grid[0].payload, "3.06");
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(grid[k].id, k);
}

TEST(SensitivityGrid, FullGridOn41CountriesAnd9Npis) {
  const auto base = base_spec(41, 9);
  const auto grid = build_sensitivity_grid(base);
  std::map<SensitivityCategory, std::size_t> per;
  for (const auto& c : grid) ++per[c.category];
  EXPECT_EQ(per[SensitivityCategory::LeaveOutCountry], 41u);
  EXPECT_EQ(per[SensitivityCategory::LeaveOutNpi], 9u);
  EXPECT_EQ(per[SensitivityCategory::CaseDelayShift], 4u);
  EXPECT_EQ(per[SensitivityCategory::DeathDelayShift], 4u);
  EXPECT_EQ(per[SensitivityCategory::GiMean], 4u);
  EXPECT_EQ(per[SensitivityCategory::R0PriorMean], 4u);
  EXPECT_EQ(per[SensitivityCategory::AlphaPrior], 2u);
  EXPECT_EQ(per[SensitivityCategory::CaseThreshold], 5u);
  EXPECT_EQ(per[SensitivityCategory::DeathThreshold], 4u);
  EXPECT_EQ(per[SensitivityCategory::AddInNpi], 0u);
  EXPECT_EQ(grid.size(), 77u);

  const auto with_add_ins = build_sensitivity_grid(base, {"School closing", "Stay at home", "N3"});
  EXPECT_EQ(with_add_ins.size(), 79u);  // N3 is already in the base
}

TEST(SensitivityGrid, DuplicateFreeAndOneFieldFromBase) {
  const auto base = base_spec(6, 4);
  const auto grid = build_sensitivity_grid(base, {"extra"});
  for (std::size_t a = 0; a < grid.size(); ++a) {
    EXPECT_FALSE(grid[a].spec == base);
    for (std::size_t b = a + 1; b < grid.size(); ++b) EXPECT_FALSE(grid[a].spec == grid[b].spec) << a << ' ' << b;
    const auto& s = grid[a].spec;
    const int changed = (s.case_delay_shift != base.case_delay_shift) + (s.death_delay_shift != base.death_delay_shift) +
                        (s.config.epi.gi_mean != base.config.epi.gi_mean) +
                        (s.config.priors.r0_mean != base.config.priors.r0_mean) +
                        (s.config.priors.alpha_prior != base.config.priors.alpha_prior) +
                        (s.rules.case_threshold != base.rules.case_threshold) +
                        (s.rules.death_threshold != base.rules.death_threshold) + (s.countries != base.countries) +
                        (s.npis != base.npis);
    EXPECT_EQ(changed, 1) << a;
  }
  const auto again = build_sensitivity_grid(base, {"extra"});
  ASSERT_EQ(again.size(), grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_EQ(again[k].payload, grid[k].payload);
    EXPECT_TRUE(again[k].spec == grid[k].spec);
  }
}

TEST(SensitivityGrid, AdditiveUsesDirichletConcentration) {
  const auto grid = build_sensitivity_grid(base_spec(3, 3, "additive"), {}, {SensitivityCategory::AlphaPrior});
  ASSERT_EQ(grid.size(), 2u);
  EXPECT_EQ(grid[0].payload, "dirichlet-5");
  EXPECT_EQ(grid[1].spec.config.priors.dirichlet_concentration, 10.0);
}

TEST(SensitivityGrid, DelayShiftMovesMeanOnly) {
  auto base = base_spec(3, 3);
  const auto grid = build_sensitivity_grid(base, {}, {SensitivityCategory::DeathDelayShift});
  const auto cfg = grid[0].spec.effective_config();
  EXPECT_DOUBLE_EQ(cfg.epi.death_delay.mean, base.config.epi.death_delay.mean - 4.0);
  EXPECT_EQ(cfg.epi.death_delay.dispersion, base.config.epi.death_delay.dispersion);
  EXPECT_EQ(cfg.epi.case_delay.mean, base.config.epi.case_delay.mean);
}

TEST(SensitivityGrid, CategoryNamesRoundTrip) {
  for (const auto& [cat, name] : sensitivity_category_names()) EXPECT_EQ(sensitivity_category_by_name(name), cat);
  EXPECT_THROW(sensitivity_category_by_name("gi"), LookupError);
}

TEST(SensitivityLoss, HandExamples) {
  const auto cat = SensitivityCategory::GiMean;
  EXPECT_DOUBLE_EQ(sensitivity_loss({result(cat, {{"A", 10}, {"B", 20}}), result(cat, {{"A", 14}, {"B", 20}})}, cat),
                   1.0);
  EXPECT_DOUBLE_EQ(sensitivity_loss({result(cat, {{"A", 0}}), result(cat, {{"A", 6}})}, cat), 3.0);
  EXPECT_EQ(sensitivity_loss({result(cat, {{"A", 7}, {"B", 3}}), result(cat, {{"A", 7}, {"B", 3}}),
                              result(cat, {{"A", 7}, {"B", 3}})},
                             cat),
            0.0);
}

TEST(SensitivityLoss, OtherCategoriesIgnored) {
  const auto cat = SensitivityCategory::CaseThreshold;
  EXPECT_DOUBLE_EQ(sensitivity_loss({result(cat, {{"A", 0}}), result(SensitivityCategory::GiMean, {{"A", 50}}),
                                     result(cat, {{"A", 6}})},
                                    cat),
                   3.0);
}

TEST(SensitivityLoss, Errors) {
  const auto cat = SensitivityCategory::AlphaPrior;
  EXPECT_THROW(sensitivity_loss({result(cat, {{"A", 1}})}, cat), UnavailableError);
  EXPECT_THROW(sensitivity_loss({result(cat, {{"A", 1}}), result(cat, {{"A", 2}}, EffectUnit::PercentAdditive)}, cat),
               UnavailableError);
}

TEST(SensitivityLoss, PermutationInvariantAndNonNegative) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-20.0, 80.0);
  const auto cat = SensitivityCategory::LeaveOutCountry;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SensitivityResult> rs;
    for (int k = 0; k < 5; ++k) rs.push_back(result(cat, {{"A", u(rng)}, {"B", u(rng)}, {"C", u(rng)}}));
    const double base = sensitivity_loss(rs, cat);
    EXPECT_GE(base, 0.0);
    std::shuffle(rs.begin(), rs.end(), rng);
    for (auto& r : rs) std::shuffle(r.npis.begin(), r.npis.end(), rng);
    EXPECT_NEAR(sensitivity_loss(rs, cat), base, 1e-12);
  }
}

TEST(SensitivityCsv, HeaderAndRows) {
  std::ostringstream os;
  write_sensitivity_header(os);
  auto r = result(SensitivityCategory::GiMean, {{"A", 12.5}, {"B", 30}});
  r.condition_id = 4;
  r.payload = "3.06";
  r.rhat_max = 1.01;
  r.divergences = 0;
  write_sensitivity_rows(os, r);
  EXPECT_EQ(os.str(),
            "condition_id,category,payload,npi,median_percent,ci_lower_2.5,ci_upper_97.5,rhat_max,divergences\n"
            "4,gi-mean,3.06,A,12.5,11.5,13.5,1.01,0\n"
            "4,gi-mean,3.06,B,30,29,31,1.01,0\n");
}

TEST(WorkerPool, EveryTaskConsumedOnce) {
  for (std::size_t workers : {1u, 3u, 16u}) {
    std::vector<int> seen(40, 0);
    long sum = 0;
    run_pool<long>(
        40, workers, [](std::size_t i) { return static_cast<long>(i * i); },
        [&](std::size_t i, long v) {
          ++seen[i];
          sum += v;
        });
    EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), 40);
    EXPECT_EQ(sum, 20540);
  }
  int calls = 0;
  run_pool<int>(0, 4, [](std::size_t) { return 0; }, [&](std::size_t, int) { ++calls; });
  EXPECT_EQ(calls, 0);
}

TEST(PrepareData, SelectsCountriesAndNpis) {
  const auto data = npi::testing::small_dataset("default", 2, 4, 3, 40);
  ExperimentSpec spec = base_spec(0, 0);
  spec.countries = {data.panel.countries[3], data.panel.countries[1]};
  spec.npis = {data.panel.npi_names[2]};
  const auto p = prepare_data(spec, data.panel, data.counts);
  EXPECT_EQ(p.panel.countries, spec.countries);
  EXPECT_EQ(p.panel.npi_names, spec.npis);
  EXPECT_EQ(p.counts.countries, spec.countries);
  for (std::size_t t = 0; t < 40; ++t) {
    EXPECT_EQ(p.panel.at(0, t, 0), data.panel.at(2, t, 3));
    EXPECT_EQ(p.counts.deaths(t, 1), data.counts.deaths(t, 1));
  }
  spec.npis = {"nope"};
  EXPECT_THROW(prepare_data(spec, data.panel, data.counts), LookupError);
}

TEST(RunCondition, FailureIsRecorded) {
  const auto data = npi::testing::small_dataset("default", 2, 2, 2, 30);
  SensitivityCondition cond;
  cond.spec = base_spec(0, 0);
  cond.spec.countries = {"missing"};
  const auto r = run_condition(cond, data.panel, data.counts, {});
  EXPECT_FALSE(r.error.empty());
  EXPECT_TRUE(r.npis.empty());
}

TEST(CrossValidation, Partition) {
  const auto names = codes(7);
  const auto parts = partition_countries(names, 3);
  EXPECT_EQ(parts[0], (std::vector<std::string>{"C0", "C3", "C6"}));
  EXPECT_EQ(parts[2], (std::vector<std::string>{"C2", "C5"}));
  const auto loo = partition_countries(names, 7);
  for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(loo[k], std::vector<std::string>{names[k]});
  EXPECT_THROW(partition_countries(codes(3), 4), PartitionError);
  EXPECT_THROW(partition_countries(codes(3), 0), PartitionError);
}

TEST(CrossValidation, SinglePointGridReturnedUnchanged) {
  const auto data = npi::testing::small_dataset("default", 2, 4, 2, 30);
  const auto res = crossvalidate(data.panel, data.counts, ModelConfig::for_variant("default"), {0.37}, {});
  EXPECT_EQ(res.selected, 0.37);
  EXPECT_THROW(crossvalidate(data.panel, data.counts, ModelConfig::for_variant("default"), {0.1, 0.2}, {}, 5),
               PartitionError);
}
