#pragma once

// Experiment harness: observation masking, holdout splits and predictive
// scoring, the sensitivity grid with its loss, cross-validation of the noise
// scale, and a bounded worker pool for running conditions.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "npi/distributions.hpp"
#include "npi/errors.hpp"
#include "npi/inference.hpp"
#include "npi/model.hpp"
#include "npi/panel.hpp"
#include "npi/seeding.hpp"
#include "npi/trace.hpp"

namespace npi {

// ---------------------------------------------------------------------------
// Masking

struct MaskRules {
  double case_threshold = 100.0;  ///< cumulative cases before which case days are masked
  double death_threshold = 10.0;  ///< cumulative deaths before which death days are masked
  int case_window_lag = 3;        ///< case days masked from this many days after the first NPI lift
  int death_window_lag = 12;

  void validate() const {
    if (!(case_threshold >= 0.0) || !(death_threshold >= 0.0)) throw ConfigError("mask thresholds must be >= 0");
    if (case_window_lag < 0 || death_window_lag < 0) throw ConfigError("mask lags must be >= 0");
  }
  bool operator==(const MaskRules&) const = default;
};

struct MaskedCounts {
  CountData counts;
  std::vector<std::string> warnings;
};

/// First day on which any NPI switches from active to inactive in country c.
inline std::optional<std::size_t> first_lift_day(const NpiPanel& x, std::size_t c) {
  for (std::size_t t = 1; t < x.n_days; ++t)
    for (std::size_t i = 0; i < x.n_npis(); ++i)
      if (x.at(i, t - 1, c) && !x.at(i, t, c)) return t;
  return std::nullopt;
}

/// Masks each stream before its cumulative threshold is reached and from
/// (first lift + lag) onwards. Existing masks are kept.
inline MaskedCounts preprocess_mask(const CountData& counts, const NpiPanel& npis, const MaskRules& rules = {}) {
  rules.validate();
  if (npis.n_days != counts.n_days() || npis.countries != counts.countries)
    throw ShapeError("NPI panel and counts cover different countries or days");
  MaskedCounts out{counts, {}};
  const std::size_t T = counts.n_days();
  for (std::size_t c = 0; c < counts.n_countries(); ++c) {
    const auto lift = first_lift_day(npis, c);
    auto apply = [&](const Grid& y, MaskGrid& mask, double threshold, int lag, const char* label) {
      double cumulative = 0.0;
      std::optional<std::size_t> reached;
      for (std::size_t t = 0; t < T; ++t) {
        if (!mask(t, c) && std::isfinite(y(t, c))) cumulative += y(t, c);
        if (cumulative >= threshold) {
          reached = t;
          break;
        }
      }
      const std::size_t first = reached.value_or(T);
      if (!reached)
        out.warnings.push_back(counts.countries[c] + ": " + label + " never reach " + std::to_string(threshold) +
                               "; stream fully masked");
      for (std::size_t t = 0; t < std::min(first, T); ++t) mask.set(t, c, true);
      if (lift)
        for (std::size_t t = *lift + static_cast<std::size_t>(lag); t < T; ++t) mask.set(t, c, true);
    };
    apply(counts.cases, out.counts.case_mask, rules.case_threshold, rules.case_window_lag, "cases");
    apply(counts.deaths, out.counts.death_mask, rules.death_threshold, rules.death_window_lag, "deaths");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Holdout

inline const std::vector<std::string>& default_test_countries() {
  static const std::vector<std::string> codes{"Germany", "Romania", "Mexico", "Italy", "Austria", "Portugal"};
  return codes;
}

struct HoldoutSplit {
  CountData train;    ///< test countries masked after their kept days
  CountData heldout;  ///< everything masked except the held-out cells
  std::vector<std::size_t> test_countries;
};

/// Test countries keep their first `keep_days` unmasked days per stream in the
/// training view; the rest of their unmasked days form the heldout view.
inline HoldoutSplit holdout_split(const CountData& data, const std::vector<std::string>& test_countries,
                                  std::size_t keep_days = 14) {
  HoldoutSplit out{data, data, {}};
  const std::size_t T = data.n_days();
  for (std::size_t c = 0; c < data.n_countries(); ++c)
    for (std::size_t t = 0; t < T; ++t) {
      out.heldout.case_mask.set(t, c, true);
      out.heldout.death_mask.set(t, c, true);
    }
  for (const auto& code : test_countries) {
    const auto it = std::find(data.countries.begin(), data.countries.end(), code);
    if (it == data.countries.end()) throw LookupError("unknown test country: " + code);
    const auto c = static_cast<std::size_t>(it - data.countries.begin());
    out.test_countries.push_back(c);
    auto split = [&](const MaskGrid& mask, MaskGrid& train, MaskGrid& heldout) {
      std::size_t seen = 0;
      for (std::size_t t = 0; t < T; ++t) {
        if (mask(t, c)) continue;
        if (seen++ < keep_days) continue;
        train.set(t, c, true);
        heldout.set(t, c, false);
      }
    };
    split(data.case_mask, out.train.case_mask, out.heldout.case_mask);
    split(data.death_mask, out.train.death_mask, out.heldout.death_mask);
  }
  return out;
}

struct PredictiveScore {
  double cases = NAN;   ///< NaN when the model has no case stream or no case cells are held out
  double deaths = NAN;
  std::size_t case_cells = 0, death_cells = 0;

  /// Sum over the streams that were scored.
  double total() const { return (std::isnan(cases) ? 0.0 : cases) + (std::isnan(deaths) ? 0.0 : deaths); }
};

/// Pointwise predictive log-likelihood: for every heldout cell, the log of the
/// NB likelihood averaged over posterior draws, summed over cells per stream.
/// For every draw the noise on days after the last training observation of
/// each country and stream is redrawn from its prior, since the fit carries
/// no information about it. `model` must be the one the trace was fitted with.
inline PredictiveScore predictive_loglik(const Model& model, const Trace& trace, const CountData& heldout,
                                         std::uint64_t seed) {
  const auto& L = model.layout();
  const auto& train = model.counts();
  if (heldout.n_days() != L.n_days || heldout.countries != train.countries)
    throw ShapeError("heldout view does not match the fitted model");
  if (trace.n_params() != model.constrained_dimension() || trace.n_chains * trace.n_samples == 0)
    throw ShapeError("trace does not belong to this model");
  PredictiveScore score;
  auto count_cells = [&](const MaskGrid& m) {
    std::size_t n = 0;
    for (std::size_t c = 0; c < L.n_countries; ++c)
      for (std::size_t t = 0; t < L.n_days; ++t) n += m(t, c) ? 0 : 1;
    return n;
  };
  score.case_cells = L.cases ? count_cells(heldout.case_mask) : 0;
  score.death_cells = count_cells(heldout.death_mask);
  if (score.case_cells + score.death_cells == 0) throw UnavailableError("heldout view has no unmasked cells");

  // First day whose noise is redrawn, per stream and country.
  auto fresh_from = [&](const MaskGrid& m, std::size_t c) {
    std::size_t last = 0;
    for (std::size_t t = 0; t < L.n_days; ++t)
      if (!m(t, c)) last = t;
    return last + 1;
  };
  const double sigma = model.config().variant.noise.sigma;
  std::mt19937_64 rng(derive_seed("predictive", seed));
  std::normal_distribution<double> normal(0.0, sigma);
  const std::size_t psi_cases_idx = L.cases ? trace.index_of("psi_cases") : 0;
  const std::size_t psi_deaths_idx = trace.index_of("psi_deaths");

  // Cell log-likelihoods, one row per cell, one column per draw.
  const std::size_t n_draws = trace.n_chains * trace.n_samples;
  std::vector<double> ll_cases(score.case_cells * n_draws), ll_deaths(score.death_cells * n_draws);
  std::size_t draw = 0;
  for (std::size_t ch = 0; ch < trace.n_chains; ++ch)
    for (std::size_t s = 0; s < trace.n_samples; ++s, ++draw) {
      const double* d = trace.draw(ch, s);
      auto theta = model.unconstrain(std::span<const double>(d, trace.n_params()));
      if (L.noise)
        for (int stream = L.cases ? 0 : 1; stream < 2; ++stream) {
          const bool is_cases = stream == 0;
          for (std::size_t c = 0; c < L.n_countries; ++c)
            for (std::size_t t = std::max<std::size_t>(1, fresh_from(is_cases ? train.case_mask : train.death_mask, c));
                 t < L.n_days; ++t)
              theta[L.eps_index(is_cases, t, c)] = normal(rng);
        }
      const auto fw = model.forward(theta);
      auto cell_ll = [&](const Grid& y, const MaskGrid& m, const Grid& mu, double psi, std::vector<double>& out) {
        std::size_t cell = 0;
        for (std::size_t c = 0; c < L.n_countries; ++c)
          for (std::size_t t = 0; t < L.n_days; ++t)
            if (!m(t, c))
              out[cell++ * n_draws + draw] =
                  mu(t, c) > 0.0 ? nb_logpmf(y(t, c), mu(t, c), psi) : (y(t, c) == 0.0 ? 0.0 : -INFINITY);
      };
      if (score.case_cells)
        cell_ll(heldout.cases, heldout.case_mask, fw.expected_cases, d[psi_cases_idx], ll_cases);
      if (score.death_cells)
        cell_ll(heldout.deaths, heldout.death_mask, fw.expected_deaths, d[psi_deaths_idx], ll_deaths);
    }
  const double log_n = std::log(static_cast<double>(n_draws));
  auto lppd = [&](const std::vector<double>& ll, std::size_t cells) {
    double total = 0.0;
    for (std::size_t k = 0; k < cells; ++k)
      total += log_sum_exp(std::span<const double>(ll.data() + k * n_draws, n_draws)) - log_n;
    return total;
  };
  if (score.case_cells) score.cases = lppd(ll_cases, score.case_cells);
  if (score.death_cells) score.deaths = lppd(ll_deaths, score.death_cells);
  return score;
}

// ---------------------------------------------------------------------------
// Sensitivity grid

enum class SensitivityCategory {
  CaseDelayShift,
  DeathDelayShift,
  GiMean,
  R0PriorMean,
  AlphaPrior,
  LeaveOutCountry,
  CaseThreshold,
  DeathThreshold,
  LeaveOutNpi,
  AddInNpi,
};

inline const std::vector<std::pair<SensitivityCategory, std::string>>& sensitivity_category_names() {
  static const std::vector<std::pair<SensitivityCategory, std::string>> names{
      {SensitivityCategory::CaseDelayShift, "case-delay-shift"},
      {SensitivityCategory::DeathDelayShift, "death-delay-shift"},
      {SensitivityCategory::GiMean, "gi-mean"},
      {SensitivityCategory::R0PriorMean, "r0-prior-mean"},
      {SensitivityCategory::AlphaPrior, "alpha-prior"},
      {SensitivityCategory::LeaveOutCountry, "leave-out-country"},
      {SensitivityCategory::CaseThreshold, "case-threshold"},
      {SensitivityCategory::DeathThreshold, "death-threshold"},
      {SensitivityCategory::LeaveOutNpi, "leave-out-npi"},
      {SensitivityCategory::AddInNpi, "add-in-npi"},
  };
  return names;
}

inline std::string to_string(SensitivityCategory c) {
  for (const auto& [cat, name] : sensitivity_category_names())
    if (cat == c) return name;
  return "?";
}

inline SensitivityCategory sensitivity_category_by_name(const std::string& name) {
  for (const auto& [cat, n] : sensitivity_category_names())
    if (n == name) return cat;
  throw LookupError("unknown sensitivity category: " + name);
}

/// Everything a condition can vary: model configuration, masking rules and
/// which countries / NPI columns enter the fit.
struct ExperimentSpec {
  ModelConfig config;
  MaskRules rules;
  std::vector<std::string> countries;  ///< included countries
  std::vector<std::string> npis;       ///< included NPI columns
  double case_delay_shift = 0.0;       ///< days added to the case delay mean
  double death_delay_shift = 0.0;

  bool operator==(const ExperimentSpec& o) const {
    return config.priors.alpha_prior == o.config.priors.alpha_prior &&
           config.priors.dirichlet_concentration == o.config.priors.dirichlet_concentration &&
           config.priors.r0_mean == o.config.priors.r0_mean && config.epi.gi_mean == o.config.epi.gi_mean &&
           config.variant.name == o.config.variant.name && rules == o.rules && countries == o.countries &&
           npis == o.npis && case_delay_shift == o.case_delay_shift && death_delay_shift == o.death_delay_shift;
  }

  /// Model configuration with the delay shifts applied (dispersion unchanged).
  ModelConfig effective_config() const {
    ModelConfig cfg = config;
    cfg.epi.case_delay.mean += case_delay_shift;
    cfg.epi.death_delay.mean += death_delay_shift;
    return cfg;
  }
};

struct SensitivityCondition {
  std::size_t id = 0;
  SensitivityCategory category{};
  std::string payload;  ///< the varied value, as text
  ExperimentSpec spec;
};

/// Value lists per category. Each list contains the base value, which is
/// dropped when the grid is built.
struct SensitivityLists {
  std::vector<double> case_delay_shifts{-3.0, -1.5, 0.0, 1.5, 3.0};
  std::vector<double> death_delay_shifts{-4.0, -2.0, 0.0, 2.0, 4.0};
  std::vector<double> gi_means{3.06, 4.06, 5.06, 6.06, 7.06};
  std::vector<double> r0_means{2.38, 2.78, 3.25, 3.78, 4.28};
  std::vector<double> case_thresholds{10, 30, 50, 100, 200, 300};
  std::vector<double> death_thresholds{1, 5, 10, 30, 50};
  std::vector<double> dirichlet_concentrations{1.0, 5.0, 10.0};
};

inline std::string format_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

/// One condition per non-base value of each list, per included country and
/// NPI (left out), and per add-in column (added). `add_ins` are NPI columns
/// available in the data but absent from the base. An empty `categories`
/// selects all of them.
inline std::vector<SensitivityCondition> build_sensitivity_grid(const ExperimentSpec& base,
                                                                const std::vector<std::string>& add_ins = {},
                                                                const std::vector<SensitivityCategory>& categories = {},
                                                                const SensitivityLists& lists = {}) {
  base.config.validate();
  base.rules.validate();
  const auto wanted = [&](SensitivityCategory c) {
    return categories.empty() || std::find(categories.begin(), categories.end(), c) != categories.end();
  };
  std::vector<SensitivityCondition> out;
  auto add = [&](SensitivityCategory cat, std::string payload, ExperimentSpec spec) {
    if (spec == base) return;
    for (const auto& existing : out)
      if (existing.category == cat && existing.spec == spec) return;
    out.push_back({out.size(), cat, std::move(payload), std::move(spec)});
  };
  auto numeric = [&](SensitivityCategory cat, const std::vector<double>& values, auto&& setter) {
    if (!wanted(cat)) return;
    for (double v : values) {
      ExperimentSpec s = base;
      setter(s, v);
      add(cat, format_value(v), std::move(s));
    }
  };
  numeric(SensitivityCategory::CaseDelayShift, lists.case_delay_shifts,
          [&](ExperimentSpec& s, double v) { s.case_delay_shift = base.case_delay_shift + v; });
  numeric(SensitivityCategory::DeathDelayShift, lists.death_delay_shifts,
          [&](ExperimentSpec& s, double v) { s.death_delay_shift = base.death_delay_shift + v; });
  numeric(SensitivityCategory::GiMean, lists.gi_means, [](ExperimentSpec& s, double v) { s.config.epi.gi_mean = v; });
  numeric(SensitivityCategory::R0PriorMean, lists.r0_means,
          [](ExperimentSpec& s, double v) { s.config.priors.r0_mean = v; });
  if (wanted(SensitivityCategory::AlphaPrior)) {
    if (base.config.variant.effect == EffectForm::Additive) {
      for (double a : lists.dirichlet_concentrations) {
        ExperimentSpec s = base;
        s.config.priors.dirichlet_concentration = a;
        add(SensitivityCategory::AlphaPrior, "dirichlet-" + format_value(a), std::move(s));
      }
    } else {
      for (AlphaPrior p : {AlphaPrior::AsymmetricLaplace, AlphaPrior::Normal, AlphaPrior::HalfNormal}) {
        ExperimentSpec s = base;
        s.config.priors.alpha_prior = p;
        add(SensitivityCategory::AlphaPrior, to_string(p), std::move(s));
      }
    }
  }
  numeric(SensitivityCategory::CaseThreshold, lists.case_thresholds,
          [](ExperimentSpec& s, double v) { s.rules.case_threshold = v; });
  numeric(SensitivityCategory::DeathThreshold, lists.death_thresholds,
          [](ExperimentSpec& s, double v) { s.rules.death_threshold = v; });
  if (wanted(SensitivityCategory::LeaveOutCountry))
    for (const auto& code : base.countries) {
      ExperimentSpec s = base;
      std::erase(s.countries, code);
      add(SensitivityCategory::LeaveOutCountry, code, std::move(s));
    }
  if (wanted(SensitivityCategory::LeaveOutNpi))
    for (const auto& name : base.npis) {
      ExperimentSpec s = base;
      std::erase(s.npis, name);
      add(SensitivityCategory::LeaveOutNpi, name, std::move(s));
    }
  if (wanted(SensitivityCategory::AddInNpi))
    for (const auto& name : add_ins) {
      if (std::find(base.npis.begin(), base.npis.end(), name) != base.npis.end()) continue;
      ExperimentSpec s = base;
      s.npis.push_back(name);
      add(SensitivityCategory::AddInNpi, name, std::move(s));
    }
  return out;
}

/// Panel and masked counts an experiment selects from the full data.
struct PreparedData {
  NpiPanel panel;
  CountData counts;
  std::vector<std::string> warnings;
};

inline PreparedData prepare_data(const ExperimentSpec& spec, const NpiPanel& panel, const CountData& raw) {
  std::vector<std::size_t> npi_ids, country_ids, count_ids;
  for (const auto& n : spec.npis) npi_ids.push_back(panel.npi_index(n));
  for (const auto& c : spec.countries) {
    country_ids.push_back(panel.country_index(c));
    const auto it = std::find(raw.countries.begin(), raw.countries.end(), c);
    if (it == raw.countries.end()) throw LookupError("no counts for country " + c);
    count_ids.push_back(static_cast<std::size_t>(it - raw.countries.begin()));
  }
  PreparedData out;
  out.panel = panel.select(npi_ids, country_ids);
  auto masked = preprocess_mask(raw.select(count_ids), out.panel, spec.rules);
  out.counts = std::move(masked.counts);
  out.warnings = std::move(masked.warnings);
  return out;
}

// ---------------------------------------------------------------------------
// Effectiveness and sensitivity loss

enum class EffectUnit { PercentReductionInR, PercentAdditive };

inline EffectUnit effect_unit(EffectForm form) {
  return form == EffectForm::Additive ? EffectUnit::PercentAdditive : EffectUnit::PercentReductionInR;
}

inline double effectiveness_percent(double alpha, EffectForm form) {
  return form == EffectForm::Additive ? 100.0 * alpha : 100.0 * (1.0 - std::exp(-alpha));
}

struct NpiSummary {
  std::string npi;
  double median_percent = NAN;
  double ci_lower = NAN;  ///< 2.5% quantile
  double ci_upper = NAN;  ///< 97.5% quantile
};

struct SensitivityResult {
  std::size_t condition_id = 0;
  SensitivityCategory category{};
  std::string payload;
  EffectUnit unit = EffectUnit::PercentReductionInR;
  std::vector<NpiSummary> npis;
  double rhat_max = NAN;
  std::size_t divergences = 0;
  std::string error;  ///< non-empty when the fit failed
};

/// Per-NPI effectiveness summaries from a trace.
inline std::vector<NpiSummary> summarize_effects(const Trace& trace, const NpiPanel& panel, EffectForm form) {
  std::vector<NpiSummary> out;
  for (const auto& name : panel.npi_names) {
    auto col = trace.column(trace.index_of("alpha[" + name + "]"));
    for (double& a : col) a = effectiveness_percent(a, form);
    out.push_back({name, quantile(col, 0.5), quantile(col, 0.025), quantile(col, 0.975)});
  }
  return out;
}

/// Mean over NPIs of the population standard deviation of median
/// effectiveness across the category's conditions. An NPI absent from some
/// conditions (left out) contributes over the conditions that include it.
inline double sensitivity_loss(const std::vector<SensitivityResult>& results, SensitivityCategory category) {
  std::map<std::string, std::vector<double>> medians;
  std::optional<EffectUnit> unit;
  std::size_t n_conditions = 0;
  for (const auto& r : results) {
    if (r.category != category || !r.error.empty()) continue;
    if (unit && *unit != r.unit) throw UnavailableError("sensitivity loss over mixed effectiveness units");
    unit = r.unit;
    ++n_conditions;
    for (const auto& s : r.npis) medians[s.npi].push_back(s.median_percent);
  }
  if (n_conditions < 2) throw UnavailableError("sensitivity loss needs at least two conditions in the category");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [name, v] : medians) {
    if (v.size() < 2) continue;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    total += std::sqrt(ss / static_cast<double>(v.size()));
    ++n;
  }
  if (n == 0) throw UnavailableError("no NPI appears in two conditions of the category");
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Running conditions

/// Unbounded multi-producer, single-consumer queue.
template <typename T>
class Channel {
 public:
  void send(T value) {
    {
      std::lock_guard lock(mu_);
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }
  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  /// Blocks until an item arrives; empty once closed and drained.
  std::optional<T> receive() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
  bool closed_ = false;
};

/// Runs `task(i)` for i in [0, n) on at most `workers` threads and hands each
/// result to `consume` on the calling thread, in completion order.
template <typename R>
void run_pool(std::size_t n, std::size_t workers, const std::function<R(std::size_t)>& task,
              const std::function<void(std::size_t, R)>& consume) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  Channel<std::pair<std::size_t, R>> channel;
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  std::atomic<std::size_t> running{workers};
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) channel.send({i, task(i)});
      if (--running == 0) channel.close();
    });
  while (auto item = channel.receive()) consume(item->first, std::move(item->second));
}

inline SensitivityResult run_condition(const SensitivityCondition& cond, const NpiPanel& panel, const CountData& raw,
                                       const FitSettings& fit) {
  SensitivityResult res;
  res.condition_id = cond.id;
  res.category = cond.category;
  res.payload = cond.payload;
  const ModelConfig cfg = cond.spec.effective_config();
  res.unit = effect_unit(cfg.variant.effect);
  try {
    const auto data = prepare_data(cond.spec, panel, raw);
    const Model model(cfg, data.panel, data.counts);
    const auto result = sample_posterior(model, fit);
    res.npis = summarize_effects(result.trace, data.panel, cfg.variant.effect);
    res.rhat_max = result.max_rhat;
    res.divergences = result.divergences;
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

inline void write_sensitivity_header(std::ostream& os) {
  os << "condition_id,category,payload,npi,median_percent,ci_lower_2.5,ci_upper_97.5,rhat_max,divergences\n";
}

inline void write_sensitivity_rows(std::ostream& os, const SensitivityResult& r) {
  for (const auto& s : r.npis)
    os << r.condition_id << ',' << to_string(r.category) << ',' << r.payload << ',' << s.npi << ','
       << format_double(s.median_percent) << ',' << format_double(s.ci_lower) << ',' << format_double(s.ci_upper)
       << ',' << format_double(r.rhat_max) << ',' << r.divergences << '\n';
}

/// Fits every condition on a bounded pool and returns results ordered by
/// condition id. Each row set is also streamed to `csv` (if given) as it
/// completes.
inline std::vector<SensitivityResult> run_sensitivity(const std::vector<SensitivityCondition>& conditions,
                                                      const NpiPanel& panel, const CountData& raw,
                                                      const FitSettings& fit, std::size_t workers = 1,
                                                      std::ostream* csv = nullptr) {
  std::vector<SensitivityResult> results(conditions.size());
  if (csv) write_sensitivity_header(*csv);
  run_pool<SensitivityResult>(
      conditions.size(), workers,
      [&](std::size_t i) { return run_condition(conditions[i], panel, raw, fit); },
      [&](std::size_t i, SensitivityResult r) {
        if (csv) write_sensitivity_rows(*csv, r);
        results[i] = std::move(r);
      });
  return results;
}

// ---------------------------------------------------------------------------
// Cross-validation

/// Countries assigned to folds round-robin in data order.
inline std::vector<std::vector<std::string>> partition_countries(const std::vector<std::string>& countries,
                                                                 std::size_t folds) {
  if (folds < 1 || countries.size() < folds)
    throw PartitionError("cannot split " + std::to_string(countries.size()) + " countries into " +
                         std::to_string(folds) + " folds");
  std::vector<std::vector<std::string>> out(folds);
  for (std::size_t k = 0; k < countries.size(); ++k) out[k % folds].push_back(countries[k]);
  return out;
}

struct CrossValidationResult {
  double selected = NAN;
  std::vector<double> grid;
  std::vector<double> mean_loglik;  ///< per grid value, averaged over folds
};

/// Picks the noise scale maximising the mean heldout predictive
/// log-likelihood over folds. `data` must already be masked.
inline CrossValidationResult crossvalidate(const NpiPanel& panel, const CountData& data, const ModelConfig& base,
                                           const std::vector<double>& noise_grid, const FitSettings& fit,
                                           std::size_t folds = 4, std::size_t keep_days = 14) {
  if (noise_grid.empty()) throw ConfigError("cross-validation needs a non-empty grid");
  const auto parts = partition_countries(data.countries, folds);
  CrossValidationResult out;
  out.grid = noise_grid;
  if (noise_grid.size() == 1) {
    out.selected = noise_grid.front();
    return out;
  }
  for (double sigma : noise_grid) {
    ModelConfig cfg = base;
    cfg.variant.noise.sigma = sigma;
    double total = 0.0;
    for (std::size_t f = 0; f < parts.size(); ++f) {
      const auto split = holdout_split(data, parts[f], keep_days);
      const Model model(cfg, panel, split.train);
      FitSettings fs = fit;
      fs.seed = derive_seed("cv-fold", fit.seed, f);
      const auto res = sample_posterior(model, fs);
      total += predictive_loglik(model, res.trace, split.heldout, fs.seed).total();
    }
    out.mean_loglik.push_back(total / static_cast<double>(parts.size()));
  }
  const auto best = std::max_element(out.mean_loglik.begin(), out.mean_loglik.end()) - out.mean_loglik.begin();
  out.selected = noise_grid[static_cast<std::size_t>(best)];
  return out;
}

}  // namespace npi
