#pragma once

// Forward simulation of complete synthetic datasets at known parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "npi/epi.hpp"
#include "npi/infection.hpp"
#include "npi/model.hpp"
#include "npi/panel.hpp"
#include "npi/seeding.hpp"
#include "npi/transmission.hpp"

namespace npi {

/// How NPI switch-on (and optional switch-off) days are drawn per country.
struct ScheduleSettings {
  double activation_lo = 0.10;  ///< earliest activation as a fraction of the window
  double activation_hi = 0.60;  ///< latest activation as a fraction of the window
  double never_active_probability = 0.0;
  double lift_probability = 0.0;  ///< chance an active NPI is lifted again
  int min_active_days = 20;       ///< lifted NPIs stay on at least this long
  int max_resamples = 1000;
};

struct Scenario {
  std::size_t n_countries = 20;
  std::size_t n_days = 100;
  std::size_t n_npis = 9;
  ModelVariant variant = variant_by_name("default");
  EpiParams epi;
  double sigma_alpha = kDefaultSigmaAlpha;
  /// True effects. Multiplicative forms: per-NPI log reductions. Additive:
  /// simplex weights with `alpha_hat` as the residual. Empty selects a preset.
  std::vector<double> alpha;
  double alpha_hat = 0.0;
  std::vector<double> r0;         ///< empty: drawn around 3.25
  std::vector<double> n0_cases;   ///< empty: drawn log-uniform on [5, 50]
  std::vector<double> n0_deaths;  ///< empty: drawn log-uniform on [0.2, 2]
  double psi_cases = 10.0;        ///< infinity gives rounded expected counts
  double psi_deaths = 10.0;
  ScheduleSettings schedule;
  std::uint64_t seed = 1;
  std::string start_date = "2020-02-01";
};

/// Every latent quantity behind a simulated dataset.
struct TruthRecord {
  EffectParams effects;
  std::vector<double> r0, n0_cases, n0_deaths;
  double psi_cases = 0.0, psi_deaths = 0.0;
  Grid r, eps_cases, eps_deaths;
  LatentInfections infections;
  Grid expected_cases, expected_deaths;
};

struct SimulatedDataset {
  NpiPanel panel;
  CountData counts;
  TruthRecord truth;
  std::vector<std::string> warnings;
};

/// Preset log-reductions, cycled when more NPIs are requested.
inline std::vector<double> default_true_alpha(std::size_t n_npis) {
  static const double preset[] = {0.02, 0.05, 0.10, 0.12, 0.15, 0.20, 0.25, 0.30, 0.30};
  std::vector<double> out(n_npis);
  for (std::size_t i = 0; i < n_npis; ++i) out[i] = preset[i % 9];
  return out;
}

namespace detail {
inline std::vector<std::string> default_names(const char* prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(prefix + std::to_string(k + 1));
  return out;
}

inline bool every_npi_active(const NpiPanel& x) {
  std::vector<bool> seen(x.n_npis(), false);
  for (std::size_t c = 0; c < x.n_countries(); ++c)
    for (std::size_t t = 0; t < x.n_days; ++t)
      for (std::size_t i = 0; i < x.n_npis(); ++i)
        if (x.at(i, t, c)) seen[i] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

inline std::size_t distinct_orderings(const std::vector<std::vector<long>>& onset) {
  std::set<std::vector<std::size_t>> orders;
  for (const auto& days : onset) {
    std::vector<std::size_t> idx(days.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return days[a] < days[b]; });
    orders.insert(idx);
  }
  return orders.size();
}
}  // namespace detail

/// Staggered monotone schedule: each NPI switches on once per country on an
/// independently drawn day and optionally switches off once. Redrawn until
/// every NPI is active somewhere and at least two countries order the
/// activations differently (when the panel is large enough for that).
inline NpiPanel random_schedule(std::size_t n_npis, std::size_t n_days, std::size_t n_countries, std::uint64_t seed,
                                const ScheduleSettings& s = {}, std::vector<std::string> npi_names = {},
                                std::vector<std::string> countries = {},
                                std::chrono::sys_days start = parse_iso_date("2020-02-01")) {
  if (npi_names.empty()) npi_names = detail::default_names("npi_", n_npis);
  if (countries.empty()) countries = detail::default_names("C", n_countries);
  if (npi_names.size() != n_npis || countries.size() != n_countries) throw ShapeError("name lists do not match sizes");
  std::mt19937_64 rng(derive_seed("schedule", seed));
  const long T = static_cast<long>(n_days);
  const long lo = std::clamp(static_cast<long>(std::lround(s.activation_lo * T)), 0L, std::max(0L, T - 1));
  const long hi = std::max(lo, std::min(T - 1, static_cast<long>(std::lround(s.activation_hi * T))));
  const bool need_orderings = n_countries >= 2 && n_npis >= 2 && hi > lo;
  NpiPanel best;
  for (int attempt = 0; attempt <= s.max_resamples; ++attempt) {
    NpiPanel x(npi_names, countries, start, n_days);
    std::vector<std::vector<long>> onset(n_countries, std::vector<long>(n_npis, T));
    std::uniform_int_distribution<long> day(lo, hi);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t c = 0; c < n_countries; ++c)
      for (std::size_t i = 0; i < n_npis; ++i) {
        if (u(rng) < s.never_active_probability) continue;
        const long on = day(rng);
        long off = T;
        if (u(rng) < s.lift_probability && on + s.min_active_days < T)
          off = std::uniform_int_distribution<long>(on + s.min_active_days, T - 1)(rng);
        onset[c][i] = on;
        for (long t = on; t < off; ++t) x.set(i, static_cast<std::size_t>(t), c, true);
      }
    best = std::move(x);
    if (detail::every_npi_active(best) && (!need_orderings || detail::distinct_orderings(onset) >= 2)) break;
  }
  return best;
}

namespace detail {
inline double draw_count(std::mt19937_64& rng, double mu, double psi) {
  if (!(mu > 0.0)) return 0.0;
  if (std::isinf(psi)) return std::round(mu);
  const double lambda = std::gamma_distribution<double>(psi, mu / psi)(rng);
  if (lambda > 1e15) return std::round(lambda);
  return static_cast<double>(std::poisson_distribution<long long>(lambda)(rng));
}
}  // namespace detail

/// Draws noise, propagates infections, convolves delays and samples NB counts.
/// Masks are left unset.
inline SimulatedDataset simulate_dataset(const Scenario& sc) {
  sc.variant.validate();
  if (sc.n_days < 1 || sc.n_countries < 1) throw ShapeError("scenario needs at least one day and one country");
  SimulatedDataset out;
  const std::size_t C = sc.n_countries, T = sc.n_days, I = sc.n_npis;
  out.panel = random_schedule(I, T, C, sc.seed, sc.schedule, {}, {}, parse_iso_date(sc.start_date));
  std::mt19937_64 rng(derive_seed("simulate", sc.seed));
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  auto& truth = out.truth;
  const bool additive = sc.variant.effect == EffectForm::Additive;
  truth.effects.alpha = sc.alpha;
  truth.effects.alpha_hat = sc.alpha_hat;
  if (truth.effects.alpha.empty()) {
    if (additive) {
      truth.effects.alpha.assign(I, 0.5 / static_cast<double>(std::max<std::size_t>(I, 1)));
      truth.effects.alpha_hat = 0.5;
    } else {
      truth.effects.alpha = default_true_alpha(I);
    }
  }
  if (truth.effects.alpha.size() != I) throw ShapeError("true alpha length differs from n_npis");
  truth.effects.sigma_alpha = sc.sigma_alpha;
  if (sc.variant.effect == EffectForm::DifferentEffects) {
    truth.effects.alpha_country.resize(I * C);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t c = 0; c < C; ++c)
        truth.effects.alpha_country[i * C + c] = truth.effects.alpha[i] + sc.sigma_alpha * n01(rng);
  }
  truth.r0 = sc.r0;
  if (truth.r0.empty())
    for (std::size_t c = 0; c < C; ++c) truth.r0.push_back(std::max(1.5, 3.25 + 0.3 * n01(rng)));
  auto log_uniform = [&](double a, double b) { return std::exp(std::log(a) + u01(rng) * (std::log(b) - std::log(a))); };
  truth.n0_cases = sc.n0_cases;
  truth.n0_deaths = sc.n0_deaths;
  if (truth.n0_cases.empty())
    for (std::size_t c = 0; c < C; ++c) truth.n0_cases.push_back(log_uniform(5.0, 50.0));
  if (truth.n0_deaths.empty())
    for (std::size_t c = 0; c < C; ++c) truth.n0_deaths.push_back(log_uniform(0.2, 2.0));
  if (truth.r0.size() != C || truth.n0_cases.size() != C || truth.n0_deaths.size() != C)
    throw ShapeError("per-country truths must have n_countries entries");
  truth.psi_cases = sc.psi_cases;
  truth.psi_deaths = sc.psi_deaths;

  const R0Params r0{truth.r0, 3.25};
  truth.r = additive ? rt_additive(r0, truth.effects, out.panel) : rt_multiplicative(r0, truth.effects, out.panel);

  truth.eps_cases = Grid(T, C, 0.0);
  truth.eps_deaths = Grid(T, C, 0.0);
  const auto& noise = sc.variant.noise;
  if (noise.kind != NoiseKind::None)
    for (Grid* g : {&truth.eps_cases, &truth.eps_deaths})
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 1; t < T; ++t) (*g)(t, c) = noise.sigma * n01(rng);

  const auto gi = sc.epi.generation_interval();
  auto propagate = [&](const std::vector<double>& n0, const Grid& eps) {
    if (sc.variant.process == InfectionProcess::DiscreteRenewal) {
      const Grid r = apply_noise(truth.r, noise, eps, eps).first;
      return propagate_renewal(n0, r, discretize_generation_interval(gi));
    }
    Grid m(T, C);
    Grid r = truth.r;
    if (noise.kind == NoiseKind::ReproductionNumber) r = apply_noise(truth.r, noise, eps, eps).first;
    for (std::size_t k = 0; k < m.raw().size(); ++k) m.raw()[k] = r_to_growth(r.raw()[k], gi);
    if (noise.kind == NoiseKind::GrowthRate) m = apply_noise(m, noise, eps, eps).first;
    return propagate_growth(n0, m);
  };
  truth.infections.n_cases = propagate(truth.n0_cases, truth.eps_cases);
  truth.infections.n_deaths = propagate(truth.n0_deaths, truth.eps_deaths);
  truth.expected_cases = expected_counts(truth.infections.n_cases, discretize_delay(sc.epi.case_delay));
  truth.expected_deaths = expected_counts(truth.infections.n_deaths, discretize_delay(sc.epi.death_delay));

  out.counts = CountData(out.panel.countries, out.panel.start, T);
  std::mt19937_64 obs_rng(derive_seed("observe", sc.seed));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < T; ++t) {
      out.counts.cases(t, c) = detail::draw_count(obs_rng, truth.expected_cases(t, c), truth.psi_cases);
      out.counts.deaths(t, c) = detail::draw_count(obs_rng, truth.expected_deaths(t, c), truth.psi_deaths);
    }

  for (std::size_t i = 0; i < I; ++i) {
    bool active = false;
    for (std::size_t c = 0; c < C && !active; ++c)
      for (std::size_t t = 0; t < T && !active; ++t) active = out.panel.at(i, t, c);
    if (!active) out.warnings.push_back("NPI " + out.panel.npi_names[i] + " is never active; its effect is not identifiable");
  }
  return out;
}

}  // namespace npi
