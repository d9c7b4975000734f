#pragma once

// Reproduction-number models (how NPI activations reduce R) and the
// placement of latent transmission noise. Also the registry of the eight
// named model variants.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "npi/errors.hpp"
#include "npi/panel.hpp"

namespace npi {

enum class EffectForm { Multiplicative, Additive, DifferentEffects };
enum class NoiseKind { GrowthRate, ReproductionNumber, None };
enum class InfectionProcess { ExponentialGrowth, DiscreteRenewal };
enum class OutputSet { CasesAndDeaths, DeathsOnly };

struct NoisePlacement {
  NoiseKind kind = NoiseKind::GrowthRate;
  double sigma = 0.2;

  void validate() const {
    if (kind != NoiseKind::None && !(sigma > 0.0))
      throw ConfigError("noise placement requires a positive noise scale");
  }
  bool operator==(const NoisePlacement&) const = default;
};

struct ModelVariant {
  std::string name;
  EffectForm effect = EffectForm::Multiplicative;
  NoisePlacement noise;
  InfectionProcess process = InfectionProcess::ExponentialGrowth;
  OutputSet outputs = OutputSet::CasesAndDeaths;

  bool models_cases() const { return outputs == OutputSet::CasesAndDeaths; }
  bool has_noise() const { return noise.kind != NoiseKind::None; }

  void validate() const {
    noise.validate();
    if (process == InfectionProcess::DiscreteRenewal && noise.kind == NoiseKind::GrowthRate)
      throw ConfigError("discrete renewal process takes noise on R (or none), not on the growth rate");
  }
};

// Scales used when a variant's noise sits on R, and the across-country spread
// of effects. Neither has a published value; both are tunable by cross-validation.
inline constexpr double kDefaultSigmaGrowth = 0.2;
inline constexpr double kDefaultSigmaR = 0.2;
inline constexpr double kDefaultSigmaAlpha = 0.1;

inline const std::array<std::string_view, 8>& variant_names() {
  static const std::array<std::string_view, 8> names = {
      "default",          "additive",       "different-effects", "noisy-r",
      "discrete-renewal", "deaths-only-dr", "flaxman",           "default-no-noise"};
  return names;
}

/// The eight named model configurations.
inline ModelVariant variant_by_name(std::string_view name) {
  using enum EffectForm;
  const NoisePlacement growth{NoiseKind::GrowthRate, kDefaultSigmaGrowth};
  const NoisePlacement on_r{NoiseKind::ReproductionNumber, kDefaultSigmaR};
  const NoisePlacement none{NoiseKind::None, 0.0};
  const auto exp_growth = InfectionProcess::ExponentialGrowth;
  const auto renewal = InfectionProcess::DiscreteRenewal;
  const auto both = OutputSet::CasesAndDeaths;
  const auto deaths = OutputSet::DeathsOnly;
  const std::string n(name);
  if (n == "default") return {n, Multiplicative, growth, exp_growth, both};
  if (n == "additive") return {n, Additive, growth, exp_growth, both};
  if (n == "different-effects") return {n, DifferentEffects, growth, exp_growth, both};
  if (n == "noisy-r") return {n, Multiplicative, on_r, exp_growth, both};
  if (n == "discrete-renewal") return {n, Multiplicative, on_r, renewal, both};
  if (n == "deaths-only-dr") return {n, Multiplicative, on_r, renewal, deaths};
  if (n == "flaxman") return {n, Multiplicative, none, renewal, deaths};
  if (n == "default-no-noise") return {n, Multiplicative, none, exp_growth, both};
  throw ConfigError("unknown model variant: " + n);
}

/// Effectiveness parameters for one effect form.
struct EffectParams {
  std::vector<double> alpha;          ///< per NPI
  double alpha_hat = 0.0;             ///< residual transmission fraction (additive only)
  std::vector<double> alpha_country;  ///< [npi * n_countries + c] (different effects only)
  double sigma_alpha = kDefaultSigmaAlpha;

  double country_alpha(std::size_t i, std::size_t c, std::size_t n_countries) const {
    return alpha_country.empty() ? alpha[i] : alpha_country[i * n_countries + c];
  }
};

struct R0Params {
  std::vector<double> r0;  ///< per country
  double prior_mean = 3.25;
};

namespace detail {
inline void check_r0(const R0Params& r0, const NpiPanel& x) {
  if (r0.r0.size() != x.n_countries()) throw ShapeError("R0 vector length differs from panel country count");
  for (double v : r0.r0)
    if (!(v > 0.0)) throw DomainError("R0 must be positive");
}
}  // namespace detail

/// R[t, c] = R0[c] * exp(-sum_i alpha_i x[i, t, c]); with per-country alphas
/// when `effects.alpha_country` is filled (different-effects form).
inline Grid rt_multiplicative(const R0Params& r0, const EffectParams& effects, const NpiPanel& x) {
  detail::check_r0(r0, x);
  const std::size_t n_c = x.n_countries();
  if (effects.alpha.size() != x.n_npis()) throw ShapeError("alpha length differs from NPI count");
  if (!effects.alpha_country.empty() && effects.alpha_country.size() != x.n_npis() * n_c)
    throw ShapeError("alpha_country must be n_npis x n_countries");
  Grid out(x.n_days, n_c);
  for (std::size_t c = 0; c < n_c; ++c)
    for (std::size_t t = 0; t < x.n_days; ++t) {
      double reduction = 0.0;
      const auto row = x.row(t, c);
      for (std::size_t i = 0; i < row.size(); ++i)
        if (row[i]) reduction += effects.country_alpha(i, c, n_c);
      out(t, c) = r0.r0[c] * std::exp(-reduction);
    }
  return out;
}

/// R[t, c] = R0[c] * (alpha_hat + sum_i alpha_i (1 - x[i, t, c])) with the
/// fractions on the simplex.
inline Grid rt_additive(const R0Params& r0, const EffectParams& effects, const NpiPanel& x) {
  detail::check_r0(r0, x);
  if (effects.alpha.size() != x.n_npis()) throw ShapeError("alpha length differs from NPI count");
  double total = effects.alpha_hat;
  if (!(effects.alpha_hat > 0.0)) throw DomainError("additive effects: alpha_hat must be positive");
  for (double a : effects.alpha) {
    if (!(a > 0.0)) throw DomainError("additive effects: every alpha_i must be positive");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("additive effects must sum to one");
  Grid out(x.n_days, x.n_countries());
  for (std::size_t c = 0; c < x.n_countries(); ++c)
    for (std::size_t t = 0; t < x.n_days; ++t) {
      double remaining = effects.alpha_hat;
      const auto row = x.row(t, c);
      for (std::size_t i = 0; i < row.size(); ++i)
        if (!row[i]) remaining += effects.alpha[i];
      out(t, c) = r0.r0[c] * remaining;
    }
  return out;
}

/// Noised (cases, deaths) grids. `base` is the growth-multiplier grid for
/// GrowthRate placement and the R grid for ReproductionNumber placement; each
/// noise stream is multiplied in as exp(eps).
inline std::pair<Grid, Grid> apply_noise(const Grid& base, const NoisePlacement& placement, const Grid& eps_cases,
                                         const Grid& eps_deaths) {
  placement.validate();
  if (placement.kind == NoiseKind::None) return {base, base};
  for (const Grid* e : {&eps_cases, &eps_deaths})
    if (e->n_days() != base.n_days() || e->n_countries() != base.n_countries())
      throw ShapeError("noise grid shape differs from base grid");
  Grid cases = base, deaths = base;
  for (std::size_t c = 0; c < base.n_countries(); ++c)
    for (std::size_t t = 0; t < base.n_days(); ++t) {
      cases(t, c) *= std::exp(eps_cases(t, c));
      deaths(t, c) *= std::exp(eps_deaths(t, c));
    }
  return {std::move(cases), std::move(deaths)};
}

}  // namespace npi
