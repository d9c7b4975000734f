#pragma once

// Joint log-posterior of the semi-mechanistic NPI model over an
// unconstrained parameter vector, with its exact gradient. The reverse pass
// is written out by hand stage by stage (effects -> R -> noise -> infections
// -> delay convolution -> NB likelihood), which keeps one gradient
// evaluation within a small constant factor of the forward pass.

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "npi/distributions.hpp"
#include "npi/epi.hpp"
#include "npi/errors.hpp"
#include "npi/infection.hpp"
#include "npi/panel.hpp"
#include "npi/transmission.hpp"

namespace npi {

enum class AlphaPrior { AsymmetricLaplace, Normal, HalfNormal, Dirichlet };

inline std::string to_string(AlphaPrior p) {
  switch (p) {
    case AlphaPrior::AsymmetricLaplace: return "asymmetric-laplace";
    case AlphaPrior::Normal: return "normal";
    case AlphaPrior::HalfNormal: return "half-normal";
    case AlphaPrior::Dirichlet: return "dirichlet";
  }
  return "?";
}

struct PriorConfig {
  AlphaPrior alpha_prior = AlphaPrior::AsymmetricLaplace;
  AsymmetricLaplace asymmetric_laplace{0.0, 0.5, 10.0};
  double alpha_sd = 0.2;                 ///< Normal / half-normal alpha priors
  double dirichlet_concentration = 1.0;  ///< additive form
  double r0_mean = 3.25;
  double r0_scale_sd = 0.5;  ///< half-normal scale of kappa
  double n0_log_sd = 50.0;   ///< zeta ~ Normal(0, n0_log_sd)
  double psi_sd = 5.0;       ///< half-normal scale of NB dispersion
};

struct EpiParams {
  DelaySpec case_delay = default_case_delay();
  DelaySpec death_delay = default_death_delay();
  double gi_mean = 5.06;
  double gi_sd = 2.11;
  int gi_truncation = 28;

  GenerationInterval generation_interval() const { return gi_params(gi_mean, gi_sd, gi_truncation); }
};

struct ModelConfig {
  ModelVariant variant = variant_by_name("default");
  PriorConfig priors;
  EpiParams epi;
  double sigma_alpha = kDefaultSigmaAlpha;

  /// Variant with its matching default effect prior (Dirichlet for additive).
  static ModelConfig for_variant(std::string_view name) {
    ModelConfig cfg;
    cfg.variant = variant_by_name(name);
    if (cfg.variant.effect == EffectForm::Additive) cfg.priors.alpha_prior = AlphaPrior::Dirichlet;
    return cfg;
  }

  void validate() const {
    variant.validate();
    const bool additive = variant.effect == EffectForm::Additive;
    const bool dirichlet = priors.alpha_prior == AlphaPrior::Dirichlet;
    if (additive != dirichlet) throw ConfigError("the Dirichlet effect prior goes with (and only with) the additive form");
    if (dirichlet && !(priors.dirichlet_concentration > 0.0)) throw ConfigError("Dirichlet concentration must be positive");
    if (variant.effect == EffectForm::DifferentEffects && !(sigma_alpha > 0.0))
      throw ConfigError("different effects needs sigma_alpha > 0");
    if (!(priors.alpha_sd > 0.0) || !(priors.r0_scale_sd > 0.0) || !(priors.n0_log_sd > 0.0) || !(priors.psi_sd > 0.0))
      throw ConfigError("prior scales must be positive");
    epi.case_delay.validate();
    epi.death_delay.validate();
    (void)epi.generation_interval();
  }
};

/// Offsets of each parameter block inside the flat unconstrained vector.
struct ParamLayout {
  std::size_t n_npis = 0, n_countries = 0, n_days = 0;
  std::size_t alpha = 0, n_alpha = 0;  // additive: n_npis stick-breaking coordinates
  std::size_t z = 0, n_z = 0;          // different effects, [npi * C + c]
  std::size_t log_r0 = 0;
  std::size_t log_kappa = 0;
  std::size_t zeta_cases = 0, zeta_deaths = 0;
  std::size_t log_psi_cases = 0, log_psi_deaths = 0;
  std::size_t eps_cases = 0, eps_deaths = 0, n_eps = 0;  // per stream, [c * (T-1) + (t-1)]
  bool cases = true;
  bool noise = true;
  std::size_t dimension = 0;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t eps_index(bool case_stream, std::size_t t, std::size_t c) const {
    return (case_stream ? eps_cases : eps_deaths) + c * (n_days - 1) + (t - 1);
  }
};

/// Log joint density split into its parts.
struct Evaluation {
  double log_density = -INFINITY;
  double log_prior = 0.0;
  double log_likelihood = 0.0;
  double log_jacobian = 0.0;
  bool ok = false;  ///< false when an intermediate was non-finite
};

/// Latent trajectories produced by one parameter point.
struct ForwardResult {
  Grid r;  ///< R before transmission noise
  LatentInfections infections;
  Grid expected_cases;
  Grid expected_deaths;
};

/// Per-evaluation scratch buffers; one per chain.
struct Workspace {
  std::vector<double> alpha, g_alpha, alpha_c, g_alpha_c, simplex, g_simplex;
  std::vector<double> log_r, g_log_r, log_rs, g_log_rs, hist, g_hist, pressure, ybar, g_ybar;
};

class Model {
 public:
  Model(ModelConfig config, const NpiPanel& panel, const CountData& counts) : config_(std::move(config)) {
    config_.validate();
    if (panel.n_countries() != counts.n_countries() || panel.n_days != counts.n_days())
      throw ShapeError("NPI panel and count data disagree on countries or days");
    for (std::size_t c = 0; c < panel.n_countries(); ++c)
      if (panel.countries[c] != counts.countries[c]) throw ShapeError("NPI panel and count data list countries differently");
    if (panel.n_days < 2) throw ShapeError("need at least two days of data");
    panel_ = panel;
    counts_ = counts;
    gi_ = config_.epi.generation_interval();
    case_pmf_ = discretize_delay(config_.epi.case_delay);
    death_pmf_ = discretize_delay(config_.epi.death_delay);
    gi_pmf_ = discretize_generation_interval(gi_);
    rev_case_.assign(case_pmf_.probabilities.rbegin(), case_pmf_.probabilities.rend());
    rev_death_.assign(death_pmf_.probabilities.rbegin(), death_pmf_.probabilities.rend());
    rev_gi_.assign(gi_pmf_.probabilities.rbegin(), gi_pmf_.probabilities.rend() - 1);  // lags G..1
    build_layout();
    obs_cases_.resize(counts_.cases.raw().size());
    obs_deaths_.resize(counts_.deaths.raw().size());
    for (std::size_t k = 0; k < obs_cases_.size(); ++k) {
      obs_cases_[k] = NbObservation::make(counts_.cases.raw()[k]);
      obs_deaths_[k] = NbObservation::make(counts_.deaths.raw()[k]);
    }
  }

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  const NpiPanel& panel() const { return panel_; }
  const CountData& counts() const { return counts_; }
  const GenerationInterval& generation_interval() const { return gi_; }
  const DelayPmf& case_pmf() const { return case_pmf_; }
  const DelayPmf& death_pmf() const { return death_pmf_; }
  const DelayPmf& gi_pmf() const { return gi_pmf_; }
  std::size_t dimension() const { return layout_.dimension; }

  Workspace make_workspace() const { return Workspace{}; }

  /// Log joint density (priors + likelihood + Jacobians). When `grad` is
  /// non-empty it receives the gradient with respect to `theta`.
  Evaluation evaluate(std::span<const double> theta, std::span<double> grad, Workspace& ws) const {
    if (theta.size() != layout_.dimension) throw ShapeError("parameter vector has the wrong length");
    const bool want_grad = !grad.empty();
    if (want_grad) {
      if (grad.size() != theta.size()) throw ShapeError("gradient buffer has the wrong length");
      std::fill(grad.begin(), grad.end(), 0.0);
    }
    Evaluation ev;
    const auto& L = layout_;
    const auto& pri = config_.priors;
    const std::size_t n_i = L.n_npis, n_c = L.n_countries, n_t = L.n_days;

    // Effect parameters.
    ws.alpha.assign(n_i, 0.0);
    ws.g_alpha.assign(n_i, 0.0);
    double alpha_hat = 0.0;
    const bool additive = config_.variant.effect == EffectForm::Additive;
    if (additive) {
      ws.simplex.assign(n_i + 1, 0.0);
      ws.g_simplex.assign(n_i + 1, 0.0);
      ev.log_jacobian += StickBreaking::constrain(theta.subspan(L.alpha, n_i), ws.simplex);
      for (std::size_t i = 0; i < n_i; ++i) ws.alpha[i] = ws.simplex[i];
      alpha_hat = ws.simplex[n_i];
      const double a = pri.dirichlet_concentration;
      ev.log_prior += log_gamma(a * static_cast<double>(n_i + 1)) - static_cast<double>(n_i + 1) * log_gamma(a);
      for (double x : ws.simplex) ev.log_prior += (a - 1.0) * std::log(x);
    } else {
      for (std::size_t i = 0; i < n_i; ++i) {
        const double u = theta[L.alpha + i];
        switch (pri.alpha_prior) {
          case AlphaPrior::AsymmetricLaplace:
            ws.alpha[i] = u;
            ev.log_prior += pri.asymmetric_laplace.logpdf(u);
            break;
          case AlphaPrior::Normal:
            ws.alpha[i] = u;
            ev.log_prior += normal_logpdf(u, 0.0, pri.alpha_sd);
            break;
          case AlphaPrior::HalfNormal:
            ws.alpha[i] = std::exp(u);
            ev.log_prior += half_normal_logpdf(ws.alpha[i], pri.alpha_sd);
            ev.log_jacobian += u;
            break;
          case AlphaPrior::Dirichlet: break;
        }
      }
    }
    const bool diff_effects = config_.variant.effect == EffectForm::DifferentEffects;
    if (diff_effects)
      for (std::size_t k = 0; k < L.n_z; ++k) ev.log_prior += normal_logpdf(theta[L.z + k], 0.0, 1.0);

    // R0 hierarchy: R0_c ~ Normal(mean, kappa) truncated to R0 > 0.
    const double log_kappa = theta[L.log_kappa];
    const double kappa = std::exp(log_kappa);
    double g_kappa = 0.0;
    ev.log_prior += half_normal_logpdf(kappa, pri.r0_scale_sd);
    ev.log_jacobian += log_kappa;
    const double trunc_arg = pri.r0_mean / kappa;
    const double log_trunc = std::log(std_normal_cdf(trunc_arg));
    for (std::size_t c = 0; c < n_c; ++c) {
      const double u = theta[L.log_r0 + c];
      const double r0 = std::exp(u);
      ev.log_prior += normal_logpdf(r0, pri.r0_mean, kappa) - log_trunc;
      ev.log_jacobian += u;
      if (want_grad) {
        const double d = r0 - pri.r0_mean;
        grad[L.log_r0 + c] += -d / (kappa * kappa) * r0 + 1.0;
        g_kappa += d * d / (kappa * kappa * kappa) - 1.0 / kappa;
      }
    }
    if (want_grad) {
      const double pdf = std::exp(-0.5 * trunc_arg * trunc_arg) / std::sqrt(2.0 * std::numbers::pi);
      g_kappa += static_cast<double>(n_c) * pdf / std_normal_cdf(trunc_arg) * pri.r0_mean / (kappa * kappa);
      g_kappa += -kappa / (pri.r0_scale_sd * pri.r0_scale_sd);
      grad[L.log_kappa] += g_kappa * kappa + 1.0;
    }

    // Initial sizes, dispersions, transmission noise.
    const bool cases = L.cases;
    auto add_zeta_prior = [&](std::size_t off) {
      for (std::size_t c = 0; c < n_c; ++c) {
        const double zeta = theta[off + c];
        ev.log_prior += normal_logpdf(zeta, 0.0, pri.n0_log_sd);
        if (want_grad) grad[off + c] += -zeta / (pri.n0_log_sd * pri.n0_log_sd);
      }
    };
    if (cases) add_zeta_prior(L.zeta_cases);
    add_zeta_prior(L.zeta_deaths);
    double psi_cases = 0.0, psi_deaths = std::exp(theta[L.log_psi_deaths]);
    double g_psi_cases = 0.0, g_psi_deaths = 0.0;
    ev.log_prior += half_normal_logpdf(psi_deaths, pri.psi_sd);
    ev.log_jacobian += theta[L.log_psi_deaths];
    if (cases) {
      psi_cases = std::exp(theta[L.log_psi_cases]);
      ev.log_prior += half_normal_logpdf(psi_cases, pri.psi_sd);
      ev.log_jacobian += theta[L.log_psi_cases];
    }
    const double sigma = config_.variant.noise.sigma;
    if (L.noise) {
      const std::size_t first = cases ? L.eps_cases : L.eps_deaths;
      const std::size_t count = (cases ? 2 : 1) * L.n_eps;
      const double log_norm = std::log(sigma) + kLogSqrt2Pi;
      double ss = 0.0;
      for (std::size_t k = first; k < first + count; ++k) {
        ss += theta[k] * theta[k];
        if (want_grad) grad[k] += -theta[k] / (sigma * sigma);
      }
      ev.log_prior += -0.5 * ss / (sigma * sigma) - static_cast<double>(count) * log_norm;
    }

    // Likelihood, country by country.
    const double nu = gi_.shape, beta = gi_.rate;
    const bool growth_noise = config_.variant.noise.kind == NoiseKind::GrowthRate;
    const bool r_noise = config_.variant.noise.kind == NoiseKind::ReproductionNumber;
    const bool renewal = config_.variant.process == InfectionProcess::DiscreteRenewal;
    ws.log_r.resize(n_t);
    ws.g_log_r.resize(n_t);
    ws.log_rs.resize(n_t);
    ws.g_log_rs.resize(n_t);
    ws.pressure.resize(n_t);
    ws.ybar.resize(n_t);
    ws.g_ybar.resize(n_t);
    ws.alpha_c.resize(n_i);
    ws.g_alpha_c.resize(n_i);

    for (std::size_t c = 0; c < n_c; ++c) {
      for (std::size_t i = 0; i < n_i; ++i)
        ws.alpha_c[i] = diff_effects ? ws.alpha[i] + config_.sigma_alpha * theta[L.z + i * n_c + c] : ws.alpha[i];
      const double log_r0 = theta[L.log_r0 + c];
      for (std::size_t t = 0; t < n_t; ++t) {
        const auto row = panel_.row(t, c);
        double acc = 0.0;
        for (std::size_t i = 0; i < n_i; ++i)
          if (row[i]) acc += ws.alpha_c[i];
        ws.log_r[t] = additive ? log_r0 + std::log(1.0 - acc) : log_r0 - acc;
      }
      std::fill(ws.g_log_r.begin(), ws.g_log_r.end(), 0.0);

      for (int stream = cases ? 0 : 1; stream < 2; ++stream) {
        const bool is_cases = stream == 0;
        const double zeta_c = theta[(is_cases ? L.zeta_cases : L.zeta_deaths) + c];
        const double psi = is_cases ? psi_cases : psi_deaths;
        const DelayPmf& delay = is_cases ? case_pmf_ : death_pmf_;
        const MaskGrid& mask = is_cases ? counts_.case_mask : counts_.death_mask;
        const auto& obs = is_cases ? obs_cases_ : obs_deaths_;
        auto eps = [&](std::size_t t) { return L.noise ? theta[L.eps_index(is_cases, t, c)] : 0.0; };

        // R with noise on R, then infections. `hist` holds the series behind
        // `pad` copies of day 0, so every lagged read is a plain dot product.
        for (std::size_t t = 1; t < n_t; ++t) ws.log_rs[t] = ws.log_r[t] + (r_noise ? eps(t) : 0.0);
        const std::size_t n_gi = rev_gi_.size();
        const std::size_t pad = std::max(n_gi, std::max(rev_case_.size(), rev_death_.size()));
        ws.hist.assign(pad + n_t, 0.0);
        double* const hist = ws.hist.data();
        double* const n = hist + pad;
        n[0] = std::exp(zeta_c);
        for (std::size_t k = 0; k < pad; ++k) hist[k] = n[0];
        if (renewal) {
          for (std::size_t t = 1; t < n_t; ++t) {
            const double* src = n + t - n_gi;
            double p = 0.0;
            for (std::size_t j = 0; j < n_gi; ++j) p += src[j] * rev_gi_[j];
            ws.pressure[t] = p;
            n[t] = std::exp(ws.log_rs[t]) * p;
          }
        } else {
          double log_n = zeta_c;
          for (std::size_t t = 1; t < n_t; ++t) {
            ws.pressure[t] = std::exp(ws.log_rs[t] / nu);
            log_n += beta * (ws.pressure[t] - 1.0) + (growth_noise ? eps(t) : 0.0);
            n[t] = std::exp(log_n);
          }
        }
        // Delay convolution and NB likelihood.
        const auto& rev_delay = is_cases ? rev_case_ : rev_death_;
        const std::size_t n_delay = rev_delay.size();
        for (std::size_t t = 0; t < n_t; ++t) {
          const double* src = n + t + 1 - n_delay;
          double acc = 0.0;
          for (std::size_t j = 0; j < n_delay; ++j) acc += src[j] * rev_delay[j];
          ws.ybar[t] = acc;
        }
        const NbDispersion disp = NbDispersion::make(psi);
        double g_psi = 0.0;
        for (std::size_t t = 0; t < n_t; ++t) {
          ws.g_ybar[t] = 0.0;
          if (mask(t, c)) continue;
          const NbTerm term = nb_logpmf_grad(obs[c * n_t + t], ws.ybar[t], disp);
          ev.log_likelihood += term.value;
          ws.g_ybar[t] = term.d_mu;
          g_psi += term.d_psi;
        }
        if (!want_grad) continue;
        (is_cases ? g_psi_cases : g_psi_deaths) += g_psi;

        // Reverse: convolution into the padded history.
        ws.g_hist.assign(pad + n_t, 0.0);
        double* const g_hist = ws.g_hist.data();
        double* const g_n = g_hist + pad;
        for (std::size_t t = 0; t < n_t; ++t) {
          const double g = ws.g_ybar[t];
          if (g == 0.0) continue;
          double* dst = g_n + t + 1 - n_delay;
          for (std::size_t j = 0; j < n_delay; ++j) dst[j] += g * rev_delay[j];
        }
        // Reverse: infection process -> g_log_rs and zeta. Padding cells are
        // copies of day 0 and fold into its adjoint at the end.
        double g_zeta = 0.0;
        if (renewal) {
          for (std::size_t t = n_t - 1; t >= 1; --t) {
            const double gn = g_n[t];
            ws.g_log_rs[t] = gn * n[t];
            const double g_p = gn * std::exp(ws.log_rs[t]);
            double* dst = g_n + t - n_gi;
            for (std::size_t j = 0; j < n_gi; ++j) dst[j] += g_p * rev_gi_[j];
          }
          double g0 = g_n[0];
          for (std::size_t k = 0; k < pad; ++k) g0 += g_hist[k];
          g_zeta = g0 * n[0];
        } else {
          double running = 0.0;  // sum over t' >= t of dLP/dlogN[t']
          for (std::size_t t = n_t - 1; t >= 1; --t) {
            running += g_n[t] * n[t];
            const double g_log_m = running;
            ws.g_log_rs[t] = g_log_m * beta * ws.pressure[t] / nu;
            if (growth_noise) grad[L.eps_index(is_cases, t, c)] += g_log_m;
          }
          double g0 = g_n[0];
          for (std::size_t k = 0; k < pad; ++k) g0 += g_hist[k];
          g_zeta = running + g0 * n[0];
        }
        grad[(is_cases ? L.zeta_cases : L.zeta_deaths) + c] += g_zeta;
        for (std::size_t t = 1; t < n_t; ++t) {
          ws.g_log_r[t] += ws.g_log_rs[t];
          if (r_noise) grad[L.eps_index(is_cases, t, c)] += ws.g_log_rs[t];
        }
      }
      if (!want_grad) continue;

      // Reverse: R model.
      std::fill(ws.g_alpha_c.begin(), ws.g_alpha_c.end(), 0.0);
      double g_log_r0 = 0.0;
      for (std::size_t t = 1; t < n_t; ++t) {
        const double g = ws.g_log_r[t];
        g_log_r0 += g;
        const auto row = panel_.row(t, c);
        if (additive) {
          const double s = std::exp(ws.log_r[t] - log_r0);
          for (std::size_t i = 0; i < n_i; ++i)
            if (row[i]) ws.g_alpha_c[i] -= g / s;
        } else {
          for (std::size_t i = 0; i < n_i; ++i)
            if (row[i]) ws.g_alpha_c[i] -= g;
        }
      }
      grad[L.log_r0 + c] += g_log_r0;
      for (std::size_t i = 0; i < n_i; ++i) {
        ws.g_alpha[i] += ws.g_alpha_c[i];
        if (diff_effects) grad[L.z + i * n_c + c] += config_.sigma_alpha * ws.g_alpha_c[i];
      }
    }

    if (want_grad) {
      if (diff_effects)
        for (std::size_t k = 0; k < L.n_z; ++k) grad[L.z + k] += -theta[L.z + k];
      if (additive) {
        for (std::size_t i = 0; i < n_i; ++i) ws.g_simplex[i] = ws.g_alpha[i];
        const double a = pri.dirichlet_concentration;
        for (std::size_t k = 0; k <= n_i; ++k) ws.g_simplex[k] += (a - 1.0) / ws.simplex[k];
        StickBreaking::backward(theta.subspan(L.alpha, n_i), ws.simplex, ws.g_simplex, grad.subspan(L.alpha, n_i));
      } else {
        for (std::size_t i = 0; i < n_i; ++i) {
          const double u = theta[L.alpha + i];
          switch (pri.alpha_prior) {
            case AlphaPrior::AsymmetricLaplace:
              grad[L.alpha + i] += ws.g_alpha[i] + pri.asymmetric_laplace.dlogpdf(u);
              break;
            case AlphaPrior::Normal:
              grad[L.alpha + i] += ws.g_alpha[i] - u / (pri.alpha_sd * pri.alpha_sd);
              break;
            case AlphaPrior::HalfNormal: {
              const double a = ws.alpha[i];
              grad[L.alpha + i] += (ws.g_alpha[i] - a / (pri.alpha_sd * pri.alpha_sd)) * a + 1.0;
              break;
            }
            case AlphaPrior::Dirichlet: break;
          }
        }
      }
      grad[L.log_psi_deaths] += (g_psi_deaths - psi_deaths / (pri.psi_sd * pri.psi_sd)) * psi_deaths + 1.0;
      if (cases) grad[L.log_psi_cases] += (g_psi_cases - psi_cases / (pri.psi_sd * pri.psi_sd)) * psi_cases + 1.0;
    }

    ev.log_density = ev.log_prior + ev.log_likelihood + ev.log_jacobian;
    ev.ok = std::isfinite(ev.log_density);
    if (ev.ok && want_grad)
      for (double g : grad)
        if (!std::isfinite(g)) {
          ev.ok = false;
          break;
        }
    if (!ev.ok) ev.log_density = -INFINITY;
    return ev;
  }

  double log_density(std::span<const double> theta, std::span<double> grad, Workspace& ws) const {
    return evaluate(theta, grad, ws).log_density;
  }

  /// Names of the constrained parameters, in `constrain` order.
  std::vector<std::string> constrained_names() const {
    const auto& L = layout_;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < L.n_npis; ++i) names.push_back("alpha[" + panel_.npi_names[i] + "]");
    if (config_.variant.effect == EffectForm::Additive) names.push_back("alpha_hat");
    if (config_.variant.effect == EffectForm::DifferentEffects)
      for (std::size_t i = 0; i < L.n_npis; ++i)
        for (std::size_t c = 0; c < L.n_countries; ++c)
          names.push_back("alpha_country[" + panel_.npi_names[i] + "," + panel_.countries[c] + "]");
    for (std::size_t c = 0; c < L.n_countries; ++c) names.push_back("r0[" + panel_.countries[c] + "]");
    names.push_back("kappa");
    if (L.cases)
      for (std::size_t c = 0; c < L.n_countries; ++c) names.push_back("zeta_cases[" + panel_.countries[c] + "]");
    for (std::size_t c = 0; c < L.n_countries; ++c) names.push_back("zeta_deaths[" + panel_.countries[c] + "]");
    if (L.cases) names.push_back("psi_cases");
    names.push_back("psi_deaths");
    if (L.noise)
      for (int s = L.cases ? 0 : 1; s < 2; ++s)
        for (std::size_t c = 0; c < L.n_countries; ++c)
          for (std::size_t t = 1; t < L.n_days; ++t)
            names.push_back(std::string(s == 0 ? "eps_cases[" : "eps_deaths[") + panel_.countries[c] + "," +
                            std::to_string(t) + "]");
    return names;
  }

  std::size_t constrained_dimension() const {
    const auto& L = layout_;
    return L.dimension + (config_.variant.effect == EffectForm::Additive ? 1 : 0);
  }

  /// Maps theta to the constrained representation (alpha, R0, kappa, zeta,
  /// psi, eps, with alpha_country in place of z).
  std::vector<double> constrain(std::span<const double> theta) const {
    const auto& L = layout_;
    if (theta.size() != L.dimension) throw ShapeError("parameter vector has the wrong length");
    std::vector<double> out;
    out.reserve(constrained_dimension());
    std::vector<double> alpha(L.n_npis);
    if (config_.variant.effect == EffectForm::Additive) {
      std::vector<double> simplex(L.n_npis + 1);
      StickBreaking::constrain(theta.subspan(L.alpha, L.n_npis), simplex);
      out.insert(out.end(), simplex.begin(), simplex.end());
    } else {
      for (std::size_t i = 0; i < L.n_npis; ++i) {
        const double u = theta[L.alpha + i];
        alpha[i] = config_.priors.alpha_prior == AlphaPrior::HalfNormal ? std::exp(u) : u;
        out.push_back(alpha[i]);
      }
    }
    if (config_.variant.effect == EffectForm::DifferentEffects)
      for (std::size_t i = 0; i < L.n_npis; ++i)
        for (std::size_t c = 0; c < L.n_countries; ++c)
          out.push_back(alpha[i] + config_.sigma_alpha * theta[L.z + i * L.n_countries + c]);
    for (std::size_t c = 0; c < L.n_countries; ++c) out.push_back(std::exp(theta[L.log_r0 + c]));
    out.push_back(std::exp(theta[L.log_kappa]));
    const std::size_t zeta_begin = L.cases ? L.zeta_cases : L.zeta_deaths;
    out.insert(out.end(), theta.begin() + static_cast<long>(zeta_begin),
               theta.begin() + static_cast<long>(L.zeta_deaths + L.n_countries));
    if (L.cases) out.push_back(std::exp(theta[L.log_psi_cases]));
    out.push_back(std::exp(theta[L.log_psi_deaths]));
    if (L.noise) {
      const std::size_t first = L.cases ? L.eps_cases : L.eps_deaths;
      out.insert(out.end(), theta.begin() + static_cast<long>(first), theta.end());
    }
    return out;
  }

  std::vector<double> unconstrain(std::span<const double> constrained) const {
    const auto& L = layout_;
    if (constrained.size() != constrained_dimension()) throw ShapeError("constrained vector has the wrong length");
    std::vector<double> theta(L.dimension);
    std::size_t k = 0;
    std::vector<double> alpha(L.n_npis);
    if (config_.variant.effect == EffectForm::Additive) {
      StickBreaking::unconstrain(constrained.subspan(0, L.n_npis + 1), std::span<double>(theta).subspan(L.alpha, L.n_npis));
      k = L.n_npis + 1;
    } else {
      for (std::size_t i = 0; i < L.n_npis; ++i) {
        alpha[i] = constrained[k++];
        theta[L.alpha + i] = config_.priors.alpha_prior == AlphaPrior::HalfNormal ? std::log(alpha[i]) : alpha[i];
      }
    }
    if (config_.variant.effect == EffectForm::DifferentEffects)
      for (std::size_t i = 0; i < L.n_npis; ++i)
        for (std::size_t c = 0; c < L.n_countries; ++c)
          theta[L.z + i * L.n_countries + c] = (constrained[k++] - alpha[i]) / config_.sigma_alpha;
    for (std::size_t c = 0; c < L.n_countries; ++c) theta[L.log_r0 + c] = std::log(constrained[k++]);
    theta[L.log_kappa] = std::log(constrained[k++]);
    const std::size_t zeta_begin = L.cases ? L.zeta_cases : L.zeta_deaths;
    for (std::size_t j = zeta_begin; j < L.zeta_deaths + L.n_countries; ++j) theta[j] = constrained[k++];
    if (L.cases) theta[L.log_psi_cases] = std::log(constrained[k++]);
    theta[L.log_psi_deaths] = std::log(constrained[k++]);
    if (L.noise) {
      const std::size_t first = L.cases ? L.eps_cases : L.eps_deaths;
      for (std::size_t j = first; j < L.dimension; ++j) theta[j] = constrained[k++];
    }
    return theta;
  }

  /// Latent trajectories at `theta`. Streams that are not modelled stay empty.
  ForwardResult forward(std::span<const double> theta) const {
    const auto& L = layout_;
    if (theta.size() != L.dimension) throw ShapeError("parameter vector has the wrong length");
    const auto constrained = constrain(theta);
    EffectParams effects;
    std::size_t k = 0;
    effects.alpha.assign(constrained.begin(), constrained.begin() + static_cast<long>(L.n_npis));
    k = L.n_npis;
    if (config_.variant.effect == EffectForm::Additive) effects.alpha_hat = constrained[k++];
    if (config_.variant.effect == EffectForm::DifferentEffects) {
      effects.alpha_country.assign(constrained.begin() + static_cast<long>(k),
                                   constrained.begin() + static_cast<long>(k + L.n_z));
      k += L.n_z;
    }
    R0Params r0;
    r0.r0.assign(constrained.begin() + static_cast<long>(k), constrained.begin() + static_cast<long>(k + L.n_countries));
    ForwardResult out;
    if (config_.variant.effect == EffectForm::Additive) {
      // Evaluated through the same expression as the likelihood so that
      // rounding in the simplex does not trip the exact-sum check.
      out.r = Grid(L.n_days, L.n_countries);
      for (std::size_t c = 0; c < L.n_countries; ++c)
        for (std::size_t t = 0; t < L.n_days; ++t) {
          double acc = 0.0;
          const auto row = panel_.row(t, c);
          for (std::size_t i = 0; i < L.n_npis; ++i)
            if (row[i]) acc += effects.alpha[i];
          out.r(t, c) = r0.r0[c] * (1.0 - acc);
        }
    } else {
      out.r = rt_multiplicative(r0, effects, panel_);
    }
    auto stream = [&](bool is_cases) {
      std::vector<double> n0(L.n_countries);
      for (std::size_t c = 0; c < L.n_countries; ++c)
        n0[c] = std::exp(theta[(is_cases ? L.zeta_cases : L.zeta_deaths) + c]);
      Grid eps(L.n_days, L.n_countries, 0.0);
      if (L.noise)
        for (std::size_t c = 0; c < L.n_countries; ++c)
          for (std::size_t t = 1; t < L.n_days; ++t) eps(t, c) = theta[L.eps_index(is_cases, t, c)];
      const auto& noise = config_.variant.noise;
      Grid r = out.r;
      if (noise.kind == NoiseKind::ReproductionNumber) r = apply_noise(out.r, noise, eps, eps).first;
      Grid n;
      if (config_.variant.process == InfectionProcess::DiscreteRenewal) {
        n = propagate_renewal(n0, r, gi_pmf_);
      } else {
        Grid m(L.n_days, L.n_countries);
        for (std::size_t c = 0; c < L.n_countries; ++c)
          for (std::size_t t = 0; t < L.n_days; ++t) m(t, c) = r_to_growth(r(t, c), gi_);
        if (noise.kind == NoiseKind::GrowthRate) m = apply_noise(m, noise, eps, eps).first;
        n = propagate_growth(n0, m);
      }
      return n;
    };
    if (L.cases) {
      out.infections.n_cases = stream(true);
      out.expected_cases = expected_counts(out.infections.n_cases, case_pmf_);
    }
    out.infections.n_deaths = stream(false);
    out.expected_deaths = expected_counts(out.infections.n_deaths, death_pmf_);
    return out;
  }

 private:
  void build_layout() {
    auto& L = layout_;
    L.n_npis = panel_.n_npis();
    L.n_countries = panel_.n_countries();
    L.n_days = panel_.n_days;
    L.cases = config_.variant.models_cases();
    L.noise = config_.variant.has_noise();
    std::size_t off = 0;
    L.alpha = off;
    L.n_alpha = L.n_npis;
    off += L.n_alpha;
    if (config_.variant.effect == EffectForm::DifferentEffects) {
      L.z = off;
      L.n_z = L.n_npis * L.n_countries;
      off += L.n_z;
    }
    L.log_r0 = off;
    off += L.n_countries;
    L.log_kappa = off++;
    if (L.cases) {
      L.zeta_cases = off;
      off += L.n_countries;
    } else {
      L.zeta_cases = ParamLayout::npos;
    }
    L.zeta_deaths = off;
    off += L.n_countries;
    L.log_psi_cases = L.cases ? off++ : ParamLayout::npos;
    L.log_psi_deaths = off++;
    L.n_eps = L.noise ? L.n_countries * (L.n_days - 1) : 0;
    if (L.noise) {
      if (L.cases) {
        L.eps_cases = off;
        off += L.n_eps;
      } else {
        L.eps_cases = ParamLayout::npos;
      }
      L.eps_deaths = off;
      off += L.n_eps;
    } else {
      L.eps_cases = L.eps_deaths = ParamLayout::npos;
    }
    L.dimension = off;
  }

  ModelConfig config_;
  NpiPanel panel_;
  CountData counts_;
  GenerationInterval gi_;
  DelayPmf case_pmf_, death_pmf_, gi_pmf_;
  std::vector<double> rev_case_, rev_death_, rev_gi_;  // kernels in reverse lag order
  ParamLayout layout_;
  std::vector<NbObservation> obs_cases_, obs_deaths_;
};

}  // namespace npi
