#pragma once

// Posterior mode finding (L-BFGS) and multi-chain NUTS sampling of a Model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "npi/errors.hpp"
#include "npi/hmc.hpp"
#include "npi/model.hpp"
#include "npi/seeding.hpp"
#include "npi/trace.hpp"

namespace npi {

struct OptimizeSettings {
  int max_iters = 5000;
  double grad_tol = 1e-6;
  int memory = 10;
};

struct MapResult {
  std::vector<double> theta;
  double log_density = -INFINITY;
  double grad_norm = INFINITY;
  int iterations = 0;
};

namespace detail {
inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}
}  // namespace detail

/// Maximises `f` by L-BFGS with a backtracking (Armijo) line search.
/// Coordinates flagged in `frozen` keep their starting value. Throws
/// BudgetError carrying the best point if the gradient norm is still above
/// tolerance when the iteration budget runs out or the line search stalls.
inline MapResult maximize(const LogDensityFn& f, std::vector<double> x, const OptimizeSettings& settings = {},
                          const std::vector<std::uint8_t>* frozen = nullptr) {
  const std::size_t n = x.size();
  std::vector<double> g(n), g_new(n), x_new(n), dir(n);
  auto eval = [&](const std::vector<double>& at, std::vector<double>& grad) {
    const double v = f(at, grad);
    if (frozen)
      for (std::size_t k = 0; k < n; ++k)
        if ((*frozen)[k]) grad[k] = 0.0;
    return v;
  };
  double fx = eval(x, g);
  if (!std::isfinite(fx)) throw DomainError("optimiser start point has non-finite log density");
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  MapResult res;
  int it = 0;
  int stalls = 0;
  for (; it < settings.max_iters; ++it) {
    const double gnorm = detail::norm2(g);
    if (gnorm < settings.grad_tol) break;
    // Two-loop recursion on the ascent direction.
    dir = g;
    std::vector<double> a(s_hist.size());
    for (std::size_t j = s_hist.size(); j-- > 0;) {
      a[j] = rho_hist[j] * detail::dot(s_hist[j], dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] -= a[j] * y_hist[j][k];
    }
    double scale = 1.0 / std::max(gnorm, 1.0);
    if (!s_hist.empty()) scale = detail::dot(s_hist.back(), y_hist.back()) / detail::dot(y_hist.back(), y_hist.back());
    for (auto& d : dir) d *= scale;
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double b = rho_hist[j] * detail::dot(y_hist[j], dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] += (a[j] - b) * s_hist[j][k];
    }
    double slope = detail::dot(g, dir);
    if (!(slope > 0.0)) {
      dir = g;
      for (auto& d : dir) d /= std::max(gnorm, 1.0);
      slope = detail::dot(g, dir);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    // Wolfe line search by bracketing and bisection. The curvature test uses
    // the directional derivative, which stays informative once changes in f
    // itself are down at rounding level.
    const double f_tol = 1e-12 * std::max(1.0, std::abs(fx));
    double lo = 0.0, hi = INFINITY, step = 1.0;
    double f_new = -INFINITY;
    bool accepted = false;
    double best_step = 0.0, best_f = fx;
    std::vector<double> best_g;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k < n; ++k) x_new[k] = x[k] + step * dir[k];
      f_new = eval(x_new, g_new);
      const double dphi = std::isfinite(f_new) ? detail::dot(g_new, dir) : -INFINITY;
      if (!std::isfinite(f_new) || f_new < fx + 1e-4 * step * slope - f_tol) {
        hi = step;
      } else {
        if (f_new > best_f || best_step == 0.0) {
          best_step = step;
          best_f = f_new;
          best_g = g_new;
        }
        if (dphi < -0.9 * slope) {
          hi = step;
        } else if (dphi > 0.9 * slope) {
          lo = step;
        } else {
          accepted = true;
          break;
        }
      }
      step = std::isinf(hi) ? 2.0 * step : 0.5 * (lo + hi);
    }
    if (!accepted && best_step > 0.0) {
      for (std::size_t k = 0; k < n; ++k) x_new[k] = x[k] + best_step * dir[k];
      f_new = best_f;
      g_new = best_g;
      accepted = true;
    }
    if (!accepted) {
      if (s_hist.empty() || ++stalls > 2) break;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }
    stalls = 0;
    std::vector<double> s(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = x_new[k] - x[k];
      y[k] = g[k] - g_new[k];  // gradient of -f
    }
    const double sy = detail::dot(s, y);
    if (sy > 1e-12 * detail::norm2(s) * detail::norm2(y)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > settings.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
  }
  res.theta = x;
  res.log_density = fx;
  res.grad_norm = detail::norm2(g);
  res.iterations = it;
  if (!(res.grad_norm < settings.grad_tol))
    throw BudgetError("optimiser stopped with gradient norm " + std::to_string(res.grad_norm), std::move(x));
  return res;
}

/// Deterministic starting point: no NPI effect, R0 at its prior mean, initial
/// infections at the level of the earliest reported counts, no noise.
inline std::vector<double> heuristic_init(const Model& model) {
  const auto& L = model.layout();
  std::vector<double> theta(L.dimension, 0.0);
  if (model.config().variant.effect != EffectForm::Additive &&
      model.config().priors.alpha_prior == AlphaPrior::HalfNormal)
    for (std::size_t i = 0; i < L.n_npis; ++i) theta[L.alpha + i] = std::log(0.05);
  for (std::size_t c = 0; c < L.n_countries; ++c) theta[L.log_r0 + c] = std::log(model.config().priors.r0_mean);
  theta[L.log_kappa] = std::log(0.5);
  auto early_level = [&](const Grid& y, std::size_t c) {
    double hi = 1.0;
    for (std::size_t t = 0; t < std::min<std::size_t>(7, L.n_days); ++t) hi = std::max(hi, y(t, c));
    return std::log(hi);
  };
  for (std::size_t c = 0; c < L.n_countries; ++c) {
    if (L.cases) theta[L.zeta_cases + c] = early_level(model.counts().cases, c);
    theta[L.zeta_deaths + c] = early_level(model.counts().deaths, c);
  }
  if (L.cases) theta[L.log_psi_cases] = std::log(5.0);
  theta[L.log_psi_deaths] = std::log(5.0);
  return theta;
}

/// Posterior mode of the model, optionally holding some coordinates fixed.
inline MapResult map_estimate(const Model& model, std::vector<double> init = {}, const OptimizeSettings& settings = {},
                              const std::vector<std::uint8_t>* frozen = nullptr) {
  if (init.empty()) init = heuristic_init(model);
  Workspace ws;
  LogDensityFn f = [&](std::span<const double> q, std::span<double> g) { return model.log_density(q, g, ws); };
  return maximize(f, std::move(init), settings, frozen);
}

struct FitSettings {
  int chains = 4;
  SamplerSettings sampler{.metric_rank = 100};
  std::uint64_t seed = 0;
  double init_jitter = 0.1;  ///< sd of per-chain Gaussian jitter around the mode
  int map_iters = 400;       ///< iteration budget for the initial mode search
  bool parallel = true;
};

struct FitResult {
  Trace trace;
  std::vector<double> rhat;
  double max_rhat = NAN;
  std::size_t divergences = 0;
  bool quality_ok = false;
  std::vector<double> init_theta;
};

/// Stable text rendering of every setting that affects a fit.
inline std::string describe(const ModelConfig& cfg, const FitSettings& fit) {
  std::ostringstream os;
  os.precision(17);
  const auto& v = cfg.variant;
  os << "variant=" << v.name << ";effect=" << int(v.effect) << ";noise=" << int(v.noise.kind) << ':' << v.noise.sigma
     << ";process=" << int(v.process) << ";outputs=" << int(v.outputs);
  const auto& p = cfg.priors;
  os << ";alpha_prior=" << to_string(p.alpha_prior) << ";al=" << p.asymmetric_laplace.m << ','
     << p.asymmetric_laplace.kappa << ',' << p.asymmetric_laplace.lambda << ";alpha_sd=" << p.alpha_sd
     << ";dirichlet=" << p.dirichlet_concentration << ";r0_mean=" << p.r0_mean << ";r0_scale_sd=" << p.r0_scale_sd
     << ";n0_log_sd=" << p.n0_log_sd << ";psi_sd=" << p.psi_sd;
  const auto& e = cfg.epi;
  os << ";case_delay=" << e.case_delay.mean << ',' << e.case_delay.dispersion << ',' << e.case_delay.truncation
     << ";death_delay=" << e.death_delay.mean << ',' << e.death_delay.dispersion << ',' << e.death_delay.truncation
     << ";gi=" << e.gi_mean << ',' << e.gi_sd << ',' << e.gi_truncation << ";sigma_alpha=" << cfg.sigma_alpha;
  os << ";chains=" << fit.chains << ";warmup=" << fit.sampler.warmup << ";samples=" << fit.sampler.samples
     << ";max_depth=" << fit.sampler.max_depth << ";target_accept=" << fit.sampler.target_accept
     << ";jitter=" << fit.init_jitter << ";map_iters=" << fit.map_iters;
  return os.str();
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Runs `fit.chains` NUTS chains from jittered copies of the posterior mode.
/// The result is returned even when the quality gate (no divergences,
/// every split-R-hat below 1.05) fails; `quality_ok` records the outcome.
inline FitResult sample_posterior(const Model& model, const FitSettings& fit) {
  if (fit.chains < 1) throw ConfigError("need at least one chain");
  if (fit.sampler.samples < 1 || fit.sampler.warmup < 0) throw ConfigError("invalid sample or warmup count");
  FitResult out;
  OptimizeSettings opt;
  opt.max_iters = fit.map_iters;
  try {
    out.init_theta = map_estimate(model, {}, opt).theta;
  } catch (const BudgetError& e) {
    out.init_theta = e.last_iterate;
  }

  const std::size_t dim = model.dimension();
  const std::size_t n_keep = static_cast<std::size_t>(fit.sampler.samples);
  Trace& trace = out.trace;
  trace.names = model.constrained_names();
  trace.n_chains = static_cast<std::size_t>(fit.chains);
  trace.n_samples = n_keep;
  trace.seed = fit.seed;
  trace.config_hash = hex64(fnv1a64(describe(model.config(), fit)));
  trace.values.assign(trace.n_chains * n_keep * trace.names.size(), 0.0);
  trace.divergent.assign(trace.n_chains * n_keep, 0);
  trace.step_sizes.assign(trace.n_chains, 0.0);
  trace.mean_leapfrogs.assign(trace.n_chains, 0.0);
  std::vector<std::size_t> warm_div(trace.n_chains, 0);
  std::vector<std::string> errors(trace.n_chains);

  auto run_chain = [&](std::size_t ch) {
    try {
      const std::uint64_t chain_seed = derive_seed("chain", fit.seed, ch);
      std::mt19937_64 init_rng(derive_seed("init", chain_seed));
      std::normal_distribution<double> jitter(0.0, fit.init_jitter);
      Workspace ws;
      std::vector<double> init = out.init_theta;
      for (int attempt = 0;; ++attempt) {
        std::vector<double> trial = out.init_theta;
        if (attempt < 100)
          for (auto& v : trial) v += jitter(init_rng);
        std::vector<double> g(dim);
        if (std::isfinite(model.log_density(trial, g, ws)) || attempt >= 100) {
          init = trial;
          break;
        }
      }
      LogDensityFn target = [&](std::span<const double> q, std::span<double> g) { return model.log_density(q, g, ws); };
      NutsSampler sampler(target, dim, fit.sampler, chain_seed);
      ChainResult res = sampler.run(init);
      const std::size_t n_par = trace.names.size();
      for (std::size_t s = 0; s < n_keep; ++s) {
        const auto constrained = model.constrain(std::span<const double>(res.draws.data() + s * dim, dim));
        std::copy(constrained.begin(), constrained.end(), trace.values.begin() + static_cast<long>((ch * n_keep + s) * n_par));
        trace.divergent[ch * n_keep + s] = res.divergent[s];
      }
      trace.step_sizes[ch] = res.step_size;
      double total = 0.0;
      for (int n : res.n_leapfrog) total += n;
      trace.mean_leapfrogs[ch] = total / static_cast<double>(n_keep);
      warm_div[ch] = res.warmup_divergences;
    } catch (const std::exception& e) {
      errors[ch] = e.what();
    }
  };

  if (fit.parallel && fit.chains > 1) {
    std::vector<std::thread> threads;
    for (std::size_t ch = 0; ch < trace.n_chains; ++ch) threads.emplace_back(run_chain, ch);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t ch = 0; ch < trace.n_chains; ++ch) run_chain(ch);
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("chain failed: " + e);
  for (auto w : warm_div) trace.warmup_divergences += w;

  out.divergences = trace.divergences();
  if (trace.n_chains >= 2 && n_keep >= 4) {
    out.rhat = rhat(trace);
    out.max_rhat = 0.0;
    for (double r : out.rhat) out.max_rhat = std::max(out.max_rhat, r);
    out.quality_ok = out.divergences == 0 && out.max_rhat < 1.05;
  }
  return out;
}

}  // namespace npi
