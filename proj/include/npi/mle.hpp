#pragma once

// Closed-form maximum-likelihood coordinate updates for NPI effects under the
// simplified noisy-R and default likelihoods, and a coordinate-ascent driver.
//
// Simplified noisy-R:  L(a) = -1/2 sum_{t,c} (log R - log Rp)^2
// Simplified default:  L(a) = -1/2 sum_{t,c} (log m - beta (Rp^(1/nu) - 1))^2
// with Rp[t,c] = R0[c] exp(-sum_j a_j x[j,t,c]).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "npi/epi.hpp"
#include "npi/errors.hpp"
#include "npi/panel.hpp"
#include "npi/seeding.hpp"
#include "npi/simgen.hpp"

namespace npi {

/// (prod v)^(1/n), in the log domain.
inline double geometric_mean(std::span<const double> values) {
  if (values.empty()) throw DomainError("geometric mean of an empty set");
  double s = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) throw DomainError("geometric mean needs positive values");
    s += std::log(v);
  }
  return std::exp(s / static_cast<double>(values.size()));
}

/// (sum w v^p / sum w)^(1/p).
inline double generalized_weighted_mean(std::span<const double> values, double p, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size()) throw DomainError("weighted mean needs matching non-empty inputs");
  if (p == 0.0) throw DomainError("weighted mean exponent must be non-zero");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0.0) || !(weights[k] > 0.0)) throw DomainError("weighted mean needs positive values and weights");
    num += weights[k] * std::pow(values[k], p);
    den += weights[k];
  }
  return std::pow(num / den, 1.0 / p);
}

enum class Theorem { NoisyR = 1, Default = 2 };

struct MlProblem {
  Grid target;  ///< observed R (noisy-R) or daily growth multipliers (default)
  std::vector<double> r0;
  NpiPanel x;
  double nu = 1.0;    ///< generation-interval shape
  double beta = 1.0;  ///< generation-interval rate

  void validate() const {
    if (target.n_days() != x.n_days || target.n_countries() != x.n_countries() || r0.size() != x.n_countries())
      throw ShapeError("ML problem: target, R0 and panel disagree in shape");
    if (!(nu > 0.0) || !(beta > 0.0)) throw DomainError("ML problem: nu and beta must be positive");
  }
  /// (t, c) cells where NPI i is active.
  std::vector<std::pair<std::size_t, std::size_t>> active_set(std::size_t i) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t c = 0; c < x.n_countries(); ++c)
      for (std::size_t t = 0; t < x.n_days; ++t)
        if (x.at(i, t, c)) out.emplace_back(t, c);
    return out;
  }
  /// Prediction with NPI i's effect left out: R0 exp(-sum_{j != i} a_j x_j).
  double r_without(std::size_t i, std::size_t t, std::size_t c, std::span<const double> alpha) const {
    double s = 0.0;
    const auto row = x.row(t, c);
    for (std::size_t j = 0; j < row.size(); ++j)
      if (j != i && row[j]) s += alpha[j];
    return r0[c] * std::exp(-s);
  }
  /// Reproduction number implied by a growth multiplier: (1 + log m / beta)^nu.
  double implied_r(double multiplier) const {
    const double base = 1.0 + std::log(multiplier) / beta;
    if (!(base > 0.0)) throw DomainError("growth multiplier with log(m)/beta <= -1 has no reproduction number");
    return std::pow(base, nu);
  }
};

namespace detail {
inline void check_update_args(const MlProblem& p, std::size_t i, std::span<const double> alpha) {
  p.validate();
  if (i >= p.x.n_npis()) throw ShapeError("NPI index out of range");
  if (alpha.size() != p.x.n_npis()) throw ShapeError("alpha length differs from NPI count");
}
}  // namespace detail

/// exp(-a_i) = M0(R on Phi_i) / M0(R without i on Phi_i).
inline double theorem1_update(const MlProblem& p, std::size_t i, std::span<const double> alpha) {
  detail::check_update_args(p, i, alpha);
  const auto phi = p.active_set(i);
  if (phi.empty()) throw IdentifiabilityError("NPI " + p.x.npi_names[i] + " is never active");
  std::vector<double> observed, predicted;
  for (auto [t, c] : phi) {
    observed.push_back(p.target(t, c));
    predicted.push_back(p.r_without(i, t, c, alpha));
  }
  return geometric_mean(observed) / geometric_mean(predicted);
}

/// exp(-a_i) = (sum w Rbar^(1/nu) / sum w Rtilde^(1/nu))^nu over Phi_i, with
/// w = Rtilde^(1/nu) and Rbar the reproduction number implied by the growth.
inline double theorem2_update(const MlProblem& p, std::size_t i, std::span<const double> alpha) {
  detail::check_update_args(p, i, alpha);
  const auto phi = p.active_set(i);
  if (phi.empty()) throw IdentifiabilityError("NPI " + p.x.npi_names[i] + " is never active");
  double num = 0.0, den = 0.0;
  for (auto [t, c] : phi) {
    const double w = std::pow(p.r_without(i, t, c, alpha), 1.0 / p.nu);
    num += w * std::pow(p.implied_r(p.target(t, c)), 1.0 / p.nu);
    den += w * w;
  }
  return std::pow(num / den, p.nu);
}

inline double theorem_update(Theorem th, const MlProblem& p, std::size_t i, std::span<const double> alpha) {
  return th == Theorem::NoisyR ? theorem1_update(p, i, alpha) : theorem2_update(p, i, alpha);
}

/// Simplified log-likelihood of effects `alpha`, optionally with its gradient.
inline double simplified_loglik(Theorem th, const MlProblem& p, std::span<const double> alpha,
                                std::span<double> grad = {}) {
  p.validate();
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  double ll = 0.0;
  for (std::size_t c = 0; c < p.x.n_countries(); ++c)
    for (std::size_t t = 0; t < p.x.n_days; ++t) {
      const auto row = p.x.row(t, c);
      double s = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j)
        if (row[j]) s += alpha[j];
      const double log_rp = std::log(p.r0[c]) - s;
      double e = 0.0, de = 0.0;  // residual and d(residual)/d(a_j) for active j
      if (th == Theorem::NoisyR) {
        e = std::log(p.target(t, c)) - log_rp;
        de = 1.0;
      } else {
        const double rp_root = std::exp(log_rp / p.nu);
        e = std::log(p.target(t, c)) - p.beta * (rp_root - 1.0);
        de = p.beta * rp_root / p.nu;
      }
      ll -= 0.5 * e * e;
      if (!grad.empty())
        for (std::size_t j = 0; j < row.size(); ++j)
          if (row[j]) grad[j] -= e * de;
    }
  return ll;
}

struct CoordinateAscentResult {
  std::vector<double> alpha;
  int iterations = 0;              ///< sweeps that moved some coordinate by at least tol
  std::vector<double> residuals;   ///< dL/da_i at the returned point
};

/// Cycles the closed-form updates over NPIs in ascending order until no
/// exp(-a_i) moves by `tol` or more in a full sweep.
inline CoordinateAscentResult coordinate_ascent(const MlProblem& p, Theorem th, double tol = 1e-8,
                                                int max_iters = 10000) {
  p.validate();
  const std::size_t n = p.x.n_npis();
  for (std::size_t i = 0; i < n; ++i)
    if (p.active_set(i).empty()) throw IdentifiabilityError("NPI " + p.x.npi_names[i] + " is never active");
  CoordinateAscentResult res;
  res.alpha.assign(n, 0.0);
  for (int sweep = 0;; ++sweep) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double updated = theorem_update(th, p, i, res.alpha);
      change = std::max(change, std::abs(updated - std::exp(-res.alpha[i])));
      res.alpha[i] = -std::log(updated);
    }
    if (change < tol) break;
    res.iterations = sweep + 1;
    if (res.iterations >= max_iters)
      throw BudgetError("coordinate ascent did not converge in " + std::to_string(max_iters) + " sweeps", res.alpha);
  }
  res.residuals.assign(n, 0.0);
  simplified_loglik(th, p, res.alpha, res.residuals);
  return res;
}

/// Maximiser of the simplified likelihood in a_i alone on a uniform grid.
inline double grid_search_alpha(Theorem th, const MlProblem& p, std::size_t i, std::vector<double> alpha,
                                double lo = -2.0, double hi = 2.0, double resolution = 1e-4) {
  double best = lo, best_ll = -INFINITY;
  const auto steps = static_cast<long>(std::llround((hi - lo) / resolution));
  for (long k = 0; k <= steps; ++k) {
    alpha[i] = lo + static_cast<double>(k) * resolution;
    const double ll = simplified_loglik(th, p, alpha);
    if (ll > best_ll) {
      best_ll = ll;
      best = alpha[i];
    }
  }
  return best;
}

/// Random simplified-model instance: staggered schedule, effects in
/// [0.05, 0.5], observed R (or growth) with multiplicative log-normal noise.
inline MlProblem random_ml_problem(Theorem th, std::uint64_t seed, std::size_t countries, std::size_t npis,
                                   std::size_t days, double noise_sd = 0.1) {
  ScheduleSettings sched;
  sched.activation_lo = 0.1;
  sched.activation_hi = 0.7;
  MlProblem p;
  p.x = random_schedule(npis, days, countries, seed, sched);
  const auto gi = default_generation_interval();
  p.nu = gi.shape;
  p.beta = gi.rate;
  std::mt19937_64 rng(derive_seed("ml-problem", seed));
  std::uniform_real_distribution<double> u_alpha(0.05, 0.5), u_r0(2.0, 4.5);
  std::normal_distribution<double> noise(0.0, noise_sd);
  std::vector<double> alpha(npis);
  for (auto& a : alpha) a = u_alpha(rng);
  for (std::size_t c = 0; c < countries; ++c) p.r0.push_back(u_r0(rng));
  p.target = Grid(days, countries);
  for (std::size_t c = 0; c < countries; ++c)
    for (std::size_t t = 0; t < days; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < npis; ++i)
        if (p.x.at(i, t, c)) s += alpha[i];
      const double r = p.r0[c] * std::exp(-s);
      p.target(t, c) = th == Theorem::NoisyR ? r * std::exp(noise(rng)) : r_to_growth(r, gi) * std::exp(noise(rng) * 0.2);
    }
  return p;
}

struct MleCheckRow {
  std::string npi;
  double theorem_value = 0.0;  ///< exp(-a_i) from the closed form at the joint optimum of the others
  double grid_value = 0.0;     ///< exp(-a_i) from 1-D grid search at the same point
  double joint_value = 0.0;    ///< exp(-a_i) from coordinate ascent to the joint optimum
};

inline std::vector<MleCheckRow> mle_check(const MlProblem& p, Theorem th) {
  const auto joint = coordinate_ascent(p, th);
  std::vector<MleCheckRow> rows;
  for (std::size_t i = 0; i < p.x.n_npis(); ++i) {
    MleCheckRow row;
    row.npi = p.x.npi_names[i];
    row.theorem_value = theorem_update(th, p, i, joint.alpha);
    row.grid_value = std::exp(-grid_search_alpha(th, p, i, joint.alpha));
    row.joint_value = std::exp(-joint.alpha[i]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace npi
