#pragma once

// Log-densities (with derivatives where the sampler needs them) shared by the
// epidemiological primitives, the observation model and the priors.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "npi/errors.hpp"

namespace npi {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double log_gamma(double x) { return boost::math::lgamma(x); }
inline double digamma(double x) { return boost::math::digamma(x); }

// Stirling-series lgamma and digamma for x > 0, shifted up to x >= 10 by
// recurrence. About 1e-14 relative accuracy at a fraction of the cost of the
// general routines; used in the likelihood inner loop.
namespace detail {
inline double stirling_tail(double x) {
  const double inv = 1.0 / x, inv2 = inv * inv;
  return inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
}
/// log(x) - digamma(x) for x >= 10.
inline double digamma_tail(double x) {
  const double inv = 1.0 / x, inv2 = inv * inv;
  return 0.5 * inv +
         inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
}
}  // namespace detail

inline double fast_log_gamma(double x) {
  double shift = 0.0;
  if (x < 10.0) {
    double prod = 1.0;
    while (x < 10.0) {
      prod *= x;
      x += 1.0;
    }
    shift = std::log(prod);
  }
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + detail::stirling_tail(x) - shift;
}

/// lgamma(y + psi) - lgamma(y + 1) for integer y >= 0. For large y the two
/// terms are huge and nearly equal, so the difference is taken inside the
/// Stirling expansion instead of after it.
inline double log_gamma_ratio(double y, double psi, double log_y_factorial) {
  if (y < 10.0 || y + psi < 10.0) return fast_log_gamma(y + psi) - log_y_factorial;
  const double x1 = y + psi, x2 = y + 1.0, d = psi - 1.0;
  return (x1 - 0.5) * std::log1p(d / x2) + d * std::log(x2) - d + detail::stirling_tail(x1) -
         detail::stirling_tail(x2);
}

inline double fast_digamma(double x) {
  double shift = 0.0;
  while (x < 10.0) {
    shift += 1.0 / x;
    x += 1.0;
  }
  return std::log(x) - detail::digamma_tail(x) - shift;
}

inline double log_sum_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = -INFINITY;
  for (double x : xs) m = std::max(m, x);
  if (m == -INFINITY) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// Negative binomial in the mean/dispersion parameterisation:
/// E[y] = mu, Var[y] = mu + mu^2 / psi.
inline double nb_logpmf(double y, double mu, double psi) {
  if (!(mu > 0.0) || !(psi > 0.0)) throw DomainError("nb_logpmf: mu and psi must be positive");
  if (y < 0.0 || y != std::floor(y)) throw DomainError("nb_logpmf: y must be a non-negative integer");
  const double ratio = y < 10.0 ? log_gamma(y + psi) - log_gamma(y + 1.0) : log_gamma_ratio(y, psi, 0.0);
  return ratio - log_gamma(psi) - psi * std::log1p(mu / psi) - (y > 0.0 ? y * std::log1p(psi / mu) : 0.0);
}

struct NbTerm {
  double value;
  double d_mu;
  double d_psi;
};

/// nb_logpmf plus partial derivatives. `log_y_factorial` is lgamma(y + 1),
/// hoisted because the observation is fixed across evaluations. No domain
/// checks: callers inside the sampler treat non-finite output as a rejection.
/// `lgamma_psi` and `digamma_psi` are hoisted for the same reason.
inline NbTerm nb_logpmf_grad(double y, double mu, double psi, double log_y_factorial, double lgamma_psi,
                             double digamma_psi) {
  const double log1p_mu_psi = std::log1p(mu / psi);
  const double denom = psi + mu;
  NbTerm t{};
  t.value = log_gamma_ratio(y, psi, log_y_factorial) - lgamma_psi - psi * log1p_mu_psi -
            (y > 0.0 ? y * std::log1p(psi / mu) : 0.0);
  t.d_mu = y / mu - (y + psi) / denom;
  t.d_psi = fast_digamma(y + psi) - digamma_psi - log1p_mu_psi + 1.0 - (y + psi) / denom;
  return t;
}

inline NbTerm nb_logpmf_grad(double y, double mu, double psi, double log_y_factorial) {
  return nb_logpmf_grad(y, mu, psi, log_y_factorial, fast_log_gamma(psi), fast_digamma(psi));
}

/// Terms of the NB log-pmf that depend only on the observed count.
struct NbObservation {
  double y = 0.0;
  double log_y_factorial = 0.0;

  static NbObservation make(double y) { return {y, log_gamma(y + 1.0)}; }
};

/// Terms that depend only on the dispersion.
struct NbDispersion {
  double psi = 1.0, lgamma_psi = 0.0, digamma_psi = 0.0;

  static NbDispersion make(double psi) { return {psi, fast_log_gamma(psi), fast_digamma(psi)}; }
};

inline NbTerm nb_logpmf_grad(const NbObservation& o, double mu, const NbDispersion& d) {
  return nb_logpmf_grad(o.y, mu, d.psi, o.log_y_factorial, d.lgamma_psi, d.digamma_psi);
}

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

/// Half-normal on (0, inf) with scale `sd` (location 0).
inline double half_normal_logpdf(double x, double sd) {
  return normal_logpdf(x, 0.0, sd) + std::numbers::ln2;
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Asymmetric Laplace with location m, asymmetry kappa and rate lambda:
///   p(x) = lambda / (kappa + 1/kappa) * exp(-lambda * (x - m) * s * kappa^s),  s = sign(x - m).
/// kappa < 1 puts mass kappa^2/(1+kappa^2) below m, i.e. skews toward x > m.
struct AsymmetricLaplace {
  double m = 0.0;
  double kappa = 0.5;
  double lambda = 10.0;

  double logpdf(double x) const {
    const double d = x - m;
    const double norm = std::log(lambda / (kappa + 1.0 / kappa));
    return d >= 0.0 ? norm - lambda * kappa * d : norm + lambda * d / kappa;
  }
  double dlogpdf(double x) const { return x - m >= 0.0 ? -lambda * kappa : lambda / kappa; }
  double cdf(double x) const {
    const double d = x - m;
    const double k2 = kappa * kappa;
    return d < 0.0 ? k2 / (1.0 + k2) * std::exp(lambda * d / kappa)
                   : 1.0 - std::exp(-lambda * kappa * d) / (1.0 + k2);
  }
  /// Inverse CDF, used to draw from the prior.
  double quantile(double u) const {
    const double k2 = kappa * kappa;
    const double split = k2 / (1.0 + k2);
    return u < split ? m + kappa / lambda * std::log(u / split)
                     : m - std::log((1.0 - u) * (1.0 + k2)) / (lambda * kappa);
  }
};

/// Stick-breaking bijection R^{K-1} -> open K-simplex (Stan's convention,
/// offset so that y = 0 maps to the uniform point).
struct StickBreaking {
  /// Writes K = y.size() + 1 simplex components; returns log|Jacobian|.
  static double constrain(std::span<const double> y, std::span<double> x) {
    const std::size_t k_total = y.size() + 1;
    if (x.size() != k_total) throw ShapeError("StickBreaking: output must have y.size()+1 entries");
    double remaining = 1.0;
    double log_jac = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double shifted = y[k] - std::log(static_cast<double>(k_total - k - 1));
      const double z = 1.0 / (1.0 + std::exp(-shifted));
      x[k] = remaining * z;
      // log z + (K - k) log(1 - z) summed over sticks (1-based k).
      log_jac += -std::log1p(std::exp(-shifted)) +
                 static_cast<double>(k_total - k - 1) * -std::log1p(std::exp(shifted));
      remaining -= x[k];
    }
    x[k_total - 1] = remaining;
    return log_jac;
  }

  static void unconstrain(std::span<const double> x, std::span<double> y) {
    const std::size_t k_total = x.size();
    if (y.size() + 1 != k_total) throw ShapeError("StickBreaking: y must have x.size()-1 entries");
    double remaining = 1.0;
    for (std::size_t k = 0; k + 1 < k_total; ++k) {
      const double z = x[k] / remaining;
      y[k] = std::log(z / (1.0 - z)) + std::log(static_cast<double>(k_total - k - 1));
      remaining -= x[k];
    }
  }

  /// Back-propagates d/dx through the transform and adds d(log|J|)/dy.
  /// `g_y` is accumulated into.
  static void backward(std::span<const double> y, std::span<const double> x,
                       std::span<const double> g_x, std::span<double> g_y) {
    const std::size_t k_total = x.size();
    // suffix[k] = sum_{j > k} g_x[j] * x[j]
    double suffix = g_x[k_total - 1] * x[k_total - 1];
    std::vector<double> suffix_at(k_total - 1);
    for (std::size_t k = k_total - 1; k-- > 0;) {
      suffix_at[k] = suffix;
      suffix += g_x[k] * x[k];
    }
    double remaining = 1.0;
    for (std::size_t k = 0; k + 1 < k_total; ++k) {
      const double shifted = y[k] - std::log(static_cast<double>(k_total - k - 1));
      const double z = 1.0 / (1.0 + std::exp(-shifted));
      const double one_minus_z = 1.0 / (1.0 + std::exp(shifted));
      const double g_z = g_x[k] * remaining - suffix_at[k] / one_minus_z;
      const double dz_dy = z * one_minus_z;
      g_y[k] += g_z * dz_dy + one_minus_z - static_cast<double>(k_total - k - 1) * z;
      remaining -= x[k];
    }
  }
};

}  // namespace npi
