#pragma once

// Epidemiological primitives: discretised reporting delays, the gamma
// generation interval, and the conversion from reproduction number to a
// daily growth multiplier under constant exponential growth.

#include <cmath>
#include <vector>

#include "npi/distributions.hpp"
#include "npi/errors.hpp"

namespace npi {

/// Negative-binomial delay from infection to report.
struct DelaySpec {
  double mean = 10.92;
  double dispersion = 5.41;
  int truncation = 32;  ///< PMF support is lags 0 .. truncation-1

  void validate() const {
    if (!(mean > 0.0) || !(dispersion > 0.0) || truncation < 1)
      throw DomainError("DelaySpec: mean and dispersion must be positive, truncation >= 1");
  }
};

inline DelaySpec default_case_delay() { return {10.92, 5.41, 32}; }
inline DelaySpec default_death_delay() { return {21.82, 14.26, 48}; }

/// Probability mass over integer lags; probabilities[tau] is P(lag == tau).
struct DelayPmf {
  std::vector<double> probabilities;

  std::size_t size() const { return probabilities.size(); }
  double operator[](std::size_t lag) const { return probabilities[lag]; }
};

/// Truncate the NB(mean, dispersion) PMF at `truncation` lags and renormalise.
inline DelayPmf discretize_delay(const DelaySpec& spec) {
  spec.validate();
  std::vector<double> logp(static_cast<std::size_t>(spec.truncation));
  for (int lag = 0; lag < spec.truncation; ++lag)
    logp[static_cast<std::size_t>(lag)] = nb_logpmf(lag, spec.mean, spec.dispersion);
  const double log_z = log_sum_exp(logp);
  DelayPmf pmf;
  pmf.probabilities.reserve(logp.size());
  for (double lp : logp) pmf.probabilities.push_back(std::exp(lp - log_z));
  return pmf;
}

/// Gamma generation interval matched to a mean and standard deviation.
struct GenerationInterval {
  double mean = 5.06;
  double sd = 2.11;
  double shape = 0.0;  ///< nu = mean^2 / sd^2
  double rate = 0.0;   ///< beta = mean / sd^2
  int pmf_truncation = 28;
};

inline GenerationInterval gi_params(double mean, double sd, int pmf_truncation = 28) {
  if (!(mean > 0.0) || !(sd > 0.0)) throw DomainError("gi_params: mean and sd must be positive");
  if (pmf_truncation < 1) throw DomainError("gi_params: pmf_truncation must be >= 1");
  GenerationInterval gi;
  gi.mean = mean;
  gi.sd = sd;
  gi.shape = mean * mean / (sd * sd);
  gi.rate = mean / (sd * sd);
  gi.pmf_truncation = pmf_truncation;
  return gi;
}

inline GenerationInterval default_generation_interval() { return gi_params(5.06, 2.11); }

/// Daily multiplicative growth factor m = exp(beta * (R^(1/nu) - 1)).
/// Infections satisfy N_t = m * N_{t-1}; the additive growth rate is m - 1.
inline double r_to_growth(double r, const GenerationInterval& gi) {
  if (!(r > 0.0)) throw DomainError("r_to_growth: R must be positive");
  return std::exp(gi.rate * (std::pow(r, 1.0 / gi.shape) - 1.0));
}

/// Inverse of r_to_growth: R = (1 + log m / beta)^nu.
inline double growth_to_r(double multiplier, const GenerationInterval& gi) {
  if (!(multiplier > 0.0)) throw DomainError("growth_to_r: multiplier must be positive");
  const double base = 1.0 + std::log(multiplier) / gi.rate;
  if (!(base > 0.0)) throw DomainError("growth_to_r: log(m)/beta <= -1 has no reproduction number");
  return std::pow(base, gi.shape);
}

/// Renewal kernel: gamma density at lags 1..pmf_truncation, renormalised.
/// Index 0 is kept (and zero) so probabilities[tau] is the weight of lag tau.
inline DelayPmf discretize_generation_interval(const GenerationInterval& gi) {
  if (!(gi.shape > 0.0) || !(gi.rate > 0.0)) throw DomainError("generation interval not initialised");
  DelayPmf pmf;
  pmf.probabilities.assign(static_cast<std::size_t>(gi.pmf_truncation) + 1, 0.0);
  std::vector<double> logp;
  for (int lag = 1; lag <= gi.pmf_truncation; ++lag)
    logp.push_back(gi.shape * std::log(gi.rate) - log_gamma(gi.shape) +
                   (gi.shape - 1.0) * std::log(static_cast<double>(lag)) - gi.rate * lag);
  const double log_z = log_sum_exp(logp);
  for (int lag = 1; lag <= gi.pmf_truncation; ++lag)
    pmf.probabilities[static_cast<std::size_t>(lag)] = std::exp(logp[static_cast<std::size_t>(lag - 1)] - log_z);
  return pmf;
}

}  // namespace npi
