#pragma once

#include <random>

#include "npi/model.hpp"
#include "npi/simgen.hpp"

namespace npi::testing {

inline SimulatedDataset small_dataset(const std::string& variant, std::uint64_t seed, std::size_t countries = 2,
                                      std::size_t npis = 3, std::size_t days = 40) {
  Scenario sc;
  sc.n_countries = countries;
  sc.n_npis = npis;
  sc.n_days = days;
  sc.variant = variant_by_name(variant);
  sc.seed = seed;
  sc.schedule.activation_lo = 0.2;
  sc.schedule.activation_hi = 0.6;
  return simulate_dataset(sc);
}

/// A random unconstrained point in a plausible region of the posterior.
inline std::vector<double> random_point(const Model& model, std::mt19937_64& rng) {
  const auto& L = model.layout();
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> theta(L.dimension);
  for (std::size_t i = 0; i < L.n_alpha; ++i) {
    double a = 0.15 + 0.2 * n01(rng);
    if (std::abs(a) < 1e-3) a = 0.05;  // keep finite differences off the prior's kink
    theta[L.alpha + i] = a;
  }
  for (std::size_t k = 0; k < L.n_z; ++k) theta[L.z + k] = n01(rng);
  for (std::size_t c = 0; c < L.n_countries; ++c) theta[L.log_r0 + c] = std::log(3.0) + 0.2 * n01(rng);
  theta[L.log_kappa] = std::log(0.5) + 0.3 * n01(rng);
  for (std::size_t c = 0; c < L.n_countries; ++c) {
    if (L.cases) theta[L.zeta_cases + c] = std::log(20.0) + 0.5 * n01(rng);
    theta[L.zeta_deaths + c] = std::log(1.0) + 0.5 * n01(rng);
  }
  if (L.cases) theta[L.log_psi_cases] = std::log(10.0) + 0.5 * n01(rng);
  theta[L.log_psi_deaths] = std::log(10.0) + 0.5 * n01(rng);
  if (L.noise) {
    const std::size_t first = L.cases ? L.eps_cases : L.eps_deaths;
    for (std::size_t k = first; k < L.dimension; ++k) theta[k] = 0.1 * n01(rng);
  }
  return theta;
}

/// Largest relative disagreement between the analytic gradient and central
/// differences, relative error measured as |a - b| / max(|a|, |b|, 1).
inline double max_gradient_error(const Model& model, const std::vector<double>& theta, double h = 1e-5) {
  Workspace ws;
  std::vector<double> grad(theta.size()), scratch;
  model.log_density(theta, grad, ws);
  double worst = 0.0;
  auto x = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    x[k] = theta[k] + h;
    const double fp = model.log_density(x, scratch, ws);
    x[k] = theta[k] - h;
    const double fm = model.log_density(x, scratch, ws);
    x[k] = theta[k];
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1.0});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace npi::testing
