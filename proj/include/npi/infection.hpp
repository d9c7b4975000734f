#pragma once

// Latent infection processes and the delay convolution mapping infections to
// expected reported counts. Day 0 of every series holds the initial size N0;
// days before the window are taken to equal N0.

#include <span>
#include <vector>

#include "npi/distributions.hpp"
#include "npi/epi.hpp"
#include "npi/errors.hpp"
#include "npi/panel.hpp"

namespace npi {

/// Latent infection series for both reporting streams.
struct LatentInfections {
  Grid n_cases;
  Grid n_deaths;
};

namespace detail {
inline void check_n0(std::span<const double> n0, std::size_t n_countries) {
  if (n0.size() != n_countries) throw ShapeError("N0 length differs from country count");
  for (double v : n0)
    if (!(v > 0.0)) throw DomainError("initial infections N0 must be positive");
}
}  // namespace detail

/// N[t, c] = N0[c] * prod_{t'=1..t} m[t', c]. Row 0 of `multipliers` is unused.
inline Grid propagate_growth(std::span<const double> n0, const Grid& multipliers) {
  detail::check_n0(n0, multipliers.n_countries());
  Grid out(multipliers.n_days(), multipliers.n_countries());
  for (std::size_t c = 0; c < out.n_countries(); ++c) {
    if (out.n_days() == 0) continue;
    double level = n0[c];
    out(0, c) = level;
    for (std::size_t t = 1; t < out.n_days(); ++t) {
      level *= multipliers(t, c);
      out(t, c) = level;
    }
  }
  return out;
}

/// N[t, c] = R[t, c] * sum_{tau>=1} N[t - tau, c] * gi[tau], seeded with N0 on
/// day 0 and before. `gi_pmf` must have zero weight at lag 0.
inline Grid propagate_renewal(std::span<const double> n0, const Grid& r, const DelayPmf& gi_pmf) {
  detail::check_n0(n0, r.n_countries());
  if (gi_pmf.size() < 2 || gi_pmf[0] != 0.0)
    throw ShapeError("renewal kernel must cover lags 1.. with no mass at lag 0");
  Grid out(r.n_days(), r.n_countries());
  const std::size_t max_lag = gi_pmf.size() - 1;
  for (std::size_t c = 0; c < out.n_countries(); ++c) {
    if (out.n_days() == 0) continue;
    out(0, c) = n0[c];
    for (std::size_t t = 1; t < out.n_days(); ++t) {
      double pressure = 0.0;
      for (std::size_t tau = 1; tau <= max_lag; ++tau)
        pressure += (tau <= t ? out(t - tau, c) : n0[c]) * gi_pmf[tau];
      out(t, c) = r(t, c) * pressure;
    }
  }
  return out;
}

/// ybar[t, c] = sum_tau N[t - tau, c] * delay[tau], with N before day 0 equal to N[0, c].
inline Grid expected_counts(const Grid& n, const DelayPmf& delay) {
  if (delay.size() == 0) throw ShapeError("empty delay distribution");
  Grid out(n.n_days(), n.n_countries());
  for (std::size_t c = 0; c < n.n_countries(); ++c) {
    const auto series = n.series(c);
    auto dst = out.series(c);
    for (std::size_t t = 0; t < series.size(); ++t) {
      double acc = 0.0;
      for (std::size_t tau = 0; tau < delay.size(); ++tau)
        acc += (tau <= t ? series[t - tau] : series[0]) * delay[tau];
      dst[t] = acc;
    }
  }
  return out;
}

}  // namespace npi
