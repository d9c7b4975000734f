#pragma once

// Fit reports in text and JSON. Both are pure functions of the trace and the
// run configuration so that repeated runs produce identical files.

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "npi/harness.hpp"
#include "npi/inference.hpp"
#include "npi/io.hpp"

namespace npi {

struct FitReport {
  std::string command;
  std::string variant;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t chains = 0, samples = 0;
  EffectUnit unit = EffectUnit::PercentReductionInR;
  std::vector<NpiSummary> npis;
  double rhat_max = NAN;
  std::size_t rhat_over = 0;  ///< parameters with R-hat >= 1.05
  std::size_t divergences = 0;
  std::size_t warmup_divergences = 0;
  bool quality_ok = false;
  std::vector<std::string> warnings;
  nlohmann::json extra = nlohmann::json::object();  ///< command-specific scalars
  nlohmann::json config;
};

inline FitReport make_fit_report(const std::string& command, const RunConfig& rc, const NpiPanel& panel,
                                 const FitResult& fit) {
  FitReport r;
  r.command = command;
  r.variant = rc.model.variant.name;
  r.seed = fit.trace.seed;
  r.config_hash = fit.trace.config_hash;
  r.chains = fit.trace.n_chains;
  r.samples = fit.trace.n_samples;
  r.unit = effect_unit(rc.model.variant.effect);
  r.npis = summarize_effects(fit.trace, panel, rc.model.variant.effect);
  r.rhat_max = fit.max_rhat;
  for (double x : fit.rhat) r.rhat_over += x >= 1.05 ? 1 : 0;
  r.divergences = fit.divergences;
  r.warmup_divergences = fit.trace.warmup_divergences;
  r.quality_ok = fit.quality_ok;
  r.config = run_config_json(rc);
  r.config["paths"].erase("out");  // where files land is not a fit input
  return r;
}

inline std::string unit_name(EffectUnit u) {
  return u == EffectUnit::PercentAdditive ? "percent (additive share)" : "percent reduction in R";
}

inline nlohmann::json report_json(const FitReport& r) {
  using nlohmann::json;
  json npis = json::array();
  for (const auto& s : r.npis)
    npis.push_back({{"npi", s.npi},
                    {"median_percent", s.median_percent},
                    {"ci_lower_2.5", s.ci_lower},
                    {"ci_upper_97.5", s.ci_upper}});
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"command", r.command},
              {"variant", r.variant},
              {"seed", r.seed},
              {"config_hash", r.config_hash},
              {"chains", r.chains},
              {"samples_per_chain", r.samples},
              {"unit", unit_name(r.unit)},
              {"npis", npis},
              {"rhat_max", num(r.rhat_max)},
              {"rhat_at_or_above_1.05", r.rhat_over},
              {"divergences", r.divergences},
              {"warmup_divergences", r.warmup_divergences},
              {"quality_ok", r.quality_ok},
              {"warnings", r.warnings},
              {"results", r.extra},
              {"config", r.config}};
}

inline std::string report_text(const FitReport& r) {
  std::ostringstream os;
  os << "command: " << r.command << "\nvariant: " << r.variant << "\nseed: " << r.seed
     << "\nconfig hash: " << r.config_hash << "\nchains x samples: " << r.chains << " x " << r.samples << "\n";
  if (!r.npis.empty()) {
    os << "\neffectiveness (" << unit_name(r.unit) << "): median [2.5%, 97.5%]\n";
    std::size_t width = 4;
    for (const auto& s : r.npis) width = std::max(width, s.npi.size());
    os << std::fixed << std::setprecision(1);
    for (const auto& s : r.npis)
      os << "  " << std::left << std::setw(static_cast<int>(width)) << s.npi << std::right << "  " << std::setw(6)
         << s.median_percent << "  [" << s.ci_lower << ", " << s.ci_upper << "]\n";
    os.unsetf(std::ios::fixed);
    os << std::setprecision(6);
  }
  os << "\nmax R-hat: " << (std::isfinite(r.rhat_max) ? format_double(r.rhat_max) : "n/a")
     << "\nparameters with R-hat >= 1.05: " << r.rhat_over << "\ndivergences: " << r.divergences
     << " (warmup: " << r.warmup_divergences << ")\nquality gate: " << (r.quality_ok ? "passed" : "FAILED") << "\n";
  if (!r.extra.empty()) {
    os << "\nresults:\n";
    for (const auto& [k, v] : r.extra.items()) os << "  " << k << ": " << v.dump() << "\n";
  }
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  os << "\nsettings:\n" << r.config.dump(2) << "\n";
  return os.str();
}

}  // namespace npi
