#pragma once

// Posterior draws in constrained space, convergence diagnostics, summaries
// and the columnar trace file.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "npi/errors.hpp"

namespace npi {

struct Trace {
  std::vector<std::string> names;
  std::size_t n_chains = 0;
  std::size_t n_samples = 0;
  std::vector<double> values;          ///< [chain][sample][param]
  std::vector<std::uint8_t> divergent;  ///< [chain][sample]
  std::vector<double> step_sizes;      ///< per chain, after adaptation
  std::vector<double> mean_leapfrogs;  ///< per chain
  std::size_t warmup_divergences = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::size_t n_params() const { return names.size(); }
  double at(std::size_t chain, std::size_t sample, std::size_t param) const {
    return values[(chain * n_samples + sample) * names.size() + param];
  }
  const double* draw(std::size_t chain, std::size_t sample) const {
    return values.data() + (chain * n_samples + sample) * names.size();
  }
  std::size_t index_of(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return k;
    throw LookupError("parameter not in trace: " + name);
  }
  /// All draws of one parameter, chains concatenated.
  std::vector<double> column(std::size_t param) const {
    std::vector<double> out;
    out.reserve(n_chains * n_samples);
    for (std::size_t ch = 0; ch < n_chains; ++ch)
      for (std::size_t s = 0; s < n_samples; ++s) out.push_back(at(ch, s, param));
    return out;
  }
  std::size_t divergences() const {
    return static_cast<std::size_t>(std::count(divergent.begin(), divergent.end(), 1));
  }
  bool operator==(const Trace&) const = default;
};

/// Split-R-hat of one parameter given per-chain draw sequences.
/// Constant draws across all chains give exactly 1.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw UnavailableError("R-hat needs at least two chains");
  const std::size_t n_full = chains.front().size();
  for (const auto& ch : chains)
    if (ch.size() != n_full) throw ShapeError("chains have different lengths");
  if (n_full < 4) throw UnavailableError("R-hat needs at least four draws per chain");
  const std::size_t half = n_full / 2;
  std::vector<double> means, vars;
  for (const auto& ch : chains) {
    for (std::size_t part = 0; part < 2; ++part) {
      const std::size_t begin = part == 0 ? 0 : n_full - half;
      double mean = 0.0;
      for (std::size_t k = 0; k < half; ++k) mean += ch[begin + k];
      mean /= static_cast<double>(half);
      double ss = 0.0;
      for (std::size_t k = 0; k < half; ++k) ss += (ch[begin + k] - mean) * (ch[begin + k] - mean);
      means.push_back(mean);
      vars.push_back(ss / static_cast<double>(half - 1));
    }
  }
  const double m = static_cast<double>(means.size());
  const double n = static_cast<double>(half);
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= m;
  double b_over_n = 0.0;
  for (double v : means) b_over_n += (v - grand) * (v - grand);
  b_over_n /= (m - 1.0);
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m;
  if (w == 0.0) return b_over_n == 0.0 ? 1.0 : INFINITY;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

/// Split-R-hat for every parameter in the trace.
inline std::vector<double> rhat(const Trace& trace) {
  if (trace.n_chains < 2) throw UnavailableError("R-hat needs at least two chains");
  std::vector<double> out(trace.n_params());
  std::vector<std::vector<double>> chains(trace.n_chains, std::vector<double>(trace.n_samples));
  for (std::size_t p = 0; p < trace.n_params(); ++p) {
    for (std::size_t ch = 0; ch < trace.n_chains; ++ch)
      for (std::size_t s = 0; s < trace.n_samples; ++s) chains[ch][s] = trace.at(ch, s, p);
    out[p] = split_rhat(chains);
  }
  return out;
}

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw UnavailableError("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Columnar CSV: comment header with seed and config hash, then one row per
/// draw with chain and draw indices followed by one column per parameter.
inline void write_trace_csv(const Trace& trace, const std::string& path,
                            const std::vector<std::size_t>* columns = nullptr) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  std::vector<std::size_t> cols;
  if (columns) {
    cols = *columns;
  } else {
    for (std::size_t p = 0; p < trace.n_params(); ++p) cols.push_back(p);
  }
  out << "# seed=" << trace.seed << "\n# config_hash=" << trace.config_hash << "\n# chains=" << trace.n_chains
      << "\n# samples=" << trace.n_samples << "\nchain,draw,divergent";
  for (auto p : cols) out << ',' << trace.names[p];
  out << '\n';
  for (std::size_t ch = 0; ch < trace.n_chains; ++ch)
    for (std::size_t s = 0; s < trace.n_samples; ++s) {
      out << ch << ',' << s << ',' << int(trace.divergent[ch * trace.n_samples + s]);
      for (auto p : cols) out << ',' << format_double(trace.at(ch, s, p));
      out << '\n';
    }
}

inline Trace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file: " + path);
  Trace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# seed=", 0) == 0) trace.seed = std::stoull(line.substr(7));
    else if (line.rfind("# config_hash=", 0) == 0) trace.config_hash = line.substr(14);
    else if (line.rfind("# chains=", 0) == 0) trace.n_chains = std::stoul(line.substr(9));
    else if (line.rfind("# samples=", 0) == 0) trace.n_samples = std::stoul(line.substr(10));
    else if (line.rfind("chain,", 0) == 0) {
      std::stringstream ss(line);
      std::string cell;
      int k = 0;
      while (std::getline(ss, cell, ','))
        if (k++ >= 3) trace.names.push_back(cell);
      break;
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k == 2) trace.divergent.push_back(static_cast<std::uint8_t>(std::stoi(cell)));
      else if (k > 2) trace.values.push_back(std::stod(cell));
      ++k;
    }
  }
  if (trace.values.size() != trace.n_chains * trace.n_samples * trace.names.size())
    throw ParseError("trace file is truncated or inconsistent: " + path);
  return trace;
}

}  // namespace npi
