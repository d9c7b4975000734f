#pragma once

// File formats: NPI and count CSVs in, the same CSVs out, and the JSON run
// configuration used by the command-line tool.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/tokenizer.hpp>
#include <json.hpp>

#include "npi/errors.hpp"
#include "npi/harness.hpp"
#include "npi/inference.hpp"
#include "npi/model.hpp"
#include "npi/panel.hpp"
#include "npi/trace.hpp"

namespace npi {

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  ///< source line of each row

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing CSV column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  std::vector<std::string> cells;
  try {
    for (const auto& cell : Tokenizer(line)) cells.push_back(cell);
  } catch (const boost::escaped_list_error& e) {
    throw ParseError(std::string("malformed CSV line: ") + e.what());
  }
  for (auto& cell : cells) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
  }
  return cells;
}

/// Reads a headed CSV. An empty file yields an empty table.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  CsvTable t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError(path + ":" + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(n);
  }
  return t;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\\") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + '"';
}

// ---------------------------------------------------------------------------
// Ingest

struct IngestOptions {
  bool cumulative = false;  ///< count columns hold running totals
};

struct Ingested {
  NpiPanel panel;
  CountData counts;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<double> parse_count(const std::string& cell, const std::string& where) {
  if (cell.empty() || cell == "NA" || cell == "nan") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size() || !std::isfinite(v)) throw ParseError(where + ": not a count: '" + cell + "'");
  return v;
}

}  // namespace detail

/// Counts CSV with columns country_code, date, new_cases, new_deaths. Every
/// country must cover the full date range. Missing values and negative
/// daily counts are masked.
inline CountData read_counts_csv(const std::string& path, const IngestOptions& opt,
                                 std::vector<std::string>* warnings = nullptr) {
  const auto table = read_csv(path);
  if (table.rows.empty()) throw ParseError(path + ": no count rows");
  const auto col_c = table.column("country_code"), col_d = table.column("date"),
             col_cases = table.column("new_cases"), col_deaths = table.column("new_deaths");

  std::vector<std::string> countries;
  std::map<std::string, std::map<std::chrono::sys_days, std::pair<std::optional<double>, std::optional<double>>>> by;
  std::chrono::sys_days first = std::chrono::sys_days::max(), last = std::chrono::sys_days::min();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
    const auto day = parse_iso_date(row[col_d]);
    if (!by.contains(row[col_c])) countries.push_back(row[col_c]);
    auto& series = by[row[col_c]];
    if (series.contains(day)) throw ParseError(where + ": duplicate row for " + row[col_c] + " " + row[col_d]);
    series[day] = {detail::parse_count(row[col_cases], where), detail::parse_count(row[col_deaths], where)};
    first = std::min(first, day);
    last = std::max(last, day);
  }
  const auto n_days = static_cast<std::size_t>((last - first).count() + 1);

  std::string gaps;
  for (const auto& code : countries) {
    std::vector<std::string> missing;
    for (std::size_t t = 0; t < n_days; ++t) {
      const auto day = first + std::chrono::days(t);
      if (!by[code].contains(day)) missing.push_back(format_iso_date(day));
    }
    if (missing.empty()) continue;
    gaps += "\n  " + code + ":";
    for (const auto& d : missing) gaps += " " + d;
  }
  if (!gaps.empty()) throw ParseError(path + ": missing dates" + gaps);

  CountData out(countries, first, n_days);
  std::size_t negatives = 0;
  for (std::size_t c = 0; c < countries.size(); ++c) {
    const auto& series = by[countries[c]];
    auto fill = [&](bool cases_stream, Grid& y, MaskGrid& mask) {
      std::optional<double> previous;
      for (std::size_t t = 0; t < n_days; ++t) {
        const auto& cell = series.at(first + std::chrono::days(t));
        const auto raw = cases_stream ? cell.first : cell.second;
        std::optional<double> daily = raw;
        if (opt.cumulative) {
          daily = raw && previous ? std::optional<double>(*raw - *previous) : std::nullopt;
          if (raw) previous = raw;
        }
        if (daily && *daily < 0.0) {
          ++negatives;
          daily.reset();
        }
        y(t, c) = daily.value_or(0.0);
        mask.set(t, c, !daily.has_value());
      }
    };
    fill(true, out.cases, out.case_mask);
    fill(false, out.deaths, out.death_mask);
  }
  if (negatives && warnings) warnings->push_back(std::to_string(negatives) + " negative daily counts masked");
  return out;
}

/// NPI CSV with columns country_code, date, npi_name, active. The panel spans
/// the countries and days of `counts`; absent rows are inactive.
inline NpiPanel read_npis_csv(const std::string& path, const CountData& counts,
                              std::vector<std::string>* warnings = nullptr) {
  const auto table = read_csv(path);
  std::vector<std::string> names;
  if (table.rows.empty()) {
    if (warnings) warnings->push_back(path + ": no NPI rows; panel has no active interventions");
    return NpiPanel({}, counts.countries, counts.start, counts.n_days());
  }
  const auto col_c = table.column("country_code"), col_d = table.column("date"), col_n = table.column("npi_name"),
             col_a = table.column("active");
  for (const auto& row : table.rows)
    if (std::find(names.begin(), names.end(), row[col_n]) == names.end()) names.push_back(row[col_n]);
  NpiPanel panel(names, counts.countries, counts.start, counts.n_days());
  std::set<std::string> unknown_countries;
  std::size_t outside = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = path + ":" + std::to_string(table.line_numbers[r]);
    bool on = false;
    if (row[col_a] == "1") on = true;
    else if (row[col_a] != "0") throw ParseError(where + ": activation must be 0 or 1, found '" + row[col_a] + "'");
    const auto c = std::find(counts.countries.begin(), counts.countries.end(), row[col_c]);
    if (c == counts.countries.end()) {
      unknown_countries.insert(row[col_c]);
      continue;
    }
    const auto offset = (parse_iso_date(row[col_d]) - counts.start).count();
    if (offset < 0 || offset >= static_cast<long>(counts.n_days())) {
      ++outside;
      continue;
    }
    const auto i = static_cast<std::size_t>(std::find(names.begin(), names.end(), row[col_n]) - names.begin());
    panel.set(i, static_cast<std::size_t>(offset), static_cast<std::size_t>(c - counts.countries.begin()), on);
  }
  if (warnings) {
    for (const auto& code : unknown_countries) warnings->push_back("NPI rows for " + code + " have no counts; ignored");
    if (outside) warnings->push_back(std::to_string(outside) + " NPI rows outside the count date range ignored");
  }
  return panel;
}

inline Ingested ingest(const std::string& npis_path, const std::string& counts_path, const IngestOptions& opt = {}) {
  Ingested out;
  out.counts = read_counts_csv(counts_path, opt, &out.warnings);
  out.panel = read_npis_csv(npis_path, out.counts, &out.warnings);
  return out;
}

// ---------------------------------------------------------------------------
// Emit

inline void write_counts_csv(const std::string& path, const CountData& counts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "country_code,date,new_cases,new_deaths\n";
  for (std::size_t c = 0; c < counts.n_countries(); ++c)
    for (std::size_t t = 0; t < counts.n_days(); ++t) {
      out << csv_escape(counts.countries[c]) << ',' << format_iso_date(counts.start + std::chrono::days(t)) << ',';
      if (!counts.case_mask(t, c)) out << format_double(counts.cases(t, c));
      out << ',';
      if (!counts.death_mask(t, c)) out << format_double(counts.deaths(t, c));
      out << '\n';
    }
}

inline void write_npis_csv(const std::string& path, const NpiPanel& panel) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "country_code,date,npi_name,active\n";
  for (std::size_t c = 0; c < panel.n_countries(); ++c)
    for (std::size_t t = 0; t < panel.n_days; ++t)
      for (std::size_t i = 0; i < panel.n_npis(); ++i)
        out << csv_escape(panel.countries[c]) << ',' << panel.date(t) << ',' << csv_escape(panel.npi_names[i]) << ','
            << int(panel.at(i, t, c)) << '\n';
}

// ---------------------------------------------------------------------------
// Run configuration

struct SimulateSettings {
  std::size_t countries = 20;
  std::size_t days = 100;
  std::size_t npis = 9;
  std::string start_date = "2020-02-01";
};

struct HoldoutSettings {
  std::vector<std::string> test_countries = default_test_countries();
  std::size_t keep_days = 14;
};

struct SensitivitySettings {
  std::vector<std::string> categories;  ///< empty: all
  std::vector<std::string> add_ins;     ///< extra NPI columns tried one at a time
  std::size_t workers = 1;
};

struct CvSettings {
  std::size_t folds = 4;
  std::vector<double> grid{0.05, 0.1, 0.2, 0.4, 0.8};
};

struct RunConfig {
  ModelConfig model = ModelConfig::for_variant("default");
  MaskRules mask;
  FitSettings fit;
  std::string npis_path, counts_path;
  bool cumulative = false;
  std::string out_dir = "out";
  std::vector<std::string> npis;  ///< NPI columns used in fits; empty: all in the file
  SimulateSettings simulate;
  HoldoutSettings holdout;
  SensitivitySettings sensitivity;
  CvSettings cv;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
}

template <typename T>
void read_to(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + where + (where.empty() ? "" : ".") + key + "': " + e.what());
  }
}

template <typename E>
E enum_by_name(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, v] : table)
    if (s == name) return v;
  throw ConfigError(std::string("unknown ") + what + ": " + s);
}

inline const std::initializer_list<std::pair<const char*, EffectForm>> kEffects{
    {"multiplicative", EffectForm::Multiplicative},
    {"additive", EffectForm::Additive},
    {"different-effects", EffectForm::DifferentEffects}};
inline const std::initializer_list<std::pair<const char*, NoiseKind>> kNoise{
    {"growth", NoiseKind::GrowthRate}, {"r", NoiseKind::ReproductionNumber}, {"none", NoiseKind::None}};
inline const std::initializer_list<std::pair<const char*, InfectionProcess>> kProcess{
    {"exponential-growth", InfectionProcess::ExponentialGrowth}, {"discrete-renewal", InfectionProcess::DiscreteRenewal}};
inline const std::initializer_list<std::pair<const char*, OutputSet>> kOutputs{
    {"cases-and-deaths", OutputSet::CasesAndDeaths}, {"deaths-only", OutputSet::DeathsOnly}};
inline const std::initializer_list<std::pair<const char*, AlphaPrior>> kAlphaPriors{
    {"asymmetric-laplace", AlphaPrior::AsymmetricLaplace},
    {"normal", AlphaPrior::Normal},
    {"half-normal", AlphaPrior::HalfNormal},
    {"dirichlet", AlphaPrior::Dirichlet}};

template <typename E>
std::string name_of(E v, std::initializer_list<std::pair<const char*, E>> table) {
  for (const auto& [name, e] : table)
    if (e == v) return name;
  return "?";
}

inline void read_delay(const json& j, DelaySpec& d, const std::string& where) {
  reject_unknown(j, {"mean", "dispersion", "truncation"}, where);
  read_to(j, "mean", d.mean, where);
  read_to(j, "dispersion", d.dispersion, where);
  read_to(j, "truncation", d.truncation, where);
}

}  // namespace detail

/// Parses a JSON run configuration. Unknown keys at any level are rejected;
/// absent keys keep their defaults.
inline RunConfig parse_run_config(const std::string& text) {
  using detail::json;
  using detail::read_to;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  detail::reject_unknown(j, {"variant", "model", "epi", "priors", "mask", "sampler", "paths", "npis", "simulate",
                             "holdout", "sensitivity", "cv"},
                         "");
  RunConfig rc;
  if (j.contains("variant")) {
    if (!j["variant"].is_string()) throw ConfigError("'variant' must be a name");
    const auto name = j["variant"].get<std::string>();
    if (name != "custom") rc.model = ModelConfig::for_variant(name);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    detail::reject_unknown(m, {"effect", "noise", "noise_scale", "process", "outputs", "sigma_alpha"}, "model");
    auto& v = rc.model.variant;
    std::string s;
    if (m.contains("effect")) {
      read_to(m, "effect", s, "model");
      v.effect = detail::enum_by_name(s, detail::kEffects, "effect form");
      rc.model.priors.alpha_prior =
          v.effect == EffectForm::Additive ? AlphaPrior::Dirichlet : PriorConfig{}.alpha_prior;
    }
    if (m.contains("noise")) {
      read_to(m, "noise", s, "model");
      v.noise.kind = detail::enum_by_name(s, detail::kNoise, "noise placement");
      if (v.noise.kind == NoiseKind::None) v.noise.sigma = 0.0;
      else if (!(v.noise.sigma > 0.0)) v.noise.sigma = kDefaultSigmaGrowth;
    }
    read_to(m, "noise_scale", v.noise.sigma, "model");
    if (m.contains("process")) {
      read_to(m, "process", s, "model");
      v.process = detail::enum_by_name(s, detail::kProcess, "infection process");
    }
    if (m.contains("outputs")) {
      read_to(m, "outputs", s, "model");
      v.outputs = detail::enum_by_name(s, detail::kOutputs, "output set");
    }
    read_to(m, "sigma_alpha", rc.model.sigma_alpha, "model");
    const auto named = variant_by_name(v.name);
    if (named.effect != v.effect || !(named.noise == v.noise) || named.process != v.process ||
        named.outputs != v.outputs)
      v.name = "custom";
  }
  if (j.contains("epi")) {
    const auto& e = j["epi"];
    detail::reject_unknown(e, {"case_delay", "death_delay", "gi_mean", "gi_sd", "gi_truncation"}, "epi");
    if (e.contains("case_delay")) detail::read_delay(e["case_delay"], rc.model.epi.case_delay, "epi.case_delay");
    if (e.contains("death_delay")) detail::read_delay(e["death_delay"], rc.model.epi.death_delay, "epi.death_delay");
    read_to(e, "gi_mean", rc.model.epi.gi_mean, "epi");
    read_to(e, "gi_sd", rc.model.epi.gi_sd, "epi");
    read_to(e, "gi_truncation", rc.model.epi.gi_truncation, "epi");
  }
  if (j.contains("priors")) {
    const auto& p = j["priors"];
    detail::reject_unknown(p, {"alpha_prior", "alpha_sd", "dirichlet_concentration", "r0_mean", "r0_scale_sd",
                               "n0_log_sd", "psi_sd"},
                           "priors");
    auto& pr = rc.model.priors;
    if (p.contains("alpha_prior")) {
      std::string s;
      read_to(p, "alpha_prior", s, "priors");
      pr.alpha_prior = detail::enum_by_name(s, detail::kAlphaPriors, "alpha prior");
    }
    read_to(p, "alpha_sd", pr.alpha_sd, "priors");
    read_to(p, "dirichlet_concentration", pr.dirichlet_concentration, "priors");
    read_to(p, "r0_mean", pr.r0_mean, "priors");
    read_to(p, "r0_scale_sd", pr.r0_scale_sd, "priors");
    read_to(p, "n0_log_sd", pr.n0_log_sd, "priors");
    read_to(p, "psi_sd", pr.psi_sd, "priors");
  }
  if (j.contains("mask")) {
    const auto& m = j["mask"];
    detail::reject_unknown(m, {"case_threshold", "death_threshold", "case_window_lag", "death_window_lag"}, "mask");
    read_to(m, "case_threshold", rc.mask.case_threshold, "mask");
    read_to(m, "death_threshold", rc.mask.death_threshold, "mask");
    read_to(m, "case_window_lag", rc.mask.case_window_lag, "mask");
    read_to(m, "death_window_lag", rc.mask.death_window_lag, "mask");
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    detail::reject_unknown(s, {"chains", "samples", "warmup", "seed", "target_accept", "max_depth", "metric_rank",
                               "parallel"},
                           "sampler");
    read_to(s, "chains", rc.fit.chains, "sampler");
    read_to(s, "samples", rc.fit.sampler.samples, "sampler");
    read_to(s, "warmup", rc.fit.sampler.warmup, "sampler");
    read_to(s, "seed", rc.fit.seed, "sampler");
    read_to(s, "target_accept", rc.fit.sampler.target_accept, "sampler");
    read_to(s, "max_depth", rc.fit.sampler.max_depth, "sampler");
    read_to(s, "metric_rank", rc.fit.sampler.metric_rank, "sampler");
    read_to(s, "parallel", rc.fit.parallel, "sampler");
  }
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    detail::reject_unknown(p, {"npis", "counts", "out", "cumulative"}, "paths");
    read_to(p, "npis", rc.npis_path, "paths");
    read_to(p, "counts", rc.counts_path, "paths");
    read_to(p, "out", rc.out_dir, "paths");
    read_to(p, "cumulative", rc.cumulative, "paths");
  }
  read_to(j, "npis", rc.npis, "");
  if (j.contains("simulate")) {
    const auto& s = j["simulate"];
    detail::reject_unknown(s, {"countries", "days", "npis", "start_date"}, "simulate");
    read_to(s, "countries", rc.simulate.countries, "simulate");
    read_to(s, "days", rc.simulate.days, "simulate");
    read_to(s, "npis", rc.simulate.npis, "simulate");
    read_to(s, "start_date", rc.simulate.start_date, "simulate");
  }
  if (j.contains("holdout")) {
    const auto& h = j["holdout"];
    detail::reject_unknown(h, {"test_countries", "keep_days"}, "holdout");
    read_to(h, "test_countries", rc.holdout.test_countries, "holdout");
    read_to(h, "keep_days", rc.holdout.keep_days, "holdout");
  }
  if (j.contains("sensitivity")) {
    const auto& s = j["sensitivity"];
    detail::reject_unknown(s, {"categories", "add_ins", "workers"}, "sensitivity");
    read_to(s, "categories", rc.sensitivity.categories, "sensitivity");
    read_to(s, "add_ins", rc.sensitivity.add_ins, "sensitivity");
    read_to(s, "workers", rc.sensitivity.workers, "sensitivity");
    for (const auto& c : rc.sensitivity.categories) (void)sensitivity_category_by_name(c);
  }
  if (j.contains("cv")) {
    const auto& c = j["cv"];
    detail::reject_unknown(c, {"folds", "grid"}, "cv");
    read_to(c, "folds", rc.cv.folds, "cv");
    read_to(c, "grid", rc.cv.grid, "cv");
  }
  rc.model.validate();
  rc.mask.validate();
  if (rc.fit.chains < 1 || rc.fit.sampler.samples < 1 || rc.fit.sampler.warmup < 0)
    throw ConfigError("sampler needs chains >= 1, samples >= 1, warmup >= 0");
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

/// Every effective setting, in the layout parse_run_config accepts.
inline nlohmann::json run_config_json(const RunConfig& rc) {
  using nlohmann::json;
  const auto& v = rc.model.variant;
  const auto& e = rc.model.epi;
  const auto& p = rc.model.priors;
  auto delay = [](const DelaySpec& d) {
    return json{{"mean", d.mean}, {"dispersion", d.dispersion}, {"truncation", d.truncation}};
  };
  return json{
      {"variant", v.name},
      {"model",
       {{"effect", detail::name_of(v.effect, detail::kEffects)},
        {"noise", detail::name_of(v.noise.kind, detail::kNoise)},
        {"noise_scale", v.noise.sigma},
        {"process", detail::name_of(v.process, detail::kProcess)},
        {"outputs", detail::name_of(v.outputs, detail::kOutputs)},
        {"sigma_alpha", rc.model.sigma_alpha}}},
      {"epi",
       {{"case_delay", delay(e.case_delay)},
        {"death_delay", delay(e.death_delay)},
        {"gi_mean", e.gi_mean},
        {"gi_sd", e.gi_sd},
        {"gi_truncation", e.gi_truncation}}},
      {"priors",
       {{"alpha_prior", detail::name_of(p.alpha_prior, detail::kAlphaPriors)},
        {"alpha_sd", p.alpha_sd},
        {"dirichlet_concentration", p.dirichlet_concentration},
        {"r0_mean", p.r0_mean},
        {"r0_scale_sd", p.r0_scale_sd},
        {"n0_log_sd", p.n0_log_sd},
        {"psi_sd", p.psi_sd}}},
      {"mask",
       {{"case_threshold", rc.mask.case_threshold},
        {"death_threshold", rc.mask.death_threshold},
        {"case_window_lag", rc.mask.case_window_lag},
        {"death_window_lag", rc.mask.death_window_lag}}},
      {"sampler",
       {{"chains", rc.fit.chains},
        {"samples", rc.fit.sampler.samples},
        {"warmup", rc.fit.sampler.warmup},
        {"seed", rc.fit.seed},
        {"target_accept", rc.fit.sampler.target_accept},
        {"max_depth", rc.fit.sampler.max_depth},
        {"metric_rank", rc.fit.sampler.metric_rank},
        {"parallel", rc.fit.parallel}}},
      {"paths", {{"npis", rc.npis_path}, {"counts", rc.counts_path}, {"out", rc.out_dir}, {"cumulative", rc.cumulative}}},
      {"npis", rc.npis},
      {"simulate",
       {{"countries", rc.simulate.countries},
        {"days", rc.simulate.days},
        {"npis", rc.simulate.npis},
        {"start_date", rc.simulate.start_date}}},
      {"holdout", {{"test_countries", rc.holdout.test_countries}, {"keep_days", rc.holdout.keep_days}}},
      {"sensitivity",
       {{"categories", rc.sensitivity.categories},
        {"add_ins", rc.sensitivity.add_ins},
        {"workers", rc.sensitivity.workers}}},
      {"cv", {{"folds", rc.cv.folds}, {"grid", rc.cv.grid}}},
  };
}

}  // namespace npi
