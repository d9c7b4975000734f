#pragma once

// Data containers: NPI activation panel and daily reported counts.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "npi/errors.hpp"

namespace npi {

/// Dense days x countries grid of doubles; each country's series is contiguous.
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t n_days, std::size_t n_countries, double fill = 0.0)
      : n_days_(n_days), n_countries_(n_countries), data_(n_days * n_countries, fill) {}

  std::size_t n_days() const { return n_days_; }
  std::size_t n_countries() const { return n_countries_; }

  double& operator()(std::size_t t, std::size_t c) { return data_[c * n_days_ + t]; }
  double operator()(std::size_t t, std::size_t c) const { return data_[c * n_days_ + t]; }

  std::span<double> series(std::size_t c) { return {data_.data() + c * n_days_, n_days_}; }
  std::span<const double> series(std::size_t c) const { return {data_.data() + c * n_days_, n_days_}; }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t n_days_ = 0;
  std::size_t n_countries_ = 0;
  std::vector<double> data_;
};

/// Boolean days x countries grid (true = cell masked / excluded).
class MaskGrid {
 public:
  MaskGrid() = default;
  MaskGrid(std::size_t n_days, std::size_t n_countries, bool fill = false)
      : n_days_(n_days), n_countries_(n_countries), data_(n_days * n_countries, fill ? 1 : 0) {}

  std::size_t n_days() const { return n_days_; }
  std::size_t n_countries() const { return n_countries_; }
  bool operator()(std::size_t t, std::size_t c) const { return data_[c * n_days_ + t] != 0; }
  void set(std::size_t t, std::size_t c, bool masked) { data_[c * n_days_ + t] = masked ? 1 : 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data_) n += v;
    return n;
  }
  bool operator==(const MaskGrid&) const = default;

 private:
  std::size_t n_days_ = 0;
  std::size_t n_countries_ = 0;
  std::vector<std::uint8_t> data_;
};

inline std::chrono::sys_days parse_iso_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  const std::string s(text);
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
    throw ParseError("not an ISO-8601 date: '" + s + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ParseError("invalid calendar date: '" + s + "'");
  return std::chrono::sys_days{ymd};
}

inline std::string format_iso_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Binary activation tensor x[i, t, c].
struct NpiPanel {
  std::vector<std::string> npi_names;
  std::vector<std::string> countries;
  std::chrono::sys_days start{};
  std::size_t n_days = 0;
  /// Layout [country][day][npi].
  std::vector<std::uint8_t> active;

  NpiPanel() = default;
  NpiPanel(std::vector<std::string> npis, std::vector<std::string> country_codes, std::chrono::sys_days first_day,
           std::size_t days)
      : npi_names(std::move(npis)),
        countries(std::move(country_codes)),
        start(first_day),
        n_days(days),
        active(npi_names.size() * countries.size() * days, 0) {}

  std::size_t n_npis() const { return npi_names.size(); }
  std::size_t n_countries() const { return countries.size(); }

  bool at(std::size_t i, std::size_t t, std::size_t c) const {
    return active[(c * n_days + t) * n_npis() + i] != 0;
  }
  void set(std::size_t i, std::size_t t, std::size_t c, bool on) {
    active[(c * n_days + t) * n_npis() + i] = on ? 1 : 0;
  }
  /// Activation row for (t, c) over all NPIs.
  std::span<const std::uint8_t> row(std::size_t t, std::size_t c) const {
    return {active.data() + (c * n_days + t) * n_npis(), n_npis()};
  }

  std::string date(std::size_t t) const {
    return format_iso_date(start + std::chrono::days{static_cast<long>(t)});
  }

  std::size_t npi_index(const std::string& name) const {
    for (std::size_t i = 0; i < npi_names.size(); ++i)
      if (npi_names[i] == name) return i;
    throw LookupError("unknown NPI: " + name);
  }
  std::size_t country_index(const std::string& code) const {
    for (std::size_t c = 0; c < countries.size(); ++c)
      if (countries[c] == code) return c;
    throw LookupError("unknown country: " + code);
  }

  /// Panel restricted to the given NPI and country subsets (order preserved as given).
  NpiPanel select(const std::vector<std::size_t>& npis, const std::vector<std::size_t>& country_ids) const {
    std::vector<std::string> names, codes;
    for (auto i : npis) names.push_back(npi_names.at(i));
    for (auto c : country_ids) codes.push_back(countries.at(c));
    NpiPanel out(names, codes, start, n_days);
    for (std::size_t cc = 0; cc < country_ids.size(); ++cc)
      for (std::size_t t = 0; t < n_days; ++t)
        for (std::size_t ii = 0; ii < npis.size(); ++ii) out.set(ii, t, cc, at(npis[ii], t, country_ids[cc]));
    return out;
  }

  bool operator==(const NpiPanel&) const = default;
};

/// Daily reported cases and deaths with observation masks.
struct CountData {
  std::vector<std::string> countries;
  std::chrono::sys_days start{};
  Grid cases;
  Grid deaths;
  MaskGrid case_mask;
  MaskGrid death_mask;

  CountData() = default;
  CountData(std::vector<std::string> codes, std::chrono::sys_days first_day, std::size_t n_days)
      : countries(std::move(codes)),
        start(first_day),
        cases(n_days, countries.size()),
        deaths(n_days, countries.size()),
        case_mask(n_days, countries.size()),
        death_mask(n_days, countries.size()) {}

  std::size_t n_days() const { return cases.n_days(); }
  std::size_t n_countries() const { return countries.size(); }

  CountData select(const std::vector<std::size_t>& country_ids) const {
    std::vector<std::string> codes;
    for (auto c : country_ids) codes.push_back(countries.at(c));
    CountData out(codes, start, n_days());
    for (std::size_t cc = 0; cc < country_ids.size(); ++cc)
      for (std::size_t t = 0; t < n_days(); ++t) {
        const auto c = country_ids[cc];
        out.cases(t, cc) = cases(t, c);
        out.deaths(t, cc) = deaths(t, c);
        out.case_mask.set(t, cc, case_mask(t, c));
        out.death_mask.set(t, cc, death_mask(t, c));
      }
    return out;
  }

  bool operator==(const CountData&) const = default;
};

}  // namespace npi
