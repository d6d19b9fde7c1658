#pragma once

// Human Mortality Database 1x1 period tables and the rectangular
// age x year surfaces every other module consumes.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "morticast/csv.hpp"
#include "morticast/error.hpp"

namespace morticast {

inline constexpr int kOpenAge = 110;
inline constexpr int kAgesPerYear = kOpenAge + 1;

enum class TableKind { DeathRates, Deaths, Exposures };
enum class Sex { Female, Male, Total };

inline std::string_view to_string(Sex sex) {
  switch (sex) {
    case Sex::Female: return "female";
    case Sex::Male: return "male";
    case Sex::Total: return "total";
  }
  return "female";
}

inline Sex parse_sex(std::string_view s) {
  if (s == "female" || s == "Female" || s == "females" || s == "Females" || s == "f") return Sex::Female;
  if (s == "male" || s == "Male" || s == "males" || s == "Males" || s == "m") return Sex::Male;
  if (s == "total" || s == "Total" || s == "t") return Sex::Total;
  throw Error(ErrorKind::ConfigInvalid, fmt::format("unknown sex '{}'", s));
}

struct HmdRow {
  int year = 0;
  int age = 0;  // 110 encodes "110+"
  std::optional<double> female;
  std::optional<double> male;
  std::optional<double> total;

  const std::optional<double>& value(Sex sex) const {
    switch (sex) {
      case Sex::Female: return female;
      case Sex::Male: return male;
      default: return total;
    }
  }
  std::optional<double>& value(Sex sex) {
    return const_cast<std::optional<double>&>(std::as_const(*this).value(sex));
  }

  bool operator==(const HmdRow&) const = default;
};

/// Parsed 1x1 table. Rows are sorted by (year, age); every year carries ages 0..110.
struct HmdTable {
  std::string country_code;
  TableKind kind = TableKind::DeathRates;
  std::vector<HmdRow> rows;

  bool operator==(const HmdTable&) const = default;

  int first_year() const { return rows.empty() ? 0 : rows.front().year; }
  int last_year() const { return rows.empty() ? 0 : rows.back().year; }

  const HmdRow* find(int year, int age) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), std::pair{year, age}, [](const HmdRow& r, auto key) {
      return std::pair{r.year, r.age} < key;
    });
    if (it == rows.end() || it->year != year || it->age != age) return nullptr;
    return &*it;
  }
};

struct FilledCell {
  int age = 0;
  int year = 0;
  bool operator==(const FilledCell&) const = default;
};

/// Death rates m(x, y): rows are ages, columns are years.
struct MortalitySurface {
  std::vector<int> ages;
  std::vector<int> years;
  Eigen::MatrixXd rates;
  Sex sex = Sex::Female;
  std::string source_label;
  /// Cells imputed by a fill policy; empty unless one was requested.
  std::vector<FilledCell> filled;
  /// Whittaker penalty used to pre-smooth the log rates, if any.
  std::optional<double> smoothing_lambda;

  double at(int age, int year) const { return rates(age - ages.front(), year - years.front()); }

  bool operator==(const MortalitySurface& o) const {
    return ages == o.ages && years == o.years && rates.rows() == o.rates.rows() &&
           rates.cols() == o.rates.cols() && rates == o.rates && sex == o.sex && source_label == o.source_label &&
           filled == o.filled && smoothing_lambda == o.smoothing_lambda;
  }
};

namespace detail {

inline bool contiguous(const std::vector<int>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] != v[i - 1] + 1) return false;
  return true;
}

inline std::vector<int> iota_range(int first, int last) {
  std::vector<int> v;
  for (int i = first; i <= last; ++i) v.push_back(i);
  return v;
}

inline bool is_year_token(std::string_view tok) {
  return tok.size() == 4 && std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace detail

inline void validate(const MortalitySurface& s) {
  if (s.ages.empty() || s.years.empty()) throw Error(ErrorKind::GridMismatch, "empty surface");
  if (!detail::contiguous(s.ages) || !detail::contiguous(s.years))
    throw Error(ErrorKind::GridMismatch, "ages and years must be contiguous and increasing");
  if (s.rates.rows() != static_cast<Eigen::Index>(s.ages.size()) ||
      s.rates.cols() != static_cast<Eigen::Index>(s.years.size()))
    throw Error(ErrorKind::GridMismatch, "rate matrix does not match the age/year grid");
  for (Eigen::Index i = 0; i < s.rates.rows(); ++i)
    for (Eigen::Index j = 0; j < s.rates.cols(); ++j)
      if (!std::isfinite(s.rates(i, j)) || s.rates(i, j) < 0.0)
        throw Error(ErrorKind::NonpositiveRate, fmt::format("invalid rate {} at age {}, year {}", s.rates(i, j),
                                                            s.ages[i], s.years[j]));
}

/// Parses an HMD 1x1 text table (Year Age Female Male Total).
inline HmdTable parse_hmd_file(std::string_view text, TableKind kind, std::string country_code = {}) {
  HmdTable table;
  table.kind = kind;
  table.country_code = std::move(country_code);

  const auto all = csv::lines(std::string(text));
  bool in_data = false;
  std::map<std::pair<int, int>, std::size_t> seen;
  for (std::size_t n = 0; n < all.size(); ++n) {
    const std::size_t lineno = n + 1;
    auto toks = csv::tokens(all[n]);
    if (toks.empty()) continue;
    if (!in_data) {
      if (!detail::is_year_token(toks.front())) continue;
      in_data = true;
    }
    if (toks.size() != 5)
      throw Error(ErrorKind::MalformedRow, fmt::format("line {}: expected 5 columns, got {}", lineno, toks.size()));
    auto year = csv::parse_int(toks[0]);
    if (!year || !detail::is_year_token(toks[0]))
      throw Error(ErrorKind::MalformedRow, fmt::format("line {}: bad year '{}'", lineno, toks[0]));
    std::string_view age_tok = toks[1];
    if (age_tok == "110+") age_tok = "110";
    auto age = csv::parse_int(age_tok);
    if (!age || *age < 0 || *age > kOpenAge)
      throw Error(ErrorKind::MalformedRow, fmt::format("line {}: bad age '{}'", lineno, toks[1]));

    HmdRow row;
    row.year = static_cast<int>(*year);
    row.age = static_cast<int>(*age);
    std::optional<double>* cols[3] = {&row.female, &row.male, &row.total};
    for (int c = 0; c < 3; ++c) {
      auto tok = toks[2 + c];
      if (tok == ".") continue;
      auto v = csv::parse_double(tok);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorKind::MalformedRow, fmt::format("line {}: unparsable number '{}'", lineno, tok));
      if (*v < 0.0 && kind == TableKind::DeathRates)
        throw Error(ErrorKind::MalformedRow, fmt::format("line {}: negative rate '{}'", lineno, tok));
      *cols[c] = *v;
    }
    if (!seen.emplace(std::pair{row.year, row.age}, lineno).second)
      throw Error(ErrorKind::MalformedRow,
                  fmt::format("line {}: duplicate entry for year {}, age {}", lineno, row.year, row.age));
    table.rows.push_back(row);
  }
  if (table.rows.empty()) throw Error(ErrorKind::EmptyFile, "no data rows");

  std::sort(table.rows.begin(), table.rows.end(),
            [](const HmdRow& a, const HmdRow& b) { return std::pair{a.year, a.age} < std::pair{b.year, b.age}; });
  std::map<int, int> per_year;
  for (const auto& r : table.rows) ++per_year[r.year];
  for (auto [year, count] : per_year)
    if (count != kAgesPerYear)
      throw Error(ErrorKind::RaggedYear, fmt::format("year {} has {} of {} ages", year, count, kAgesPerYear));
  return table;
}

/// Writes a table back in HMD layout. parse_hmd_file(serialize_hmd(t)) == t.
inline std::string serialize_hmd(const HmdTable& table) {
  std::string kind;
  switch (table.kind) {
    case TableKind::DeathRates: kind = "Death rates"; break;
    case TableKind::Deaths: kind = "Deaths"; break;
    case TableKind::Exposures: kind = "Exposure to risk"; break;
  }
  std::string out = fmt::format("{}, {} (period 1x1)\n\n", table.country_code.empty() ? "Unknown" : table.country_code,
                                kind);
  out += "  Year      Age         Female           Male          Total\n";
  auto cell = [](const std::optional<double>& v) { return v ? csv::num(*v) : std::string("."); };
  for (const auto& r : table.rows) {
    out += fmt::format("  {:4d}   {:>6}   {:>14}   {:>14}   {:>14}\n", r.year,
                       r.age == kOpenAge ? std::string("110+") : std::to_string(r.age), cell(r.female), cell(r.male),
                       cell(r.total));
  }
  return out;
}

enum class FillPolicy {
  None,       ///< absent cells are an error
  CarryDown,  ///< absent or zero cells take the rate of the next younger age in the same year
};

inline FillPolicy parse_fill_policy(std::string_view s) {
  if (s == "none" || s.empty()) return FillPolicy::None;
  if (s == "carry-down") return FillPolicy::CarryDown;
  throw Error(ErrorKind::ConfigInvalid, fmt::format("unknown fill policy '{}'", s));
}

inline std::string_view to_string(FillPolicy p) { return p == FillPolicy::None ? "none" : "carry-down"; }

inline MortalitySurface to_surface(const HmdTable& table, Sex sex, int year_min, int year_max,
                                   FillPolicy fill = FillPolicy::None) {
  if (table.kind != TableKind::DeathRates)
    throw Error(ErrorKind::GridMismatch, "to_surface needs a death-rate table; use rates_from_counts for counts");
  if (year_min > year_max || year_min < table.first_year() || year_max > table.last_year())
    throw Error(ErrorKind::WindowOutOfRange, fmt::format("window {}-{} outside table {}-{}", year_min, year_max,
                                                         table.first_year(), table.last_year()));
  MortalitySurface s;
  s.ages = detail::iota_range(0, kOpenAge);
  s.years = detail::iota_range(year_min, year_max);
  s.sex = sex;
  s.source_label = table.country_code;
  s.rates.resize(kAgesPerYear, static_cast<Eigen::Index>(s.years.size()));
  for (std::size_t j = 0; j < s.years.size(); ++j) {
    const int year = s.years[j];
    for (int age = 0; age <= kOpenAge; ++age) {
      const HmdRow* row = table.find(year, age);
      if (row == nullptr)
        throw Error(ErrorKind::WindowOutOfRange, fmt::format("year {} missing from table", year));
      const auto& v = row->value(sex);
      const bool needs_fill = !v || (fill == FillPolicy::CarryDown && *v <= 0.0);
      if (!needs_fill) {
        s.rates(age, j) = *v;
        continue;
      }
      if (fill == FillPolicy::None || age == 0)
        throw Error(ErrorKind::MissingCell, fmt::format("no usable rate at age {}, year {}", age, year));
      s.rates(age, j) = s.rates(age - 1, j);
      s.filled.push_back({age, year});
    }
  }
  return s;
}

/// Inverse of to_surface for complete 0..110 surfaces.
inline HmdTable to_table(const MortalitySurface& s) {
  if (s.ages.size() != static_cast<std::size_t>(kAgesPerYear) || s.ages.front() != 0)
    throw Error(ErrorKind::GridMismatch, "HMD tables need ages 0..110");
  HmdTable t;
  t.country_code = s.source_label;
  t.kind = TableKind::DeathRates;
  for (std::size_t j = 0; j < s.years.size(); ++j)
    for (std::size_t i = 0; i < s.ages.size(); ++i) {
      HmdRow r;
      r.year = s.years[j];
      r.age = s.ages[i];
      r.value(s.sex) = s.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      t.rows.push_back(r);
    }
  return t;
}

/// Occurrence-exposure rates D/E for all three sex columns. Zero exposure yields an absent cell.
inline HmdTable rates_table_from_counts(const HmdTable& deaths, const HmdTable& exposures) {
  if (deaths.rows.size() != exposures.rows.size())
    throw Error(ErrorKind::GridMismatch, "deaths and exposures cover different grids");
  HmdTable out;
  out.country_code = deaths.country_code;
  out.kind = TableKind::DeathRates;
  out.rows.reserve(deaths.rows.size());
  for (std::size_t i = 0; i < deaths.rows.size(); ++i) {
    const auto& d = deaths.rows[i];
    const auto& e = exposures.rows[i];
    if (d.year != e.year || d.age != e.age)
      throw Error(ErrorKind::GridMismatch, fmt::format("grid differs at year {}, age {}", d.year, d.age));
    HmdRow r;
    r.year = d.year;
    r.age = d.age;
    for (Sex sex : {Sex::Female, Sex::Male, Sex::Total}) {
      const auto& dv = d.value(sex);
      const auto& ev = e.value(sex);
      if ((dv && *dv < 0.0) || (ev && *ev < 0.0))
        throw Error(ErrorKind::NegativeCount, fmt::format("negative count at year {}, age {}", d.year, d.age));
      if (dv && ev && *ev > 0.0) r.value(sex) = *dv / *ev;
    }
    out.rows.push_back(r);
  }
  return out;
}

inline MortalitySurface rates_from_counts(const HmdTable& deaths, const HmdTable& exposures, Sex sex, int year_min,
                                          int year_max, FillPolicy fill = FillPolicy::None) {
  return to_surface(rates_table_from_counts(deaths, exposures), sex, year_min, year_max, fill);
}

/// Sub-surface over an age band and year window.
inline MortalitySurface slice(const MortalitySurface& s, int age_min, int age_max, int year_min, int year_max) {
  if (age_min < s.ages.front() || age_max > s.ages.back() || age_min > age_max)
    throw Error(ErrorKind::WindowOutOfRange, fmt::format("ages {}-{} outside surface", age_min, age_max));
  if (year_min < s.years.front() || year_max > s.years.back() || year_min > year_max)
    throw Error(ErrorKind::WindowOutOfRange, fmt::format("years {}-{} outside surface {}-{}", year_min, year_max,
                                                         s.years.front(), s.years.back()));
  MortalitySurface out;
  out.ages = detail::iota_range(age_min, age_max);
  out.years = detail::iota_range(year_min, year_max);
  out.sex = s.sex;
  out.source_label = s.source_label;
  out.rates = s.rates.block(age_min - s.ages.front(), year_min - s.years.front(),
                            static_cast<Eigen::Index>(out.ages.size()), static_cast<Eigen::Index>(out.years.size()));
  out.smoothing_lambda = s.smoothing_lambda;
  for (const auto& f : s.filled)
    if (f.age >= age_min && f.age <= age_max && f.year >= year_min && f.year <= year_max) out.filled.push_back(f);
  return out;
}

// ---- canonical `age,year,value` CSV ----

inline std::string grid_to_csv(const std::vector<int>& ages, const std::vector<int>& years,
                               const Eigen::MatrixXd& values) {
  std::string out = "age,year,value\n";
  for (std::size_t i = 0; i < ages.size(); ++i)
    for (std::size_t j = 0; j < years.size(); ++j)
      out += fmt::format("{},{},{}\n", ages[i], years[j],
                         csv::num(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
  return out;
}

struct Grid {
  std::vector<int> ages;
  std::vector<int> years;
  Eigen::MatrixXd values;
};

inline Grid grid_from_csv(const std::string& text) {
  auto t = csv::read_table(text);
  const auto ca = t.column("age"), cy = t.column("year"), cv = t.column("value");
  if (t.rows.empty()) throw Error(ErrorKind::EmptyFile, "no data rows");
  std::set<int> ages, years;
  std::map<std::pair<int, int>, double> cells;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int age = static_cast<int>(csv::to_int(t.rows[r][ca], r + 2));
    const int year = static_cast<int>(csv::to_int(t.rows[r][cy], r + 2));
    const double v = csv::to_double(t.rows[r][cv], r + 2);
    if (!cells.emplace(std::pair{age, year}, v).second)
      throw Error(ErrorKind::MalformedRow, fmt::format("duplicate cell age {}, year {}", age, year));
    ages.insert(age);
    years.insert(year);
  }
  Grid g;
  g.ages.assign(ages.begin(), ages.end());
  g.years.assign(years.begin(), years.end());
  if (!detail::contiguous(g.ages) || !detail::contiguous(g.years) || cells.size() != ages.size() * years.size())
    throw Error(ErrorKind::GridMismatch, "CSV grid is not a complete contiguous rectangle");
  g.values.resize(static_cast<Eigen::Index>(g.ages.size()), static_cast<Eigen::Index>(g.years.size()));
  for (auto [key, v] : cells) g.values(key.first - g.ages.front(), key.second - g.years.front()) = v;
  return g;
}

inline std::string surface_to_csv(const MortalitySurface& s) { return grid_to_csv(s.ages, s.years, s.rates); }

inline MortalitySurface surface_from_csv(const std::string& text, Sex sex = Sex::Female, std::string label = {}) {
  auto g = grid_from_csv(text);
  MortalitySurface s;
  s.ages = std::move(g.ages);
  s.years = std::move(g.years);
  s.rates = std::move(g.values);
  s.sex = sex;
  s.source_label = std::move(label);
  validate(s);
  return s;
}

}  // namespace morticast
