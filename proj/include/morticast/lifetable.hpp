#pragma once

// Death-rate propagation from improvement-rate forecasts, period life tables
// and life-expectancy fans.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "morticast/array3.hpp"
#include "morticast/csv.hpp"
#include "morticast/error.hpp"
#include "morticast/hmd_ingest.hpp"
#include "morticast/sampler.hpp"

namespace morticast {

/// Single-year period life table; the last age is the open interval.
struct LifeTable {
  std::vector<int> ages;
  Eigen::VectorXd m, q, a, l, d, L, T, e;

  double e0() const { return e[0]; }
};

/// Separation factor for age 0: 0.07 + 1.7 m(0), kept inside [0.01, 0.5].
inline double infant_separation(double m0) { return std::clamp(0.07 + 1.7 * m0, 0.01, 0.5); }

inline LifeTable build_lifetable(std::span<const double> rates, int first_age = 0) {
  const auto n = static_cast<Eigen::Index>(rates.size());
  if (n == 0) throw Error(ErrorKind::NonpositiveRate, "empty rate vector");
  LifeTable t;
  t.m = Eigen::Map<const Eigen::VectorXd>(rates.data(), n);
  for (Eigen::Index x = 0; x < n; ++x)
    if (!(t.m[x] > 0.0) || !std::isfinite(t.m[x]))
      throw Error(ErrorKind::NonpositiveRate, fmt::format("m = {} at age {}", t.m[x], first_age + x));
  for (Eigen::Index x = 0; x < n; ++x) t.ages.push_back(first_age + static_cast<int>(x));

  t.q.resize(n);
  t.a.resize(n);
  t.l.resize(n);
  t.d.resize(n);
  t.L.resize(n);
  t.T.resize(n);
  t.e.resize(n);
  const Eigen::Index last = n - 1;
  for (Eigen::Index x = 0; x < n; ++x) {
    t.a[x] = (x == 0 && first_age == 0 && last > 0) ? infant_separation(t.m[0]) : 0.5;
    t.q[x] = x == last ? 1.0 : std::min(1.0, t.m[x] / (1.0 + (1.0 - t.a[x]) * t.m[x]));
  }
  t.l[0] = 1.0;
  for (Eigen::Index x = 0; x < n; ++x) {
    t.d[x] = t.l[x] * t.q[x];
    if (x < last) {
      t.l[x + 1] = t.l[x] - t.d[x];
      t.L[x] = t.l[x + 1] + t.a[x] * t.d[x];
    } else {
      t.L[x] = t.l[x] / t.m[x];
    }
  }
  double acc = 0.0;
  for (Eigen::Index x = last; x >= 0; --x) {
    acc += t.L[x];
    t.T[x] = acc;
    t.e[x] = t.l[x] > 0.0 ? t.T[x] / t.l[x] : 1.0 / t.m[x];
  }
  return t;
}

/// e0 for every year of a surface whose ages start at 0.
inline std::vector<double> e0_by_year(const MortalitySurface& s) {
  if (s.ages.front() != 0) throw Error(ErrorKind::GridMismatch, "life tables need ages starting at 0");
  std::vector<double> out;
  for (Eigen::Index j = 0; j < s.rates.cols(); ++j) {
    Eigen::VectorXd col = s.rates.col(j);
    out.push_back(build_lifetable({col.data(), static_cast<std::size_t>(col.size())}).e0());
  }
  return out;
}

enum class PropagationMode {
  Literal,   ///< m(y) = m(y-1) (1 - rho)
  ExactLog,  ///< m(y) = m(y-1) exp(-rho)
};

/// Recursively propagates jump-off rates along every path of `rho` (path, age, year).
/// Paths are quantile levels for quantile-matched propagation or draws for trajectories.
inline Array3<double> propagate_paths(std::span<const double> jumpoff, const Array3<double>& rho,
                                      PropagationMode mode = PropagationMode::Literal) {
  if (jumpoff.size() != rho.dim(1))
    throw Error(ErrorKind::ShapeMismatch,
                fmt::format("{} jump-off ages but the fan has {}", jumpoff.size(), rho.dim(1)));
  Array3<double> m(rho.dim(0), rho.dim(1), rho.dim(2));
  for (std::size_t p = 0; p < rho.dim(0); ++p)
    for (std::size_t x = 0; x < rho.dim(1); ++x) {
      double level = jumpoff[x];
      for (std::size_t h = 0; h < rho.dim(2); ++h) {
        const double r = rho(p, x, h);
        if (mode == PropagationMode::Literal) {
          if (!(r < 1.0)) throw Error(ErrorKind::RhoGeqOne, fmt::format("rho = {} would make m non-positive", r));
          level *= 1.0 - r;
        } else {
          level *= std::exp(-r);
        }
        m(p, x, h) = level;
      }
    }
  return m;
}

inline Array3<double> propagate_quantiles(std::span<const double> jumpoff, const Array3<double>& rho_fan,
                                          PropagationMode mode = PropagationMode::Literal) {
  return propagate_paths(jumpoff, rho_fan, mode);
}

inline Array3<double> propagate_draws(std::span<const double> jumpoff, const Array3<double>& rho_draws,
                                      PropagationMode mode = PropagationMode::Literal) {
  return propagate_paths(jumpoff, rho_draws, mode);
}

/// Per-cell empirical quantiles over the leading (draw) axis: (draw, age, year) -> (level, age, year).
inline Array3<double> quantile_fan(const Array3<double>& per_draw, std::span<const double> levels) {
  Array3<double> fan(levels.size(), per_draw.dim(1), per_draw.dim(2));
  std::vector<double> cell(per_draw.dim(0));
  for (std::size_t x = 0; x < per_draw.dim(1); ++x)
    for (std::size_t h = 0; h < per_draw.dim(2); ++h) {
      for (std::size_t d = 0; d < per_draw.dim(0); ++d) cell[d] = per_draw(d, x, h);
      std::sort(cell.begin(), cell.end());
      for (std::size_t q = 0; q < levels.size(); ++q) fan(q, x, h) = quantile_sorted(cell, levels[q]);
    }
  return fan;
}

/// e0 for each (path, year) of an m array shaped (path, age, year) whose ages start at 0.
inline Eigen::MatrixXd e0_fan(const Array3<double>& m_fan) {
  Eigen::MatrixXd e0(static_cast<Eigen::Index>(m_fan.dim(0)), static_cast<Eigen::Index>(m_fan.dim(2)));
  std::vector<double> col(m_fan.dim(1));
  for (std::size_t p = 0; p < m_fan.dim(0); ++p)
    for (std::size_t h = 0; h < m_fan.dim(2); ++h) {
      for (std::size_t x = 0; x < m_fan.dim(1); ++x) col[x] = m_fan(p, x, h);
      e0(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(h)) = build_lifetable(col).e0();
    }
  return e0;
}

struct ForecastFan {
  std::vector<double> quantile_levels;
  std::vector<int> ages;
  std::vector<int> years;
  Array3<double> rho_fan;  ///< (level, age, year); empty for fans not built from rho
  Array3<double> m_fan;    ///< (level, age, year)
  Eigen::MatrixXd e0;      ///< level x year
  int jumpoff_year = 0;
  std::string provenance;

  std::size_t level_index(double p) const {
    for (std::size_t i = 0; i < quantile_levels.size(); ++i)
      if (std::abs(quantile_levels[i] - p) < 1e-12) return i;
    throw Error(ErrorKind::UnknownParameter, fmt::format("quantile level {} not in fan", p));
  }

  std::vector<double> e0_series(double p) const {
    const auto i = static_cast<Eigen::Index>(level_index(p));
    std::vector<double> out(static_cast<std::size_t>(e0.cols()));
    for (Eigen::Index h = 0; h < e0.cols(); ++h) out[static_cast<std::size_t>(h)] = e0(i, h);  // rows are strided
    return out;
  }
};

struct YearSeries {
  std::vector<int> years;
  std::vector<double> values;
};

struct ForecastErrors {
  std::vector<int> years;
  std::vector<double> errors;  ///< forecast - observed
  double mean_abs = 0.0;
  double max_abs = 0.0;
  double terminal = 0.0;
};

inline ForecastErrors forecast_error(const YearSeries& forecast, const YearSeries& observed) {
  if (forecast.years != observed.years || forecast.values.size() != forecast.years.size() ||
      observed.values.size() != observed.years.size())
    throw Error(ErrorKind::YearMismatch, "forecast and observed series cover different years");
  if (forecast.years.empty()) throw Error(ErrorKind::YearMismatch, "empty series");
  ForecastErrors out;
  out.years = forecast.years;
  for (std::size_t i = 0; i < forecast.values.size(); ++i) {
    const double e = forecast.values[i] - observed.values[i];
    out.errors.push_back(e);
    out.mean_abs += std::abs(e);
    out.max_abs = std::max(out.max_abs, std::abs(e));
  }
  out.mean_abs /= static_cast<double>(out.errors.size());
  out.terminal = out.errors.back();
  return out;
}

// ---- CSV ----

inline std::string fan_to_csv(const std::vector<double>& levels, const std::vector<int>& ages,
                              const std::vector<int>& years, const Array3<double>& fan, std::string_view column) {
  std::string out = fmt::format("quantile,age,year,{}\n", column);
  for (std::size_t q = 0; q < levels.size(); ++q)
    for (std::size_t x = 0; x < ages.size(); ++x)
      for (std::size_t h = 0; h < years.size(); ++h)
        out += fmt::format("{},{},{},{}\n", csv::num(levels[q]), ages[x], years[h], csv::num(fan(q, x, h)));
  return out;
}

inline std::string m_fan_to_csv(const ForecastFan& f) { return fan_to_csv(f.quantile_levels, f.ages, f.years, f.m_fan, "m"); }

inline std::string e0_fan_to_csv(const ForecastFan& f) {
  std::string out = "quantile,year,e0\n";
  for (std::size_t q = 0; q < f.quantile_levels.size(); ++q)
    for (std::size_t h = 0; h < f.years.size(); ++h)
      out += fmt::format("{},{},{}\n", csv::num(f.quantile_levels[q]), f.years[h],
                         csv::num(f.e0(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(h))));
  return out;
}

inline std::string errors_to_csv(const ForecastErrors& e) {
  std::string out = "year,E_t\n";
  for (std::size_t i = 0; i < e.years.size(); ++i) out += fmt::format("{},{}\n", e.years[i], csv::num(e.errors[i]));
  return out;
}

inline ForecastErrors errors_from_csv(const std::string& text) {
  auto t = csv::read_table(text);
  const auto cy = t.column("year"), ce = t.column("E_t");
  YearSeries f, o;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    f.years.push_back(static_cast<int>(csv::to_int(t.rows[r][cy], r + 2)));
    f.values.push_back(csv::to_double(t.rows[r][ce], r + 2));
  }
  o.years = f.years;
  o.values.assign(f.years.size(), 0.0);
  return forecast_error(f, o);
}

}  // namespace morticast
