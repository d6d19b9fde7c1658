#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "morticast/csv.hpp"
#include "morticast/error.hpp"
#include "morticast/hmd_ingest.hpp"

namespace morticast {

/// rho(x, y) = -ln(m(x, y) / m(x, y - 1)); positive when mortality fell.
struct ImprovementSurface {
  std::vector<int> ages;
  std::vector<int> years;  // first year is one past the source surface's first year
  Eigen::MatrixXd rho;
  bool smoothed_input = false;
  std::string source_label;

  double at(int age, int year) const { return rho(age - ages.front(), year - years.front()); }
  Eigen::Index n_ages() const { return rho.rows(); }
  Eigen::Index n_years() const { return rho.cols(); }
};

inline ImprovementSurface improvement_rates(const MortalitySurface& surface) {
  if (surface.years.size() < 2) throw Error(ErrorKind::TooFewYears, "need at least two years");
  const auto& m = surface.rates;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!(m(i, j) > 0.0) || !std::isfinite(m(i, j)))
        throw Error(ErrorKind::NonpositiveRate,
                    fmt::format("m = {} at age {}, year {}", m(i, j), surface.ages[i], surface.years[j]));
  ImprovementSurface out;
  out.ages = surface.ages;
  out.years.assign(surface.years.begin() + 1, surface.years.end());
  out.smoothed_input = surface.smoothing_lambda.has_value();
  out.source_label = surface.source_label;
  const Eigen::Index ny = m.cols() - 1;
  out.rho = -(m.rightCols(ny).array() / m.leftCols(ny).array()).log().matrix();
  return out;
}

/// Whittaker smoother with a second-order difference penalty:
/// argmin_s sum (z - s)^2 + lambda * sum (D2 s)^2, i.e. (I + lambda D'D) s = z.
inline Eigen::VectorXd whittaker_smooth(const Eigen::VectorXd& z, double lambda) {
  const Eigen::Index n = z.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n - 2, n);
  for (Eigen::Index i = 0; i + 2 < n; ++i) {
    d(i, i) = 1.0;
    d(i, i + 1) = -2.0;
    d(i, i + 2) = 1.0;
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) + lambda * d.transpose() * d;
  return a.ldlt().solve(z);
}

/// Smooths each age row's log rates independently over years.
inline MortalitySurface smooth_surface(const MortalitySurface& surface, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error(ErrorKind::InvalidConfig, fmt::format("smoothing lambda must be positive, got {}", lambda));
  if (surface.years.size() < 5)
    throw Error(ErrorKind::TooFewYears, fmt::format("smoothing needs >= 5 years, got {}", surface.years.size()));
  if ((surface.rates.array() <= 0.0).any()) throw Error(ErrorKind::NonpositiveRate, "cannot smooth zero rates");

  MortalitySurface out = surface;
  for (Eigen::Index i = 0; i < surface.rates.rows(); ++i) {
    Eigen::VectorXd z = surface.rates.row(i).transpose().array().log();
    out.rates.row(i) = whittaker_smooth(z, lambda).array().exp().transpose();
  }
  out.smoothing_lambda = lambda;
  return out;
}

inline std::string improvement_to_csv(const ImprovementSurface& s) { return grid_to_csv(s.ages, s.years, s.rho); }

inline ImprovementSurface improvement_from_csv(const std::string& text, std::string label = {}) {
  auto g = grid_from_csv(text);
  ImprovementSurface s;
  s.ages = std::move(g.ages);
  s.years = std::move(g.years);
  s.rho = std::move(g.values);
  s.source_label = std::move(label);
  if (!s.rho.allFinite()) throw Error(ErrorKind::NonFiniteData, "non-finite improvement rate in CSV");
  return s;
}

/// Bin index of `value`: 0 below the first break, i for [breaks[i-1], breaks[i]), k at or above the last.
inline std::size_t heatmap_bin(double value, const std::vector<double>& breaks) {
  return static_cast<std::size_t>(std::upper_bound(breaks.begin(), breaks.end(), value) - breaks.begin());
}

inline std::string surface_to_heatmap_csv(const ImprovementSurface& s, const std::vector<double>& breaks) {
  for (std::size_t i = 1; i < breaks.size(); ++i)
    if (!(breaks[i] > breaks[i - 1])) throw Error(ErrorKind::UnsortedBreaks, "breaks must be strictly increasing");
  std::string out = "age,year,value,bin\n";
  for (std::size_t i = 0; i < s.ages.size(); ++i)
    for (std::size_t j = 0; j < s.years.size(); ++j) {
      const double v = s.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out += fmt::format("{},{},{},{}\n", s.ages[i], s.years[j], csv::num(v), heatmap_bin(v, breaks));
    }
  return out;
}

}  // namespace morticast
