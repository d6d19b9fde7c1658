#pragma once

// Lee-Carter baseline: ln m(x,t) = a[x] + b[x] k[t], sum(b) = 1, sum(k) = 0,
// k extrapolated as a random walk with drift.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "morticast/error.hpp"
#include "morticast/hmd_ingest.hpp"
#include "morticast/lifetable.hpp"

namespace morticast {

struct LeeCarterFit {
  std::vector<int> ages;
  std::vector<int> years;
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd k;
  double drift = 0.0;
  double drift_se = 0.0;
  double innovation_sd = 0.0;

  Eigen::MatrixXd log_rates() const { return a.replicate(1, k.size()) + b * k.transpose(); }
};

inline LeeCarterFit fit_leecarter(const MortalitySurface& surface) {
  if ((surface.rates.array() <= 0.0).any())
    throw Error(ErrorKind::NonpositiveRate, "Lee-Carter needs strictly positive rates");
  if (surface.years.size() < 2) throw Error(ErrorKind::TooFewYears, "Lee-Carter needs at least two years");
  LeeCarterFit fit;
  fit.ages = surface.ages;
  fit.years = surface.years;
  const Eigen::MatrixXd lm = surface.rates.array().log();
  fit.a = lm.rowwise().mean();
  const Eigen::MatrixXd centered = lm.colwise() - fit.a;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd u = svd.matrixU().col(0);
  const Eigen::VectorXd v = svd.matrixV().col(0);
  const double s = svd.singularValues()[0];
  const double usum = u.sum();
  fit.b = u / usum;
  fit.k = s * usum * v;
  fit.k.array() -= fit.k.mean();  // exact zero-sum up to rounding

  const Eigen::Index T = fit.k.size();
  fit.drift = (fit.k[T - 1] - fit.k[0]) / static_cast<double>(T - 1);
  if (T > 2) {
    double ss = 0.0;
    for (Eigen::Index t = 1; t < T; ++t) {
      const double e = fit.k[t] - fit.k[t - 1] - fit.drift;
      ss += e * e;
    }
    fit.innovation_sd = std::sqrt(ss / static_cast<double>(T - 2));
    fit.drift_se = fit.innovation_sd / std::sqrt(static_cast<double>(T - 1));
  }
  return fit;
}

/// Gaussian fan anchored at the actual jump-off rates. Higher quantile levels
/// mean more improvement (lower k), matching the ordering of rho-based fans.
inline ForecastFan forecast_leecarter(const LeeCarterFit& fit, std::span<const double> jumpoff,
                                      const std::vector<int>& horizon, const std::vector<double>& levels) {
  if (jumpoff.size() != fit.ages.size())
    throw Error(ErrorKind::ShapeMismatch, "jump-off rates do not match the fitted ages");
  if (horizon.empty() || horizon.front() <= fit.years.back())
    throw Error(ErrorKind::NonContiguousHorizon, "Lee-Carter horizon must follow the fit period");
  for (std::size_t i = 1; i < horizon.size(); ++i)
    if (horizon[i] != horizon[i - 1] + 1) throw Error(ErrorKind::NonContiguousHorizon, "horizon has gaps");

  const boost::math::normal standard;
  ForecastFan fan;
  fan.quantile_levels = levels;
  fan.ages = fit.ages;
  fan.years = horizon;
  fan.jumpoff_year = fit.years.back();
  fan.provenance = "lee-carter";
  fan.m_fan = Array3<double>(levels.size(), fit.ages.size(), horizon.size());
  const double var_innov = fit.innovation_sd * fit.innovation_sd;
  const double var_drift = fit.drift_se * fit.drift_se;
  for (std::size_t q = 0; q < levels.size(); ++q) {
    const double z = boost::math::quantile(standard, levels[q]);
    for (std::size_t h = 0; h < horizon.size(); ++h) {
      const double steps = static_cast<double>(horizon[h] - fit.years.back());
      const double dk = steps * fit.drift - z * std::sqrt(steps * var_innov + steps * steps * var_drift);
      for (std::size_t x = 0; x < fit.ages.size(); ++x)
        fan.m_fan(q, x, h) = jumpoff[x] * std::exp(fit.b[static_cast<Eigen::Index>(x)] * dk);
    }
  }
  fan.e0 = e0_fan(fan.m_fan);
  return fan;
}

}  // namespace morticast
