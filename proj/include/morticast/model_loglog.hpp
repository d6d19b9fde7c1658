#pragma once

// Log-log model for improvement rates.
//
// Pre-fit: per age, OLS of ln rho on ln t gives (theta1, theta2); theta2 is the
// constant elasticity of rho with respect to time.
// Bayesian layer:
//   rho(x,t) ~ N(exp(beta1[x] + beta2[x] ln t), sigma^2)
//   beta1[x] ~ N(theta1[x], sigma1^2),  beta2[x] ~ N(theta2[x], sigma2^2)
//   sigma, sigma1, sigma2 ~ U(0, 1)

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "morticast/error.hpp"
#include "morticast/improvement.hpp"
#include "morticast/model_linear.hpp"
#include "morticast/rho_forecast.hpp"
#include "morticast/sampler.hpp"

namespace morticast {

struct LogLogPrefit {
  std::vector<int> ages;
  Eigen::VectorXd theta1;
  Eigen::VectorXd theta2;
  std::vector<int> n_used;
  std::vector<std::vector<int>> excluded;  ///< years with rho <= 0, per age
  std::vector<bool> fallback;              ///< fewer than two usable points: theta2 = 0, theta1 = ln(floor)
};

inline LogLogPrefit prefit_loglog(const ImprovementSurface& data, const TimeIndex& time, double floor = 0.001) {
  detail::require_finite(data);
  if (!(floor > 0.0)) throw Error(ErrorKind::InvalidConfig, "prefit floor must be positive");
  if (data.years.size() < 2 || time.t(data.years.front()) < 1.0)
    throw Error(ErrorKind::DegenerateRegression, "need >= 2 years with t >= 1");

  LogLogPrefit p;
  p.ages = data.ages;
  const auto n_ages = static_cast<std::size_t>(data.n_ages());
  p.theta1.resize(data.n_ages());
  p.theta2.resize(data.n_ages());
  p.n_used.assign(n_ages, 0);
  p.excluded.assign(n_ages, {});
  p.fallback.assign(n_ages, false);
  for (std::size_t x = 0; x < n_ages; ++x) {
    std::vector<double> lt, ly;
    for (std::size_t j = 0; j < data.years.size(); ++j) {
      const double r = data.rho(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j));
      if (r > 0.0) {
        lt.push_back(std::log(time.t(data.years[j])));
        ly.push_back(std::log(r));
      } else {
        p.excluded[x].push_back(data.years[j]);
      }
    }
    p.n_used[x] = static_cast<int>(lt.size());
    const auto xi = static_cast<Eigen::Index>(x);
    if (lt.size() < 2) {
      p.theta1[xi] = std::log(floor);
      p.theta2[xi] = 0.0;
      p.fallback[x] = true;
      continue;
    }
    auto f = detail::ols_line(lt, ly);
    if (!std::isfinite(f.slope) || !std::isfinite(f.intercept))
      throw Error(ErrorKind::DegenerateRegression, fmt::format("age {}: zero variance in ln t", data.ages[x]));
    p.theta1[xi] = f.intercept;
    p.theta2[xi] = f.slope;
  }
  return p;
}

inline std::string prefit_to_csv(const LogLogPrefit& p) {
  std::string out = "age,theta1,theta2,n_used\n";
  for (std::size_t x = 0; x < p.ages.size(); ++x)
    out += fmt::format("{},{},{},{}\n", p.ages[x], csv::num(p.theta1[static_cast<Eigen::Index>(x)]),
                       csv::num(p.theta2[static_cast<Eigen::Index>(x)]), p.n_used[x]);
  return out;
}

struct LogLogModelParams {
  Eigen::VectorXd beta1;
  Eigen::VectorXd beta2;
  double sigma = 0.1;
  double sigma1 = 0.1;
  double sigma2 = 0.1;
};

/// Upper bounds of the uniform priors on the three standard deviations (lower bound 0).
struct LogLogPriors {
  double sigma_upper = 1.0;
  double sigma1_upper = 1.0;
  double sigma2_upper = 1.0;
};

inline double loglog_log_likelihood(const LogLogModelParams& p, const ImprovementSurface& data,
                                    const TimeIndex& time) {
  double ll = 0.0;
  for (Eigen::Index x = 0; x < data.n_ages(); ++x)
    for (Eigen::Index j = 0; j < data.n_years(); ++j)
      ll += detail::normal_logpdf(data.rho(x, j),
                                  std::exp(p.beta1[x] + p.beta2[x] * std::log(time.t(data.years[j]))), p.sigma);
  return ll;
}

inline double loglog_log_density(const LogLogModelParams& p, const LogLogPrefit& prefit,
                                 const ImprovementSurface& data, const TimeIndex& time,
                                 const LogLogPriors& priors = {}) {
  detail::require_finite(data);
  double lp = detail::log_uniform(p.sigma, {0.0, priors.sigma_upper}) +
              detail::log_uniform(p.sigma1, {0.0, priors.sigma1_upper}) +
              detail::log_uniform(p.sigma2, {0.0, priors.sigma2_upper});
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < data.n_ages(); ++x)
    lp += detail::normal_logpdf(p.beta1[x], prefit.theta1[x], p.sigma1) +
          detail::normal_logpdf(p.beta2[x], prefit.theta2[x], p.sigma2);
  return lp + loglog_log_likelihood(p, data, time);
}

/// Sampler target. Layout: beta1[0..X), beta2[0..X), sigma, sigma1, sigma2.
class LogLogModel {
 public:
  LogLogModel(const ImprovementSurface& data, TimeIndex time, LogLogPrefit prefit, LogLogPriors priors = {})
      : data_(&data), time_(time), prefit_(std::move(prefit)), priors_(priors),
        n_ages_(static_cast<std::size_t>(data.n_ages())) {
    detail::require_finite(data);
    for (int y : data.years) log_t_.push_back(std::log(time.t(y)));
  }

  enum Hyper : std::size_t { kSigma = 0, kSigma1, kSigma2, kHyperCount };

  std::size_t dimension() const { return 2 * n_ages_ + kHyperCount; }
  std::size_t hyper(Hyper h) const { return 2 * n_ages_ + h; }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (int a : data_->ages) names.push_back(fmt::format("beta1[{}]", a));
    for (int a : data_->ages) names.push_back(fmt::format("beta2[{}]", a));
    for (const char* n : {"sigma", "sigma1", "sigma2"}) names.emplace_back(n);
    return names;
  }

  LogLogModelParams unpack(std::span<const double> v) const {
    LogLogModelParams p;
    p.beta1 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n_ages_));
    p.beta2 = Eigen::Map<const Eigen::VectorXd>(v.data() + n_ages_, static_cast<Eigen::Index>(n_ages_));
    p.sigma = v[hyper(kSigma)];
    p.sigma1 = v[hyper(kSigma1)];
    p.sigma2 = v[hyper(kSigma2)];
    return p;
  }

  std::vector<double> pack(const LogLogModelParams& p) const {
    std::vector<double> v(dimension());
    for (std::size_t x = 0; x < n_ages_; ++x) {
      v[x] = p.beta1[static_cast<Eigen::Index>(x)];
      v[n_ages_ + x] = p.beta2[static_cast<Eigen::Index>(x)];
    }
    v[hyper(kSigma)] = p.sigma;
    v[hyper(kSigma1)] = p.sigma1;
    v[hyper(kSigma2)] = p.sigma2;
    return v;
  }

  double log_density(std::span<const double> v) const {
    return loglog_log_density(unpack(v), prefit_, *data_, time_, priors_);
  }

  double conditional_log_density(std::span<const double> v, std::size_t i) const {
    const double sigma = v[hyper(kSigma)], s1 = v[hyper(kSigma1)], s2 = v[hyper(kSigma2)];
    if (i < n_ages_) {
      const auto xi = static_cast<Eigen::Index>(i);
      return row_loglik(i, v[i], v[n_ages_ + i], sigma) + detail::normal_logpdf(v[i], prefit_.theta1[xi], s1);
    }
    if (i < 2 * n_ages_) {
      const std::size_t x = i - n_ages_;
      const auto xi = static_cast<Eigen::Index>(x);
      return row_loglik(x, v[x], v[i], sigma) + detail::normal_logpdf(v[i], prefit_.theta2[xi], s2);
    }
    double lp = 0.0;
    switch (i - 2 * n_ages_) {
      case kSigma:
        for (std::size_t x = 0; x < n_ages_; ++x) lp += row_loglik(x, v[x], v[n_ages_ + x], sigma);
        return lp;
      case kSigma1:
        for (std::size_t x = 0; x < n_ages_; ++x)
          lp += detail::normal_logpdf(v[x], prefit_.theta1[static_cast<Eigen::Index>(x)], s1);
        return lp;
      default:
        for (std::size_t x = 0; x < n_ages_; ++x)
          lp += detail::normal_logpdf(v[n_ages_ + x], prefit_.theta2[static_cast<Eigen::Index>(x)], s2);
        return lp;
    }
  }

  Interval support(std::size_t i) const {
    if (i < 2 * n_ages_) return {};
    switch (i - 2 * n_ages_) {
      case kSigma: return {0.0, priors_.sigma_upper};
      case kSigma1: return {0.0, priors_.sigma1_upper};
      default: return {0.0, priors_.sigma2_upper};
    }
  }

  double proposal_scale(std::size_t i) const { return scales_.empty() ? 0.01 : scales_[i]; }

  /// Betas at the pre-fit thetas; sigma from the pooled residual around the pre-fit curve.
  std::vector<double> initial_values() {
    LogLogModelParams p;
    p.beta1 = prefit_.theta1;
    p.beta2 = prefit_.theta2;
    double ss = 0.0;
    for (std::size_t x = 0; x < n_ages_; ++x)
      for (std::size_t j = 0; j < log_t_.size(); ++j) {
        const auto xi = static_cast<Eigen::Index>(x);
        const double e = data_->rho(xi, static_cast<Eigen::Index>(j)) -
                         std::exp(prefit_.theta1[xi] + prefit_.theta2[xi] * log_t_[j]);
        ss += e * e;
      }
    const double n = static_cast<double>(n_ages_ * log_t_.size());
    p.sigma = std::clamp(std::sqrt(ss / n), 1e-4 * priors_.sigma_upper, 0.99 * priors_.sigma_upper);
    p.sigma1 = std::min(0.1, 0.5 * priors_.sigma1_upper);
    p.sigma2 = std::min(0.05, 0.5 * priors_.sigma2_upper);

    scales_.assign(dimension(), 0.0);
    for (std::size_t x = 0; x < n_ages_; ++x) {
      scales_[x] = std::min(0.1, p.sigma1);
      scales_[n_ages_ + x] = std::min(0.05, p.sigma2);
    }
    scales_[hyper(kSigma)] = 0.05 * p.sigma;
    scales_[hyper(kSigma1)] = 0.2 * p.sigma1;
    scales_[hyper(kSigma2)] = 0.2 * p.sigma2;
    return pack(p);
  }

  const LogLogPrefit& prefit() const { return prefit_; }

 private:
  double row_loglik(std::size_t x, double b1, double b2, double sigma) const {
    const double inv = 1.0 / sigma;
    double ss = 0.0;
    for (std::size_t j = 0; j < log_t_.size(); ++j) {
      const double e = data_->rho(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j)) -
                       std::exp(b1 + b2 * log_t_[j]);
      ss += e * e;
    }
    const double n = static_cast<double>(log_t_.size());
    return -0.5 * n * detail::kLog2Pi - n * std::log(sigma) - 0.5 * ss * inv * inv;
  }

  const ImprovementSurface* data_;
  TimeIndex time_;
  LogLogPrefit prefit_;
  LogLogPriors priors_;
  std::size_t n_ages_;
  std::vector<double> log_t_;
  std::vector<double> scales_;
};

inline PosteriorDraws fit_loglog(const ImprovementSurface& data, const TimeIndex& time, const McmcConfig& config,
                                 const LogLogPriors& priors = {}, const RunOptions& options = {},
                                 double floor = 0.001) {
  config.validate();
  if (data.n_years() < 3) throw Error(ErrorKind::TooFewYears, "log-log model needs >= 3 years of rho per age");
  LogLogModel model(data, time, prefit_loglog(data, time, floor), priors);
  const auto base = model.initial_values();
  return run_chains(model, config, detail::jittered_inits(model, base, config), options);
}

/// Per-draw forecasts rho(x,t) = exp(beta1[x] + beta2[x] ln t) (+ N(0, sigma^2) on the predictive channel).
inline RhoForecast project_loglog(const PosteriorDraws& draws, const ImprovementSurface& data, const TimeIndex& time,
                                  const std::vector<int>& horizon, const ProjectOptions& options = {}) {
  check_horizon(horizon, data.years.back());
  const std::size_t n_ages = data.ages.size();
  const std::size_t begin = std::min(options.age_begin, n_ages);
  const std::size_t end = std::min(options.age_end, n_ages);
  const std::size_t sigma_idx = draws.index_of("sigma");
  const std::size_t b1_idx = draws.index_of(fmt::format("beta1[{}]", data.ages.front()));
  const std::size_t b2_idx = draws.index_of(fmt::format("beta2[{}]", data.ages.front()));

  std::vector<double> log_t;
  for (int y : horizon) log_t.push_back(std::log(time.t(y)));

  RhoForecast f;
  f.ages.assign(data.ages.begin() + static_cast<std::ptrdiff_t>(begin),
                data.ages.begin() + static_cast<std::ptrdiff_t>(end));
  f.years = horizon;
  const std::size_t nd = draws.n_total();
  f.predictive = Array3<double>(nd, end - begin, horizon.size());
  f.mean = Array3<double>(nd, end - begin, horizon.size());
  for (std::size_t x = begin; x < end; ++x) {
    std::mt19937_64 rng(derive_seed(options.seed, stream::kForecast, x));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t d = 0; d < nd; ++d) {
      const double b1 = draws.pooled(d, b1_idx + x), b2 = draws.pooled(d, b2_idx + x);
      const double sigma = draws.pooled(d, sigma_idx);
      for (std::size_t h = 0; h < horizon.size(); ++h) {
        const double mean = std::exp(b1 + b2 * log_t[h]);
        const double eps = normal(rng);
        f.mean(d, x - begin, h) = mean;
        f.predictive(d, x - begin, h) = options.noise ? mean + sigma * eps : mean;
      }
    }
  }
  return f;
}

}  // namespace morticast
