#pragma once

// Two-level linear model for improvement rates:
//   rho(x,t) ~ N(beta1[x] + beta2[x] t, sigma^2)
//   (beta1[x], beta2[x]) ~ N2((mu1, mu2), Omega),
//   Omega = [[w1^2, r w1 w2], [r w1 w2, w2^2]]
// with uniform priors sigma ~ U(0,1), mu ~ U(-0.1,0.1), w ~ U(0,1), r ~ U(-1,1).

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "morticast/error.hpp"
#include "morticast/improvement.hpp"
#include "morticast/rho_forecast.hpp"
#include "morticast/sampler.hpp"

namespace morticast {

struct LinearModelParams {
  Eigen::VectorXd beta1;
  Eigen::VectorXd beta2;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double omega1 = 0.1;
  double omega2 = 0.1;
  double rho_corr = 0.0;
  double sigma = 0.1;
};

struct LinearPriors {
  Interval sigma{0.0, 1.0};
  Interval mu{-0.1, 0.1};
  Interval omega{0.0, 1.0};
  Interval rho_corr{-1.0, 1.0};
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline void require_finite(const ImprovementSurface& data) {
  if (data.rho.size() == 0) throw Error(ErrorKind::NonFiniteData, "empty improvement surface");
  if (!data.rho.allFinite()) throw Error(ErrorKind::NonFiniteData, "improvement surface has non-finite values");
}

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

inline double log_uniform(double x, const Interval& iv) {
  return iv.contains(x) ? -std::log(iv.hi - iv.lo) : -std::numeric_limits<double>::infinity();
}

inline double bivariate_logpdf(double d1, double d2, double w1, double w2, double r) {
  const double one_minus = 1.0 - r * r;
  const double z1 = d1 / w1, z2 = d2 / w2;
  const double quad = (z1 * z1 - 2.0 * r * z1 * z2 + z2 * z2) / one_minus;
  return -kLog2Pi - std::log(w1) - std::log(w2) - 0.5 * std::log(one_minus) - 0.5 * quad;
}

/// Per-age OLS of y on t; returns (intercept, slope, residual sum of squares).
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double rss = 0.0;
};

inline LineFit ols_line(std::span<const double> t, std::span<const double> y) {
  const double n = static_cast<double>(t.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxx += (t[i] - mt) * (t[i] - mt);
    sxy += (t[i] - mt) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mt;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = y[i] - f.intercept - f.slope * t[i];
    f.rss += e * e;
  }
  return f;
}

inline double clip_into(double x, const Interval& iv, double margin) {
  const double lo = iv.lo + margin * (iv.hi - iv.lo);
  const double hi = iv.hi - margin * (iv.hi - iv.lo);
  return std::clamp(x, lo, hi);
}

}  // namespace detail

inline double linear_log_likelihood(const LinearModelParams& p, const ImprovementSurface& data, const TimeIndex& time) {
  double ll = 0.0;
  for (Eigen::Index x = 0; x < data.n_ages(); ++x)
    for (Eigen::Index j = 0; j < data.n_years(); ++j)
      ll += detail::normal_logpdf(data.rho(x, j), p.beta1[x] + p.beta2[x] * time.t(data.years[j]), p.sigma);
  return ll;
}

/// log p(data | params) + log p(params); -inf outside the prior support.
inline double linear_log_density(const LinearModelParams& p, const ImprovementSurface& data, const TimeIndex& time,
                                 const LinearPriors& priors = {}) {
  detail::require_finite(data);
  double lp = detail::log_uniform(p.sigma, priors.sigma) + detail::log_uniform(p.mu1, priors.mu) +
              detail::log_uniform(p.mu2, priors.mu) + detail::log_uniform(p.omega1, priors.omega) +
              detail::log_uniform(p.omega2, priors.omega) + detail::log_uniform(p.rho_corr, priors.rho_corr);
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < data.n_ages(); ++x)
    lp += detail::bivariate_logpdf(p.beta1[x] - p.mu1, p.beta2[x] - p.mu2, p.omega1, p.omega2, p.rho_corr);
  return lp + linear_log_likelihood(p, data, time);
}

/// Sampler target. Layout: beta1[0..X), beta2[0..X), mu1, mu2, omega1, omega2, rho_corr, sigma.
class LinearModel {
 public:
  LinearModel(const ImprovementSurface& data, TimeIndex time, LinearPriors priors = {})
      : data_(&data), time_(time), priors_(priors), n_ages_(static_cast<std::size_t>(data.n_ages())) {
    detail::require_finite(data);
    for (int y : data.years) t_.push_back(time.t(y));
  }

  enum Hyper : std::size_t { kMu1 = 0, kMu2, kOmega1, kOmega2, kRho, kSigma, kHyperCount };

  std::size_t n_ages() const { return n_ages_; }
  std::size_t dimension() const { return 2 * n_ages_ + kHyperCount; }
  std::size_t hyper(Hyper h) const { return 2 * n_ages_ + h; }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (int a : data_->ages) names.push_back(fmt::format("beta1[{}]", a));
    for (int a : data_->ages) names.push_back(fmt::format("beta2[{}]", a));
    for (const char* n : {"mu1", "mu2", "omega1", "omega2", "rho_corr", "sigma"}) names.emplace_back(n);
    return names;
  }

  LinearModelParams unpack(std::span<const double> v) const {
    LinearModelParams p;
    p.beta1 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n_ages_));
    p.beta2 = Eigen::Map<const Eigen::VectorXd>(v.data() + n_ages_, static_cast<Eigen::Index>(n_ages_));
    p.mu1 = v[hyper(kMu1)];
    p.mu2 = v[hyper(kMu2)];
    p.omega1 = v[hyper(kOmega1)];
    p.omega2 = v[hyper(kOmega2)];
    p.rho_corr = v[hyper(kRho)];
    p.sigma = v[hyper(kSigma)];
    return p;
  }

  std::vector<double> pack(const LinearModelParams& p) const {
    std::vector<double> v(dimension());
    for (std::size_t x = 0; x < n_ages_; ++x) {
      v[x] = p.beta1[static_cast<Eigen::Index>(x)];
      v[n_ages_ + x] = p.beta2[static_cast<Eigen::Index>(x)];
    }
    v[hyper(kMu1)] = p.mu1;
    v[hyper(kMu2)] = p.mu2;
    v[hyper(kOmega1)] = p.omega1;
    v[hyper(kOmega2)] = p.omega2;
    v[hyper(kRho)] = p.rho_corr;
    v[hyper(kSigma)] = p.sigma;
    return v;
  }

  double log_density(std::span<const double> v) const { return linear_log_density(unpack(v), *data_, time_, priors_); }

  double conditional_log_density(std::span<const double> v, std::size_t i) const {
    const double mu1 = v[hyper(kMu1)], mu2 = v[hyper(kMu2)];
    const double w1 = v[hyper(kOmega1)], w2 = v[hyper(kOmega2)], r = v[hyper(kRho)], sigma = v[hyper(kSigma)];
    if (i < 2 * n_ages_) {
      const std::size_t x = i % n_ages_;
      const double b1 = v[x], b2 = v[n_ages_ + x];
      return row_loglik(x, b1, b2, sigma) + detail::bivariate_logpdf(b1 - mu1, b2 - mu2, w1, w2, r);
    }
    if (i == hyper(kSigma)) {
      double ll = 0.0;
      for (std::size_t x = 0; x < n_ages_; ++x) ll += row_loglik(x, v[x], v[n_ages_ + x], sigma);
      return ll;
    }
    double lp = 0.0;
    for (std::size_t x = 0; x < n_ages_; ++x)
      lp += detail::bivariate_logpdf(v[x] - mu1, v[n_ages_ + x] - mu2, w1, w2, r);
    return lp;
  }

  Interval support(std::size_t i) const {
    if (i < 2 * n_ages_) return {};
    switch (i - 2 * n_ages_) {
      case kMu1:
      case kMu2: return priors_.mu;
      case kOmega1:
      case kOmega2: return priors_.omega;
      case kRho: return priors_.rho_corr;
      default: return priors_.sigma;
    }
  }

  double proposal_scale(std::size_t i) const { return scales_.empty() ? 0.01 : scales_[i]; }

  /// Moment/OLS starting point: per-age OLS betas, their mean and spread, pooled residual s.d.
  std::vector<double> initial_values() {
    LinearModelParams p;
    p.beta1.resize(static_cast<Eigen::Index>(n_ages_));
    p.beta2.resize(static_cast<Eigen::Index>(n_ages_));
    double rss = 0.0;
    for (std::size_t x = 0; x < n_ages_; ++x) {
      std::vector<double> y(t_.size());
      for (std::size_t j = 0; j < t_.size(); ++j)
        y[j] = data_->rho(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j));
      auto f = detail::ols_line(t_, y);
      p.beta1[static_cast<Eigen::Index>(x)] = f.intercept;
      p.beta2[static_cast<Eigen::Index>(x)] = f.slope;
      rss += f.rss;
    }
    const double n = static_cast<double>(n_ages_);
    const double dof = std::max(1.0, n * static_cast<double>(t_.size()) - 2.0 * n);
    auto sd = [&](const Eigen::VectorXd& b) {
      return n > 1 ? std::sqrt((b.array() - b.mean()).square().sum() / (n - 1.0)) : 0.01;
    };
    p.mu1 = detail::clip_into(p.beta1.mean(), priors_.mu, 0.01);
    p.mu2 = detail::clip_into(p.beta2.mean(), priors_.mu, 0.01);
    p.omega1 = std::clamp(sd(p.beta1), 1e-4, 0.99 * priors_.omega.hi);
    p.omega2 = std::clamp(sd(p.beta2), 1e-5, 0.99 * priors_.omega.hi);
    p.rho_corr = 0.0;
    p.sigma = std::clamp(std::sqrt(rss / dof), 1e-4, 0.99 * priors_.sigma.hi);

    const double tbar = t_.empty() ? 1.0 : t_.back();
    scales_.assign(dimension(), 0.0);
    for (std::size_t x = 0; x < n_ages_; ++x) {
      scales_[x] = 0.5 * p.sigma;
      scales_[n_ages_ + x] = 0.5 * p.sigma / tbar;
    }
    scales_[hyper(kMu1)] = std::max(1e-5, p.omega1 / std::sqrt(n));
    scales_[hyper(kMu2)] = std::max(1e-6, p.omega2 / std::sqrt(n));
    scales_[hyper(kOmega1)] = 0.2 * p.omega1;
    scales_[hyper(kOmega2)] = 0.2 * p.omega2;
    scales_[hyper(kRho)] = 0.1;
    scales_[hyper(kSigma)] = 0.05 * p.sigma;
    return pack(p);
  }

  const ImprovementSurface& data() const { return *data_; }
  const TimeIndex& time() const { return time_; }
  const LinearPriors& priors() const { return priors_; }

 private:
  double row_loglik(std::size_t x, double b1, double b2, double sigma) const {
    const double inv = 1.0 / sigma;
    double ss = 0.0;
    for (std::size_t j = 0; j < t_.size(); ++j) {
      const double e = data_->rho(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j)) - b1 - b2 * t_[j];
      ss += e * e;
    }
    const double n = static_cast<double>(t_.size());
    return -0.5 * n * detail::kLog2Pi - n * std::log(sigma) - 0.5 * ss * inv * inv;
  }

  const ImprovementSurface* data_;
  TimeIndex time_;
  LinearPriors priors_;
  std::size_t n_ages_;
  std::vector<double> t_;
  std::vector<double> scales_;
};

namespace detail {

/// Chain 0 starts at `base`; later chains jitter it within support.
template <class Model>
std::vector<std::vector<double>> jittered_inits(const Model& model, const std::vector<double>& base,
                                                const McmcConfig& config) {
  std::vector<std::vector<double>> inits{base};
  for (std::size_t c = 1; c < config.n_chains; ++c) {
    std::mt19937_64 rng(derive_seed(config.seed, stream::kInit, c));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto v = base;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Interval iv = model.support(i);
      const double proposal = v[i] + 0.5 * model.proposal_scale(i) * normal(rng);
      if (iv.contains(proposal)) v[i] = proposal;
    }
    inits.push_back(std::move(v));
  }
  return inits;
}

}  // namespace detail

inline PosteriorDraws fit_linear(const ImprovementSurface& data, const TimeIndex& time, const McmcConfig& config,
                                 const LinearPriors& priors = {}, const RunOptions& options = {}) {
  config.validate();
  if (data.n_years() < 3) throw Error(ErrorKind::TooFewYears, "linear model needs >= 3 years of rho per age");
  LinearModel model(data, time, priors);
  const auto base = model.initial_values();
  return run_chains(model, config, detail::jittered_inits(model, base, config), options);
}

/// Per-draw forecasts rho(x,t) = beta1[x] + beta2[x] t (+ N(0, sigma^2) on the predictive channel).
inline RhoForecast project_linear(const PosteriorDraws& draws, const ImprovementSurface& data, const TimeIndex& time,
                                  const std::vector<int>& horizon, const ProjectOptions& options = {}) {
  check_horizon(horizon, data.years.back());
  const std::size_t n_ages = data.ages.size();
  const std::size_t begin = std::min(options.age_begin, n_ages);
  const std::size_t end = std::min(options.age_end, n_ages);
  const std::size_t sigma_idx = draws.index_of("sigma");
  const std::size_t b1_idx = draws.index_of(fmt::format("beta1[{}]", data.ages.front()));
  const std::size_t b2_idx = draws.index_of(fmt::format("beta2[{}]", data.ages.front()));

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
        const double mean = b1 + b2 * time.t(horizon[h]);
        const double eps = normal(rng);
        f.mean(d, x - begin, h) = mean;
        f.predictive(d, x - begin, h) = options.noise ? mean + sigma * eps : mean;
      }
    }
  }
  return f;
}

}  // namespace morticast
