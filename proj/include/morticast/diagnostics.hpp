#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "morticast/csv.hpp"
#include "morticast/error.hpp"
#include "morticast/sampler.hpp"

namespace morticast {

/// Biased (divide-by-n) sample autocorrelation for lags 0..max_lag.
inline std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (max_lag < 1 || n <= max_lag)
    throw Error(ErrorKind::SeriesTooShort, fmt::format("need length > max_lag >= 1 (length {}, lag {})", n, max_lag));
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  if (!(c0 > 0.0)) throw Error(ErrorKind::ZeroVariance, "series has zero variance");
  std::vector<double> acf(max_lag + 1);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) c += (series[t] - mean) * (series[t + lag] - mean);
    acf[lag] = c / c0;
  }
  return acf;
}

struct RafteryLewisResult {
  double q = 0.025;
  double r = 0.005;
  double s = 0.95;
  long M = 0;     ///< burn-in
  long N = 0;     ///< total run length including burn-in
  long Nmin = 0;  ///< run length for independent draws
  double I = 0.0; ///< dependence factor N / Nmin
  std::size_t k_thin = 1;
};

inline long raftery_lewis_nmin(double q, double r, double s) {
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 0.5 * (1.0 + s));
  return static_cast<long>(std::ceil(z * z * q * (1.0 - q) / (r * r)));
}

namespace detail {

/// BIC of a second-order versus first-order binary Markov chain; negative favours first order.
inline double markov_order_bic(const std::vector<int>& z) {
  std::array<double, 8> n{};
  for (std::size_t t = 2; t < z.size(); ++t) n[z[t - 2] * 4 + z[t - 1] * 2 + z[t]] += 1.0;
  double g2 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const double obs = n[i * 4 + j * 2 + k];
        if (obs == 0.0) continue;
        const double row = n[i * 4 + j * 2 + 0] + n[i * 4 + j * 2 + 1];
        const double col = n[0 * 4 + j * 2 + k] + n[1 * 4 + j * 2 + k];
        const double mid = n[0 * 4 + j * 2 + 0] + n[0 * 4 + j * 2 + 1] + n[1 * 4 + j * 2 + 0] + n[1 * 4 + j * 2 + 1];
        g2 += 2.0 * obs * std::log(obs / (row * col / mid));
      }
  return g2 - 2.0 * std::log(static_cast<double>(z.size()) - 2.0);
}

}  // namespace detail

/// Raftery-Lewis run-length diagnostic for estimating the q-quantile to within +/- r with probability s.
inline RafteryLewisResult raftery_lewis(std::span<const double> series, double q = 0.025, double r = 0.005,
                                        double s = 0.95) {
  if (!(q > 0.0 && q < 1.0) || !(r > 0.0) || !(s > 0.0 && s < 1.0))
    throw Error(ErrorKind::InvalidConfig, "q, s must lie in (0,1) and r must be positive");
  RafteryLewisResult res;
  res.q = q;
  res.r = r;
  res.s = s;
  res.Nmin = raftery_lewis_nmin(q, r, s);
  if (static_cast<double>(series.size()) < static_cast<double>(res.Nmin) / 10.0)
    throw Error(ErrorKind::SeriesTooShort,
                fmt::format("series of length {} is below Nmin/10 = {}", series.size(), res.Nmin / 10.0));

  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  const double cut = quantile_sorted(sorted, q);
  std::vector<int> z(series.size());
  std::size_t ones = 0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    z[t] = series[t] <= cut ? 1 : 0;
    ones += static_cast<std::size_t>(z[t]);
  }
  if (ones == 0 || ones == z.size())
    throw Error(ErrorKind::DegenerateBinarization, "binarized series is constant");

  std::vector<int> thinned;
  for (std::size_t k = 1;; ++k) {
    thinned.clear();
    for (std::size_t t = 0; t < z.size(); t += k) thinned.push_back(z[t]);
    if (thinned.size() < 3) throw Error(ErrorKind::SeriesTooShort, "no thinning yields a first-order chain");
    if (detail::markov_order_bic(thinned) < 0.0) {
      res.k_thin = k;
      break;
    }
  }

  double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
  for (std::size_t t = 1; t < thinned.size(); ++t) {
    const int a = thinned[t - 1], b = thinned[t];
    (a == 0 ? (b == 0 ? n00 : n01) : (b == 0 ? n10 : n11)) += 1.0;
  }
  if (n00 + n01 == 0.0 || n10 + n11 == 0.0)
    throw Error(ErrorKind::DegenerateBinarization, "thinned chain never leaves one state");
  const double alpha = n01 / (n00 + n01);
  const double beta = n10 / (n10 + n11);
  if (alpha + beta == 0.0) throw Error(ErrorKind::DegenerateBinarization, "thinned chain never switches state");

  const boost::math::normal standard;
  const double phi = boost::math::quantile(standard, 0.5 * (1.0 + s));
  const double eps = 0.001;
  const double k = static_cast<double>(res.k_thin);
  const double lam = std::abs(1.0 - alpha - beta);
  double burn = 0.0;
  if (lam > 0.0 && lam < 1.0) burn = std::log(eps * (alpha + beta) / std::max(alpha, beta)) / std::log(lam);
  res.M = static_cast<long>(std::max(0.0, std::ceil(burn)) * k);
  const double prec = (2.0 - alpha - beta) * alpha * beta * phi * phi / (std::pow(alpha + beta, 3.0) * r * r);
  res.N = res.M + static_cast<long>(std::ceil(prec * k));
  res.I = static_cast<double>(res.N) / static_cast<double>(res.Nmin);
  return res;
}

struct ChainDiagnostics {
  std::string parameter;
  std::vector<double> acf;
  RafteryLewisResult rl;
  std::string trace_path;
};

/// Diagnostics on the pooled (chain-major) draws of each named parameter.
inline std::vector<ChainDiagnostics> diagnose(const PosteriorDraws& draws, const std::vector<std::string>& parameters,
                                              std::size_t max_lag = 40, double q = 0.025, double r = 0.005,
                                              double s = 0.95) {
  std::vector<ChainDiagnostics> out;
  for (const auto& name : parameters) {
    const auto series = draws.pooled_series(draws.index_of(name));
    ChainDiagnostics d;
    d.parameter = name;
    d.acf = autocorrelation(series, std::min(max_lag, series.size() - 1));
    d.rl = raftery_lewis(series, q, r, s);
    out.push_back(std::move(d));
  }
  return out;
}

inline std::string export_trace(const PosteriorDraws& draws, std::string_view parameter) {
  const auto p = draws.index_of(parameter);
  std::string out = "chain,iter,value\n";
  for (std::size_t c = 0; c < draws.n_chains(); ++c)
    for (std::size_t k = 0; k < draws.n_kept(); ++k)
      out += fmt::format("{},{},{}\n", c + 1, k + 1, csv::num(draws.draws(c, k, p)));
  return out;
}

inline std::string diagnostics_to_csv(const std::vector<ChainDiagnostics>& diags) {
  std::string out = "parameter,q,r,s,M,N,Nmin,I,k_thin,acf1\n";
  for (const auto& d : diags)
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", d.parameter, csv::num(d.rl.q), csv::num(d.rl.r),
                       csv::num(d.rl.s), d.rl.M, d.rl.N, d.rl.Nmin, csv::num(d.rl.I), d.rl.k_thin,
                       d.acf.size() > 1 ? csv::num(d.acf[1]) : std::string("NA"));
  return out;
}

/// Plain-text parameter x {N, I} table.
inline std::string diagnostics_table(const std::string& label, const std::vector<ChainDiagnostics>& diags) {
  std::string out = fmt::format("{:<16}{:>4}", "", "");
  for (const auto& d : diags) out += fmt::format("{:>12}", d.parameter);
  out += fmt::format("\n{:<16}{:>4}", label, "N");
  for (const auto& d : diags) out += fmt::format("{:>12}", d.rl.N);
  out += fmt::format("\n{:<16}{:>4}", "", "I");
  for (const auto& d : diags) out += fmt::format("{:>12.3f}", d.rl.I);
  out += "\n";
  return out;
}

}  // namespace morticast
