#pragma once

// Multi-chain adaptive random-walk Metropolis-within-Gibbs.
//
// A target is any type modelling TargetDensity. Targets may additionally expose
//   double conditional_log_density(std::span<const double> x, std::size_t i) const
//     -- log density up to terms that do not involve x[i];
//   Interval support(std::size_t i) const      -- open support of x[i];
//   double proposal_scale(std::size_t i) const -- initial random-walk step for x[i].
// Step sizes are tuned toward 44% acceptance per scalar during the adaptation
// prefix only; kept draws come from the frozen kernel.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "morticast/array3.hpp"
#include "morticast/csv.hpp"
#include "morticast/error.hpp"

namespace morticast {

struct McmcConfig {
  std::size_t n_chains = 5;
  std::size_t n_iterations = 5200;  // post-adaptation sweeps per chain, before thinning
  std::size_t n_adapt = 200;
  std::size_t thin = 5;
  std::uint64_t seed = 1;

  std::size_t kept_per_chain() const { return thin == 0 ? 0 : n_iterations / thin; }
  std::size_t kept_total() const { return kept_per_chain() * n_chains; }

  void validate() const {
    if (n_chains == 0) throw Error(ErrorKind::InvalidConfig, "n_chains must be >= 1");
    if (n_iterations == 0) throw Error(ErrorKind::InvalidConfig, "n_iterations must be >= 1");
    if (thin == 0) throw Error(ErrorKind::InvalidConfig, "thin must be >= 1");
    if (kept_per_chain() == 0)
      throw Error(ErrorKind::InvalidConfig,
                  fmt::format("thin {} leaves no kept draws from {} iterations", thin, n_iterations));
  }

  bool operator==(const McmcConfig&) const = default;
};

/// Open interval (lo, hi).
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double x) const { return x > lo && x < hi; }
};

/// SplitMix64 finalizer; derives independent substream seeds from one master seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

namespace stream {
inline constexpr std::uint64_t kChain = 0x43484149;     // per-chain kernel RNG
inline constexpr std::uint64_t kInit = 0x494e4954;      // per-chain init jitter
inline constexpr std::uint64_t kForecast = 0x46435354;  // forecast noise
inline constexpr std::uint64_t kCountry = 0x43545259;   // per-country master seeds
inline constexpr std::uint64_t kShuffle = 0x53484646;   // reference draw shuffling
}  // namespace stream

template <class M>
concept TargetDensity = requires(const M& m, std::span<const double> x) {
  { m.dimension() } -> std::convertible_to<std::size_t>;
  { m.parameter_names() } -> std::convertible_to<std::vector<std::string>>;
  { m.log_density(x) } -> std::convertible_to<double>;
};

namespace detail {

template <class M>
double conditional(const M& m, std::span<const double> x, std::size_t i) {
  if constexpr (requires { { m.conditional_log_density(x, i) } -> std::convertible_to<double>; })
    return m.conditional_log_density(x, i);
  else
    return m.log_density(x);
}

template <class M>
Interval support_of(const M& m, std::size_t i) {
  if constexpr (requires { { m.support(i) } -> std::convertible_to<Interval>; })
    return m.support(i);
  else
    return {};
}

template <class M>
double scale_of(const M& m, std::size_t i) {
  if constexpr (requires { { m.proposal_scale(i) } -> std::convertible_to<double>; })
    return m.proposal_scale(i);
  else
    return 1.0;
}

}  // namespace detail

/// Kept draws indexed (chain, kept iteration, parameter).
struct PosteriorDraws {
  std::vector<std::string> parameter_names;
  Array3<double> draws;
  McmcConfig config;
  /// Post-adaptation acceptance rate per (chain, parameter), row-major.
  std::vector<double> acceptance;

  std::size_t n_chains() const { return draws.dim(0); }
  std::size_t n_kept() const { return draws.dim(1); }
  std::size_t n_parameters() const { return draws.dim(2); }
  std::size_t n_total() const { return n_chains() * n_kept(); }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < parameter_names.size(); ++i)
      if (parameter_names[i] == name) return i;
    throw Error(ErrorKind::UnknownParameter, fmt::format("no parameter named '{}'", name));
  }

  /// Value of parameter p in pooled draw d (chain-major order).
  double pooled(std::size_t d, std::size_t p) const { return draws(d / n_kept(), d % n_kept(), p); }

  std::vector<double> pooled_series(std::size_t p) const {
    std::vector<double> out;
    out.reserve(n_total());
    for (std::size_t c = 0; c < n_chains(); ++c)
      for (std::size_t k = 0; k < n_kept(); ++k) out.push_back(draws(c, k, p));
    return out;
  }

  std::vector<double> chain_series(std::size_t chain, std::size_t p) const {
    std::vector<double> out;
    out.reserve(n_kept());
    for (std::size_t k = 0; k < n_kept(); ++k) out.push_back(draws(chain, k, p));
    return out;
  }
};

struct RunOptions {
  /// 0 selects std::thread::hardware_concurrency().
  std::size_t max_threads = 0;
  double target_acceptance = 0.44;
  /// Zero post-adaptation acceptances over at least this many sweeps is an error.
  std::size_t rejection_check_min_sweeps = 100;
};

namespace detail {

template <TargetDensity M>
void run_one_chain(const M& model, const McmcConfig& config, std::size_t chain, std::vector<double> x,
                   const RunOptions& options, Array3<double>& out, std::vector<double>& acceptance) {
  const std::size_t dim = model.dimension();
  const auto names = model.parameter_names();
  for (std::size_t i = 0; i < dim; ++i)
    if (!support_of(model, i).contains(x[i]))
      throw Error(ErrorKind::NonFiniteDensityAtInit,
                  fmt::format("chain {}: initial {} = {} outside support", chain, names[i], x[i]));
  if (!std::isfinite(model.log_density(x)))
    throw Error(ErrorKind::NonFiniteDensityAtInit, fmt::format("chain {}: log density not finite at init", chain));

  std::mt19937_64 rng(derive_seed(config.seed, stream::kChain, chain));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<double> log_step(dim);
  std::vector<Interval> bounds(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    log_step[i] = std::log(scale_of(model, i));
    bounds[i] = support_of(model, i);
  }
  std::vector<std::size_t> accepted(dim, 0);

  const std::size_t total = config.n_adapt + config.n_iterations;
  std::size_t kept = 0;
  for (std::size_t it = 0; it < total; ++it) {
    const bool adapting = it < config.n_adapt;
    const double gain = adapting ? 1.0 / std::sqrt(static_cast<double>(it) + 1.0) : 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double old = x[i];
      const double proposal = old + std::exp(log_step[i]) * normal(rng);
      const double u = uniform(rng);
      bool accept = false;
      if (bounds[i].contains(proposal)) {
        const double current = conditional(model, x, i);
        x[i] = proposal;
        const double candidate = conditional(model, x, i);
        accept = std::isfinite(candidate) && std::log(u) < candidate - current;
        if (!accept) x[i] = old;
      }
      if (adapting)
        log_step[i] = std::clamp(log_step[i] + gain * ((accept ? 1.0 : 0.0) - options.target_acceptance), -40.0, 5.0);
      else if (accept)
        ++accepted[i];
    }
    if (!adapting) {
      const std::size_t n = it - config.n_adapt + 1;
      if (n % config.thin == 0 && kept < out.dim(1)) {
        for (std::size_t i = 0; i < dim; ++i) out(chain, kept, i) = x[i];
        ++kept;
      }
    }
  }

  for (std::size_t i = 0; i < dim; ++i) {
    acceptance[chain * dim + i] = static_cast<double>(accepted[i]) / static_cast<double>(config.n_iterations);
    if (accepted[i] == 0 && config.n_iterations >= options.rejection_check_min_sweeps)
      throw Error(ErrorKind::AllProposalsRejected,
                  fmt::format("chain {}: every proposal for {} rejected after adaptation", chain, names[i]));
  }
}

}  // namespace detail

/// Runs config.n_chains chains from the given per-chain initial vectors.
template <TargetDensity M>
PosteriorDraws run_chains(const M& model, const McmcConfig& config, const std::vector<std::vector<double>>& init,
                          const RunOptions& options = {}) {
  config.validate();
  const std::size_t dim = model.dimension();
  if (init.size() != config.n_chains)
    throw Error(ErrorKind::InvalidConfig, fmt::format("{} init vectors for {} chains", init.size(), config.n_chains));
  for (const auto& v : init)
    if (v.size() != dim) throw Error(ErrorKind::InvalidConfig, "init vector has wrong dimension");

  PosteriorDraws result;
  result.parameter_names = model.parameter_names();
  result.config = config;
  result.draws = Array3<double>(config.n_chains, config.kept_per_chain(), dim);
  result.acceptance.assign(config.n_chains * dim, 0.0);

  std::size_t workers = options.max_threads == 0 ? std::thread::hardware_concurrency() : options.max_threads;
  workers = std::clamp<std::size_t>(workers, 1, config.n_chains);

  std::vector<std::exception_ptr> errors(config.n_chains);
  auto work = [&](std::size_t chain) {
    try {
      detail::run_one_chain(model, config, chain, init[chain], options, result.draws, result.acceptance);
    } catch (...) {
      errors[chain] = std::current_exception();
    }
  };
  if (workers == 1) {
    for (std::size_t c = 0; c < config.n_chains; ++c) work(c);
  } else {
    for (std::size_t first = 0; first < config.n_chains; first += workers) {
      std::vector<std::jthread> pool;
      for (std::size_t c = first; c < std::min(config.n_chains, first + workers); ++c) pool.emplace_back(work, c);
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return result;
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidConfig, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<double> quantiles(std::vector<double> values, std::span<const double> probs) {
  for (double p : probs)
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidConfig, fmt::format("probability {} not in (0,1)", p));
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(quantile_sorted(values, p));
  return out;
}

inline std::vector<double> pooled_quantiles(const PosteriorDraws& draws, std::string_view parameter,
                                            std::span<const double> probs) {
  return quantiles(draws.pooled_series(draws.index_of(parameter)), probs);
}

inline std::string draws_to_csv(const PosteriorDraws& d) {
  std::string out = "chain,iter,parameter,value\n";
  for (std::size_t c = 0; c < d.n_chains(); ++c)
    for (std::size_t k = 0; k < d.n_kept(); ++k)
      for (std::size_t p = 0; p < d.n_parameters(); ++p)
        out += fmt::format("{},{},{},{}\n", c + 1, k + 1, d.parameter_names[p], csv::num(d.draws(c, k, p)));
  return out;
}

/// Reads `chain,iter,parameter,value`. The config records only chain and kept counts (thin = 1).
inline PosteriorDraws draws_from_csv(const std::string& text) {
  auto t = csv::read_table(text);
  const auto cc = t.column("chain"), ci = t.column("iter"), cp = t.column("parameter"), cv = t.column("value");
  std::vector<std::string> names;
  std::map<std::string, std::size_t> index;
  std::size_t n_chains = 0, n_kept = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    n_chains = std::max<std::size_t>(n_chains, static_cast<std::size_t>(csv::to_int(row[cc], r + 2)));
    n_kept = std::max<std::size_t>(n_kept, static_cast<std::size_t>(csv::to_int(row[ci], r + 2)));
    if (index.emplace(row[cp], names.size()).second) names.push_back(row[cp]);
  }
  if (t.rows.size() != n_chains * n_kept * names.size())
    throw Error(ErrorKind::GridMismatch, "draws CSV is not a complete chain x iter x parameter grid");
  PosteriorDraws d;
  d.parameter_names = names;
  d.draws = Array3<double>(n_chains, n_kept, names.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto c = static_cast<std::size_t>(csv::to_int(row[cc], r + 2)) - 1;
    const auto k = static_cast<std::size_t>(csv::to_int(row[ci], r + 2)) - 1;
    d.draws(c, k, index.at(row[cp])) = csv::to_double(row[cv], r + 2);
  }
  d.config.n_chains = n_chains;
  d.config.n_iterations = n_kept;
  d.config.n_adapt = 0;
  d.config.thin = 1;
  d.acceptance.assign(n_chains * names.size(), 0.0);
  return d;
}

}  // namespace morticast
