#pragma once

// Linear hand-over from a country's own extrapolated improvement rates to the
// (weighted) mean of reference countries, followed by clamping into a band.
// Blending is applied first, clamping second.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "morticast/error.hpp"
#include "morticast/rho_forecast.hpp"
#include "morticast/sampler.hpp"

namespace morticast {

struct BlendPlan {
  std::string interest_label;
  std::vector<std::string> reference_labels;
  std::size_t horizon_length = 2;
  /// Relative reference weights; empty means equal shares.
  std::vector<double> reference_weights;
  /// Test hook: keep the interest weight at 1 over the whole horizon.
  bool hold_interest = false;

  /// Interest weight at forecast step f in 1..H: (H - f) / (H - 1).
  double weight_of_interest(std::size_t step) const {
    if (hold_interest) return 1.0;
    const auto h = static_cast<double>(horizon_length);
    return (h - static_cast<double>(step)) / (h - 1.0);
  }

  void validate() const {
    if (reference_labels.empty()) throw Error(ErrorKind::EmptyReferences, "blend plan has no reference countries");
    if (horizon_length < 2) throw Error(ErrorKind::InvalidConfig, "blend horizon must be >= 2 years");
    if (!reference_weights.empty()) {
      if (reference_weights.size() != reference_labels.size())
        throw Error(ErrorKind::InvalidConfig, "one weight per reference country required");
      for (double w : reference_weights)
        if (!(w >= 0.0)) throw Error(ErrorKind::InvalidConfig, "reference weights must be non-negative");
      if (!(std::accumulate(reference_weights.begin(), reference_weights.end(), 0.0) > 0.0))
        throw Error(ErrorKind::InvalidConfig, "reference weights sum to zero");
    }
  }
};

struct ClampBand {
  double rho_min = 0.005;
  double rho_max = 0.035;

  void validate() const {
    if (!(rho_min < rho_max)) throw Error(ErrorKind::InvalidConfig, "clamp band needs rho_min < rho_max");
  }
  bool operator==(const ClampBand&) const = default;
};

struct BlendOptions {
  /// When set, each reference's draws are permuted independently (seeded) instead of aligned by index.
  std::optional<std::uint64_t> shuffle_seed;
};

namespace detail {

inline double convex(double a, double b, double w) {
  if (w == 1.0) return a;
  if (w == 0.0) return b;
  return std::clamp(w * a + (1.0 - w) * b, std::min(a, b), std::max(a, b));
}

inline std::vector<std::size_t> draw_permutation(std::size_t n, std::uint64_t seed, std::size_t reference) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, stream::kShuffle, reference));
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace detail

inline RhoForecast blend_forecasts(const RhoForecast& interest, std::span<const RhoForecast> references,
                                   const BlendPlan& plan, const BlendOptions& options = {}) {
  if (references.empty()) throw Error(ErrorKind::EmptyReferences, "no reference forecasts");
  plan.validate();
  if (plan.reference_labels.size() != references.size())
    throw Error(ErrorKind::ShapeMismatch, "reference labels and forecasts differ in number");
  for (const auto& r : references)
    if (r.predictive.dims() != interest.predictive.dims() || r.mean.dims() != interest.mean.dims() ||
        r.ages != interest.ages || r.years != interest.years)
      throw Error(ErrorKind::ShapeMismatch, "reference forecast shape differs from the interest forecast");
  if (interest.n_years() != plan.horizon_length)
    throw Error(ErrorKind::ShapeMismatch, fmt::format("plan horizon {} but forecast has {} years",
                                                      plan.horizon_length, interest.n_years()));

  const std::size_t nr = references.size();
  std::vector<double> share(nr, 1.0 / static_cast<double>(nr));
  const bool equal = plan.reference_weights.empty();
  if (!equal) {
    const double total = std::accumulate(plan.reference_weights.begin(), plan.reference_weights.end(), 0.0);
    for (std::size_t r = 0; r < nr; ++r) share[r] = plan.reference_weights[r] / total;
  }
  const std::size_t nd = interest.n_draws();
  std::vector<std::vector<std::size_t>> perm(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    if (options.shuffle_seed) {
      perm[r] = detail::draw_permutation(nd, *options.shuffle_seed, r);
    } else {
      perm[r].resize(nd);
      std::iota(perm[r].begin(), perm[r].end(), std::size_t{0});
    }
  }

  RhoForecast out = interest;
  auto blend_channel = [&](Array3<double>& dst, auto channel) {
    for (std::size_t d = 0; d < nd; ++d)
      for (std::size_t x = 0; x < interest.n_ages(); ++x)
        for (std::size_t h = 0; h < interest.n_years(); ++h) {
          double ref = 0.0;
          if (equal) {
            for (std::size_t r = 0; r < nr; ++r) ref += channel(references[r])(perm[r][d], x, h);
            ref /= static_cast<double>(nr);
          } else {
            for (std::size_t r = 0; r < nr; ++r) ref += share[r] * channel(references[r])(perm[r][d], x, h);
          }
          dst(d, x, h) = detail::convex(channel(interest)(d, x, h), ref, plan.weight_of_interest(h + 1));
        }
  };
  blend_channel(out.predictive, [](const RhoForecast& f) -> const Array3<double>& { return f.predictive; });
  blend_channel(out.mean, [](const RhoForecast& f) -> const Array3<double>& { return f.mean; });
  return out;
}

inline RhoForecast clamp_rho(RhoForecast forecast, const ClampBand& band) {
  band.validate();
  for (auto* channel : {&forecast.predictive, &forecast.mean})
    for (double& v : channel->flat()) v = std::clamp(v, band.rho_min, band.rho_max);
  return forecast;
}

}  // namespace morticast
