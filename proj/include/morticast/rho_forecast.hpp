#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "morticast/array3.hpp"
#include "morticast/error.hpp"
#include "morticast/improvement.hpp"

namespace morticast {

/// Maps calendar years onto model time; t = 1 at the first year of the fitted series.
struct TimeIndex {
  int origin_year = 0;

  double t(int year) const { return static_cast<double>(year - origin_year + 1); }
  bool operator==(const TimeIndex&) const = default;
};

inline TimeIndex time_index_for(const ImprovementSurface& data) { return {data.years.front()}; }

/// Per-draw forecasts of improvement rates, both channels shaped (draw, age, year).
struct RhoForecast {
  std::vector<int> ages;
  std::vector<int> years;
  Array3<double> predictive;  ///< mean path plus N(0, sigma^2) forecast noise
  Array3<double> mean;        ///< noise-free mean path

  std::size_t n_draws() const { return predictive.dim(0); }
  std::size_t n_ages() const { return predictive.dim(1); }
  std::size_t n_years() const { return predictive.dim(2); }
};

struct ProjectOptions {
  std::uint64_t seed = 1;
  bool noise = true;
  /// Half-open range of age rows to project (indices into the fitted ages).
  std::size_t age_begin = 0;
  std::size_t age_end = std::numeric_limits<std::size_t>::max();
};

inline std::vector<int> year_span(int first, int last) {
  std::vector<int> v;
  for (int y = first; y <= last; ++y) v.push_back(y);
  return v;
}

/// Horizon must be contiguous, increasing and start after `last_base_year`.
inline void check_horizon(const std::vector<int>& horizon, int last_base_year) {
  if (horizon.empty()) throw Error(ErrorKind::NonContiguousHorizon, "empty horizon");
  for (std::size_t i = 1; i < horizon.size(); ++i)
    if (horizon[i] != horizon[i - 1] + 1)
      throw Error(ErrorKind::NonContiguousHorizon, fmt::format("gap between {} and {}", horizon[i - 1], horizon[i]));
  if (horizon.front() <= last_base_year)
    throw Error(ErrorKind::NonContiguousHorizon,
                fmt::format("horizon starts at {}, inside the base period ending {}", horizon.front(), last_base_year));
}

}  // namespace morticast
