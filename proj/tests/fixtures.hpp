#pragma once

// Synthetic HMD-like inputs for tests. Nothing here reads real data.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "morticast/morticast.hpp"

namespace fixtures {

namespace mc = morticast;

/// Gompertz-Makeham shape with an infant bump.
inline double base_rate(int age) {
  if (age == 0) return 0.012;
  return 0.0002 + 0.00003 * std::exp(0.092 * age);
}

/// Declining surface: m(x,y) = base(x) exp(-r(x) (y - first)) with lognormal noise.
inline mc::MortalitySurface declining_surface(int first_year, int last_year, double noise_sd = 0.0,
                                              std::uint64_t seed = 7, double scale = 1.0, int max_age = 110) {
  mc::MortalitySurface s;
  for (int a = 0; a <= max_age; ++a) s.ages.push_back(a);
  for (int y = first_year; y <= last_year; ++y) s.years.push_back(y);
  s.rates.resize(static_cast<Eigen::Index>(s.ages.size()), static_cast<Eigen::Index>(s.years.size()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, 1.0);
  for (std::size_t i = 0; i < s.ages.size(); ++i)
    for (std::size_t j = 0; j < s.years.size(); ++j) {
      const int a = s.ages[i];
      const double r = 0.03 - 0.022 * a / 110.0;
      const double z = noise_sd > 0.0 ? noise_sd * eps(rng) : 0.0;
      s.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::min(0.9, scale * base_rate(a) * std::exp(-r * (s.years[j] - first_year) + z));
    }
  s.sex = mc::Sex::Female;
  s.source_label = "synthetic";
  return s;
}

/// HMD 1x1 text with Female = surface, Male = 1.3 surface, Total = 1.15 surface.
inline std::string hmd_text(const mc::MortalitySurface& s, std::string_view title = "Synthetic, Death rates (period 1x1)") {
  std::string out = fmt::format("{}\tLast modified: 01 Jan 2020;  Methods Protocol: v6 (2017)\n\n", title);
  out += "  Year          Age             Female            Male           Total\n";
  for (std::size_t j = 0; j < s.years.size(); ++j)
    for (std::size_t i = 0; i < s.ages.size(); ++i) {
      const double f = s.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const std::string age = s.ages[i] == 110 ? "110+" : std::to_string(s.ages[i]);
      out += fmt::format("  {:4d}  {:>11}  {:>17}  {:>14}  {:>14}\n", s.years[j], age, mc::csv::num(f),
                         mc::csv::num(1.3 * f), mc::csv::num(1.15 * f));
    }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / fmt::format("morticast_test_{}", name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Writes <code>.Mx_1x1.txt for a synthetic country into dir.
inline void write_country(const std::filesystem::path& dir, const std::string& code, int first, int last,
                          double noise_sd, std::uint64_t seed, double scale = 1.0) {
  mc::csv::write_file(dir / (code + ".Mx_1x1.txt"), hmd_text(declining_surface(first, last, noise_sd, seed, scale)));
}

/// Small, fast pipeline config over synthetic data.
inline mc::RunConfig small_config(const std::filesystem::path& data_dir, const std::filesystem::path& out_dir) {
  mc::RunConfig c;
  c.country_of_interest = "AAA";
  c.base = {1965, 1980};
  c.horizon = {1981, 1990};
  c.max_age = 110;
  c.mcmc = {2, 400, 100, 2, 11};
  c.data_dir = data_dir.string();
  c.output_dir = out_dir.string();
  c.write_draws = false;
  return c;
}

/// Improvement surface with rho(x,t) = f(x,t) + N(0, sigma) over years first..first+n-1.
template <class F>
mc::ImprovementSurface rho_surface(const std::vector<int>& ages, int first_year, int n_years, F mean, double sigma,
                                   std::uint64_t seed) {
  mc::ImprovementSurface s;
  s.ages = ages;
  for (int k = 0; k < n_years; ++k) s.years.push_back(first_year + k);
  s.rho.resize(static_cast<Eigen::Index>(ages.size()), n_years);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, sigma);
  for (std::size_t i = 0; i < ages.size(); ++i)
    for (int k = 0; k < n_years; ++k)
      s.rho(static_cast<Eigen::Index>(i), k) = mean(i, static_cast<double>(k + 1)) + (sigma > 0 ? eps(rng) : 0.0);
  s.source_label = "synthetic";
  return s;
}

inline std::vector<int> age_range(int first, int last) {
  std::vector<int> v;
  for (int a = first; a <= last; ++a) v.push_back(a);
  return v;
}

}  // namespace fixtures
