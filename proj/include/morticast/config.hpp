#pragma once

// Run configuration: flat `key = value` INI with [sections], echoed into the
// run manifest as JSON. Every field here is written to the manifest.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "morticast/blend.hpp"
#include "morticast/csv.hpp"
#include "morticast/error.hpp"
#include "morticast/hmd_ingest.hpp"
#include "morticast/lifetable.hpp"
#include "morticast/sampler.hpp"

namespace morticast {

struct YearSpan {
  int first = 0;
  int last = 0;

  std::size_t length() const { return static_cast<std::size_t>(last - first + 1); }
  std::vector<int> years() const { return year_span(first, last); }
  bool operator==(const YearSpan&) const = default;
};

enum class CoreModel { Linear, LogLog };
enum class ForecastChannel { Predictive, Mean };
enum class PropagationScheme { Quantiles, Draws };
enum class InputKind { Rates, Counts };

inline const std::vector<double>& default_quantile_levels() {
  static const std::vector<double> levels{0.025, 0.10, 0.165, 0.25, 0.5, 0.75, 0.835, 0.90, 0.975};
  return levels;
}

struct RunConfig {
  // [population]
  std::string country_of_interest;
  std::vector<std::string> reference_countries;
  Sex sex = Sex::Female;
  int min_age = 0;
  int max_age = kOpenAge;
  // [periods]
  YearSpan base{1965, 1990};
  YearSpan horizon{1991, 2011};
  // [model]
  CoreModel core_model = CoreModel::LogLog;
  bool clamp_enabled = true;
  ClampBand clamp;
  bool blend_enabled = false;
  std::vector<double> reference_weights;
  bool shuffle_references = false;
  std::optional<double> smoothing_lambda;
  double prefit_floor = 0.001;
  ForecastChannel channel = ForecastChannel::Predictive;
  PropagationMode propagation = PropagationMode::Literal;
  PropagationScheme scheme = PropagationScheme::Quantiles;
  // [mcmc]
  McmcConfig mcmc{5, 5200, 200, 5, 20140101};
  // [data]
  std::string data_dir;
  InputKind input = InputKind::Rates;
  FillPolicy fill = FillPolicy::None;
  // [output]
  std::string output_dir = "out";
  std::vector<double> quantiles = default_quantile_levels();
  bool baseline = true;
  bool write_draws = true;

  bool operator==(const RunConfig&) const = default;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigInvalid, msg); };
    if (country_of_interest.empty()) fail("country_of_interest is required");
    if (min_age != 0) fail("minimum_age must be 0 (life expectancy at birth is computed)");
    if (max_age <= min_age || max_age > kOpenAge) fail(fmt::format("maximum_age must lie in 1..{}", kOpenAge));
    if (base.last - base.first < 3) fail("base_period needs at least four years");
    if (horizon.last < horizon.first) fail("forecast_horizon is empty");
    if (horizon.first <= base.last) fail("forecast_horizon overlaps the base_period");
    if (horizon.first != base.last + 1) fail("forecast_horizon must start the year after the base_period");
    if (blend_enabled && reference_countries.empty()) fail("blend enabled without reference countries");
    if (!blend_enabled && !reference_countries.empty()) fail("reference countries given but blend disabled");
    if (blend_enabled && horizon.length() < 2) fail("blending needs a horizon of at least two years");
    if (!reference_weights.empty() && reference_weights.size() != reference_countries.size())
      fail("reference_weights must have one entry per reference country");
    if (clamp_enabled && !(clamp.rho_min < clamp.rho_max)) fail("rho_min must be below rho_max");
    if (smoothing_lambda && !(*smoothing_lambda > 0.0)) fail("smoothing lambda must be positive");
    if (!(prefit_floor > 0.0)) fail("prefit_floor must be positive");
    if (quantiles.empty()) fail("quantiles list is empty");
    for (std::size_t i = 0; i < quantiles.size(); ++i) {
      if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0)) fail("quantiles must lie in (0,1)");
      if (i > 0 && !(quantiles[i] > quantiles[i - 1])) fail("quantiles must be strictly increasing");
    }
    if (std::none_of(quantiles.begin(), quantiles.end(), [](double q) { return std::abs(q - 0.5) < 1e-12; }))
      fail("quantiles must include the median 0.5");
    try {
      mcmc.validate();
    } catch (const Error& e) {
      fail(e.what());
    }
  }
};

// ---- string helpers ----

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto f : csv::split(s))
    if (!f.empty()) out.emplace_back(f);
  return out;
}

inline std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& f : split_list(s)) {
    auto v = csv::parse_double(f);
    if (!v) throw Error(ErrorKind::ConfigInvalid, fmt::format("not a number: '{}'", f));
    out.push_back(*v);
  }
  return out;
}

inline std::string join_numbers(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + csv::num(v[i]);
  return out;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

inline YearSpan parse_span(const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) throw Error(ErrorKind::ConfigInvalid, fmt::format("expected FIRST-LAST, got '{}'", s));
  auto a = csv::parse_int(s.substr(0, dash));
  auto b = csv::parse_int(s.substr(dash + 1));
  if (!a || !b) throw Error(ErrorKind::ConfigInvalid, fmt::format("bad year span '{}'", s));
  return {static_cast<int>(*a), static_cast<int>(*b)};
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "TRUE" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "FALSE" || s == "no" || s == "0" || s == "off") return false;
  throw Error(ErrorKind::ConfigInvalid, fmt::format("not a boolean: '{}'", s));
}

inline std::string to_string(bool b) { return b ? "true" : "false"; }

}  // namespace detail

inline std::string_view to_string(CoreModel m) { return m == CoreModel::Linear ? "linear" : "loglog"; }
inline std::string_view to_string(ForecastChannel c) { return c == ForecastChannel::Predictive ? "predictive" : "mean"; }
inline std::string_view to_string(PropagationMode m) { return m == PropagationMode::Literal ? "literal" : "exact-log"; }
inline std::string_view to_string(PropagationScheme s) { return s == PropagationScheme::Quantiles ? "quantiles" : "draws"; }
inline std::string_view to_string(InputKind k) { return k == InputKind::Rates ? "rates" : "counts"; }

inline CoreModel parse_core_model(std::string_view s) {
  if (s == "linear") return CoreModel::Linear;
  if (s == "loglog" || s == "log-log") return CoreModel::LogLog;
  throw Error(ErrorKind::ConfigInvalid, fmt::format("core_model must be linear or loglog, got '{}'", s));
}

inline ForecastChannel parse_channel(std::string_view s) {
  if (s == "predictive") return ForecastChannel::Predictive;
  if (s == "mean") return ForecastChannel::Mean;
  throw Error(ErrorKind::ConfigInvalid, fmt::format("forecast_channel must be predictive or mean, got '{}'", s));
}

inline PropagationMode parse_propagation(std::string_view s) {
  if (s == "literal") return PropagationMode::Literal;
  if (s == "exact-log") return PropagationMode::ExactLog;
  throw Error(ErrorKind::ConfigInvalid, fmt::format("propagation must be literal or exact-log, got '{}'", s));
}

inline PropagationScheme parse_scheme(std::string_view s) {
  if (s == "quantiles") return PropagationScheme::Quantiles;
  if (s == "draws") return PropagationScheme::Draws;
  throw Error(ErrorKind::ConfigInvalid, fmt::format("propagation_scheme must be quantiles or draws, got '{}'", s));
}

inline InputKind parse_input_kind(std::string_view s) {
  if (s == "rates") return InputKind::Rates;
  if (s == "counts") return InputKind::Counts;
  throw Error(ErrorKind::ConfigInvalid, fmt::format("input must be rates or counts, got '{}'", s));
}

/// Flattened "section.key" -> value view used by both the INI reader and writer.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  using detail::to_string;
  return {
      {"population.country_of_interest", c.country_of_interest},
      {"population.reference_countries", detail::join(c.reference_countries)},
      {"population.sex", std::string(morticast::to_string(c.sex))},
      {"population.minimum_age", std::to_string(c.min_age)},
      {"population.maximum_age", std::to_string(c.max_age)},
      {"periods.base_period", fmt::format("{}-{}", c.base.first, c.base.last)},
      {"periods.forecast_horizon", fmt::format("{}-{}", c.horizon.first, c.horizon.last)},
      {"model.core_model", std::string(morticast::to_string(c.core_model))},
      {"model.adjust_rho", to_string(c.clamp_enabled)},
      {"model.rho_min", csv::num(c.clamp.rho_min)},
      {"model.rho_max", csv::num(c.clamp.rho_max)},
      {"model.blend", to_string(c.blend_enabled)},
      {"model.reference_weights", detail::join_numbers(c.reference_weights)},
      {"model.independent_reference_draws", to_string(c.shuffle_references)},
      {"model.smoothing", c.smoothing_lambda ? csv::num(*c.smoothing_lambda) : std::string("off")},
      {"model.prefit_floor", csv::num(c.prefit_floor)},
      {"model.forecast_channel", std::string(morticast::to_string(c.channel))},
      {"model.propagation", std::string(morticast::to_string(c.propagation))},
      {"model.propagation_scheme", std::string(morticast::to_string(c.scheme))},
      {"mcmc.iterations", std::to_string(c.mcmc.n_iterations)},
      {"mcmc.adaptions", std::to_string(c.mcmc.n_adapt)},
      {"mcmc.parallel_chains", std::to_string(c.mcmc.n_chains)},
      {"mcmc.thinning", std::to_string(c.mcmc.thin)},
      {"mcmc.seed", std::to_string(c.mcmc.seed)},
      {"data.directory", c.data_dir},
      {"data.input", std::string(morticast::to_string(c.input))},
      {"data.fill_policy", std::string(morticast::to_string(c.fill))},
      {"output.directory", c.output_dir},
      {"output.quantiles", detail::join_numbers(c.quantiles)},
      {"output.baseline", to_string(c.baseline)},
      {"output.write_draws", to_string(c.write_draws)},
  };
}

/// Applies one "section.key" entry; unknown keys are a config error.
inline void apply_entry(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string value(csv::trim(raw));
  auto to_size = [&](const std::string& v) {
    auto n = csv::parse_int(v);
    if (!n || *n < 0) throw Error(ErrorKind::ConfigInvalid, fmt::format("{}: not a non-negative integer", key));
    return static_cast<std::size_t>(*n);
  };
  auto to_int = [&](const std::string& v) {
    auto n = csv::parse_int(v);
    if (!n) throw Error(ErrorKind::ConfigInvalid, fmt::format("{}: not an integer", key));
    return static_cast<int>(*n);
  };
  auto to_real = [&](const std::string& v) {
    auto n = csv::parse_double(v);
    if (!n) throw Error(ErrorKind::ConfigInvalid, fmt::format("{}: not a number", key));
    return *n;
  };
  if (key == "population.country_of_interest") c.country_of_interest = value;
  else if (key == "population.reference_countries") c.reference_countries = detail::split_list(value);
  else if (key == "population.sex") c.sex = parse_sex(value);
  else if (key == "population.minimum_age") c.min_age = to_int(value);
  else if (key == "population.maximum_age") c.max_age = value == "110+" ? kOpenAge : to_int(value);
  else if (key == "periods.base_period") c.base = detail::parse_span(value);
  else if (key == "periods.forecast_horizon") c.horizon = detail::parse_span(value);
  else if (key == "model.core_model") c.core_model = parse_core_model(value);
  else if (key == "model.adjust_rho") c.clamp_enabled = detail::parse_bool(value);
  else if (key == "model.rho_min") c.clamp.rho_min = to_real(value);
  else if (key == "model.rho_max") c.clamp.rho_max = to_real(value);
  else if (key == "model.blend") c.blend_enabled = detail::parse_bool(value);
  else if (key == "model.reference_weights") c.reference_weights = detail::parse_number_list(value);
  else if (key == "model.independent_reference_draws") c.shuffle_references = detail::parse_bool(value);
  else if (key == "model.smoothing") {
    if (value == "off" || value.empty()) c.smoothing_lambda.reset();
    else c.smoothing_lambda = to_real(value);
  } else if (key == "model.prefit_floor") c.prefit_floor = to_real(value);
  else if (key == "model.forecast_channel") c.channel = parse_channel(value);
  else if (key == "model.propagation") c.propagation = parse_propagation(value);
  else if (key == "model.propagation_scheme") c.scheme = parse_scheme(value);
  else if (key == "mcmc.iterations") c.mcmc.n_iterations = to_size(value);
  else if (key == "mcmc.adaptions") c.mcmc.n_adapt = to_size(value);
  else if (key == "mcmc.parallel_chains") c.mcmc.n_chains = to_size(value);
  else if (key == "mcmc.thinning") c.mcmc.thin = to_size(value);
  else if (key == "mcmc.seed") {
    unsigned long long seed = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
    if (ec != std::errc{} || p != value.data() + value.size())
      throw Error(ErrorKind::ConfigInvalid, "mcmc.seed: not an unsigned integer");
    c.mcmc.seed = seed;
  } else if (key == "data.directory") c.data_dir = value;
  else if (key == "data.input") c.input = parse_input_kind(value);
  else if (key == "data.fill_policy") c.fill = parse_fill_policy(value);
  else if (key == "output.directory") c.output_dir = value;
  else if (key == "output.quantiles") c.quantiles = detail::parse_number_list(value);
  else if (key == "output.baseline") c.baseline = detail::parse_bool(value);
  else if (key == "output.write_draws") c.write_draws = detail::parse_bool(value);
  else throw Error(ErrorKind::ConfigInvalid, fmt::format("unknown config key '{}'", key));
}

inline RunConfig config_from_ini(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::ConfigInvalid, e.what());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error(ErrorKind::ConfigInvalid, fmt::format("key '{}' outside any section", section));
    for (const auto& [key, value] : body) apply_entry(c, section + "." + key, value.get_value<std::string>());
  }
  return c;
}

inline std::string config_to_ini(const RunConfig& c) {
  std::string out, section;
  for (const auto& [key, value] : config_entries(c)) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      out += fmt::format("{}[{}]\n", out.empty() ? "" : "\n", sec);
      section = sec;
    }
    out += fmt::format("{} = {}\n", key.substr(dot + 1), value);
  }
  return out;
}

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config_entries(c)) {
    const auto dot = key.find('.');
    j[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  return j;
}

inline RunConfig config_from_json(const nlohmann::ordered_json& j) {
  RunConfig c;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw Error(ErrorKind::ConfigInvalid, fmt::format("section '{}' is not an object", section));
    for (const auto& [key, value] : body.items())
      apply_entry(c, section + "." + key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  return c;
}

/// Reads an INI config, or the "config" object of a run manifest (*.json).
inline RunConfig load_config(const std::filesystem::path& path) {
  const auto text = csv::read_file(path);
  if (path.extension() == ".json") {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigInvalid, e.what());
    }
    if (!j.contains("config")) throw Error(ErrorKind::ConfigInvalid, "manifest has no config object");
    return config_from_json(j["config"]);
  }
  return config_from_ini(text);
}

}  // namespace morticast
