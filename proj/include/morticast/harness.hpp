#pragma once

// Retrospective / prospective pipelines, model comparison tables and run
// manifests. Everything random is derived from config.mcmc.seed.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/version.hpp>
#include <Eigen/Core>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "morticast/blend.hpp"
#include "morticast/config.hpp"
#include "morticast/csv.hpp"
#include "morticast/diagnostics.hpp"
#include "morticast/error.hpp"
#include "morticast/hmd_ingest.hpp"
#include "morticast/improvement.hpp"
#include "morticast/leecarter.hpp"
#include "morticast/lifetable.hpp"
#include "morticast/model_linear.hpp"
#include "morticast/model_loglog.hpp"
#include "morticast/rho_forecast.hpp"
#include "morticast/sampler.hpp"

namespace morticast {

inline constexpr std::string_view kVersion = "0.1.0";

/// Ages projected at a time; bounds the per-draw forecast memory.
inline constexpr std::size_t kAgeBlock = 16;

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::Io, "SHA-256 digest failed");
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

/// Fills data_dir from MORTICAST_DATA_DIR when unset, so the manifest echoes the directory actually used.
inline RunConfig resolve_data_dir(RunConfig cfg) {
  if (cfg.data_dir.empty()) {
    if (const char* env = std::getenv("MORTICAST_DATA_DIR")) cfg.data_dir = env;
  }
  if (cfg.data_dir.empty())
    throw Error(ErrorKind::ConfigInvalid, "no data directory: set data.directory or MORTICAST_DATA_DIR");
  return cfg;
}

/// HMD file names: <CODE>.Mx_1x1.txt, or <CODE>.Deaths_1x1.txt + <CODE>.Exposures_1x1.txt.
inline std::vector<std::filesystem::path> hmd_paths(const std::filesystem::path& dir, const std::string& code,
                                                    InputKind input) {
  if (input == InputKind::Rates) return {dir / (code + ".Mx_1x1.txt")};
  return {dir / (code + ".Deaths_1x1.txt"), dir / (code + ".Exposures_1x1.txt")};
}

struct InputRecord {
  std::string path;
  std::string sha256;
  std::size_t bytes = 0;
};

/// Reads and caches HMD tables, recording a checksum for every file consumed.
class DataSource {
 public:
  explicit DataSource(const RunConfig& cfg) : cfg_(cfg) {}

  MortalitySurface load(const std::string& code, int year_first, int year_last) {
    const auto& table = table_for(code);
    auto full = to_surface(table, cfg_.sex, year_first, year_last, cfg_.fill);
    auto s = slice(full, cfg_.min_age, cfg_.max_age, year_first, year_last);
    s.source_label = fmt::format("{} {} {}-{}", code, to_string(cfg_.sex), year_first, year_last);
    return s;
  }

  const std::vector<InputRecord>& inputs() const { return inputs_; }

 private:
  std::string read(const std::filesystem::path& p) {
    auto text = csv::read_file(p);
    inputs_.push_back({p.string(), sha256_hex(text), text.size()});
    return text;
  }

  const HmdTable& table_for(const std::string& code) {
    if (auto it = cache_.find(code); it != cache_.end()) return it->second;
    const auto paths = hmd_paths(cfg_.data_dir, code, cfg_.input);
    HmdTable t;
    if (cfg_.input == InputKind::Rates) {
      t = parse_hmd_file(read(paths[0]), TableKind::DeathRates, code);
    } else {
      auto d = parse_hmd_file(read(paths[0]), TableKind::Deaths, code);
      auto e = parse_hmd_file(read(paths[1]), TableKind::Exposures, code);
      t = rates_table_from_counts(d, e);
    }
    return cache_.emplace(code, std::move(t)).first->second;
  }

  RunConfig cfg_;
  std::map<std::string, HmdTable> cache_;
  std::vector<InputRecord> inputs_;
};

/// One fitted population.
struct CountryRun {
  std::string code;
  std::uint64_t seed = 0;
  MortalitySurface surface;  ///< base period, smoothed when smoothing is on
  ImprovementSurface rho;
  TimeIndex time;
  PosteriorDraws draws;
  std::optional<LogLogPrefit> prefit;
};

inline CountryRun fit_country(const std::string& code, std::size_t index, const RunConfig& cfg, DataSource& source,
                              const RunOptions& options = {}) {
  CountryRun r;
  r.code = code;
  r.seed = derive_seed(cfg.mcmc.seed, stream::kCountry, index);
  r.surface = source.load(code, cfg.base.first, cfg.base.last);
  if (cfg.smoothing_lambda) r.surface = smooth_surface(r.surface, *cfg.smoothing_lambda);
  r.rho = improvement_rates(r.surface);
  r.time = time_index_for(r.rho);
  McmcConfig mc = cfg.mcmc;
  mc.seed = r.seed;
  if (cfg.core_model == CoreModel::Linear) {
    r.draws = fit_linear(r.rho, r.time, mc, {}, options);
  } else {
    r.prefit = prefit_loglog(r.rho, r.time, cfg.prefit_floor);
    r.draws = fit_loglog(r.rho, r.time, mc, {}, options, cfg.prefit_floor);
  }
  return r;
}

inline RhoForecast project_country(const CountryRun& r, const RunConfig& cfg, std::size_t age_begin,
                                   std::size_t age_end) {
  ProjectOptions po;
  po.seed = derive_seed(r.seed, stream::kForecast);
  po.noise = cfg.channel == ForecastChannel::Predictive;
  po.age_begin = age_begin;
  po.age_end = age_end;
  const auto horizon = cfg.horizon.years();
  return cfg.core_model == CoreModel::Linear ? project_linear(r.draws, r.rho, r.time, horizon, po)
                                             : project_loglog(r.draws, r.rho, r.time, horizon, po);
}

inline std::vector<double> jumpoff_rates(const MortalitySurface& s) {
  const Eigen::VectorXd col = s.rates.col(s.rates.cols() - 1);
  return {col.data(), col.data() + col.size()};
}

/// Blends, clamps and propagates the interest forecast into rho / m / e0 fans.
inline ForecastFan build_fan(const CountryRun& interest, const std::vector<CountryRun>& references,
                             const RunConfig& cfg) {
  const auto horizon = cfg.horizon.years();
  const auto& levels = cfg.quantiles;
  const std::size_t n_ages = interest.rho.ages.size();
  const std::size_t nd = interest.draws.n_total();

  ForecastFan fan;
  fan.quantile_levels = levels;
  fan.ages = interest.rho.ages;
  fan.years = horizon;
  fan.jumpoff_year = interest.surface.years.back();
  fan.provenance = fmt::format("{}{}{}", to_string(cfg.core_model), cfg.blend_enabled ? "+blend" : "",
                               cfg.clamp_enabled ? "+clamp" : "");
  fan.rho_fan = Array3<double>(levels.size(), n_ages, horizon.size());

  BlendPlan plan;
  plan.interest_label = interest.code;
  for (const auto& r : references) plan.reference_labels.push_back(r.code);
  plan.horizon_length = horizon.size();
  plan.reference_weights = cfg.reference_weights;
  BlendOptions bo;
  if (cfg.shuffle_references) bo.shuffle_seed = derive_seed(cfg.mcmc.seed, stream::kShuffle);

  const bool keep_draws = cfg.scheme == PropagationScheme::Draws;
  Array3<double> all_draws = keep_draws ? Array3<double>(nd, n_ages, horizon.size()) : Array3<double>();

  for (std::size_t begin = 0; begin < n_ages; begin += kAgeBlock) {
    const std::size_t end = std::min(n_ages, begin + kAgeBlock);
    RhoForecast f = project_country(interest, cfg, begin, end);
    if (cfg.blend_enabled) {
      std::vector<RhoForecast> refs;
      for (const auto& r : references) refs.push_back(project_country(r, cfg, begin, end));
      f = blend_forecasts(f, refs, plan, bo);
    }
    if (cfg.clamp_enabled) f = clamp_rho(std::move(f), cfg.clamp);
    const Array3<double>& channel = cfg.channel == ForecastChannel::Predictive ? f.predictive : f.mean;
    const auto block = quantile_fan(channel, levels);
    for (std::size_t q = 0; q < levels.size(); ++q)
      for (std::size_t x = begin; x < end; ++x)
        for (std::size_t h = 0; h < horizon.size(); ++h) fan.rho_fan(q, x, h) = block(q, x - begin, h);
    if (keep_draws)
      for (std::size_t d = 0; d < nd; ++d)
        for (std::size_t x = begin; x < end; ++x)
          for (std::size_t h = 0; h < horizon.size(); ++h) all_draws(d, x, h) = channel(d, x - begin, h);
  }

  const auto jumpoff = jumpoff_rates(interest.surface);
  if (!keep_draws) {
    fan.m_fan = propagate_quantiles(jumpoff, fan.rho_fan, cfg.propagation);
    fan.e0 = e0_fan(fan.m_fan);
    return fan;
  }
  const auto m = propagate_draws(jumpoff, all_draws, cfg.propagation);
  const Eigen::MatrixXd e0_draws = e0_fan(m);
  fan.m_fan = quantile_fan(m, levels);
  fan.e0.resize(static_cast<Eigen::Index>(levels.size()), static_cast<Eigen::Index>(horizon.size()));
  for (Eigen::Index h = 0; h < e0_draws.cols(); ++h) {
    const Eigen::VectorXd col = e0_draws.col(h);
    const auto qs = quantiles({col.data(), col.data() + col.size()}, levels);
    for (std::size_t q = 0; q < qs.size(); ++q) fan.e0(static_cast<Eigen::Index>(q), h) = qs[q];
  }
  return fan;
}

// ---- comparison ----

struct ModelErrors {
  std::string label;
  ForecastErrors errors;
};

struct ComparisonRow {
  std::string label;
  double mean_abs = 0.0;
  double max_abs = 0.0;
  int terminal_year = 0;
  double terminal = 0.0;
};

inline std::vector<ComparisonRow> compare_models(const std::vector<ModelErrors>& reports) {
  if (reports.empty()) throw Error(ErrorKind::HorizonMismatch, "nothing to compare");
  std::vector<ComparisonRow> rows;
  for (const auto& r : reports) {
    if (r.errors.years != reports.front().errors.years || r.errors.years.empty())
      throw Error(ErrorKind::HorizonMismatch,
                  fmt::format("'{}' covers a different horizon than '{}'", r.label, reports.front().label));
    rows.push_back({r.label, r.errors.mean_abs, r.errors.max_abs, r.errors.years.back(), r.errors.terminal});
  }
  return rows;
}

inline std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "model,mae,max_abs,terminal_year,terminal_error\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{}\n", r.label, csv::num(r.mean_abs), csv::num(r.max_abs), r.terminal_year,
                       csv::num(r.terminal));
  return out;
}

inline std::string comparison_to_text(const std::vector<ComparisonRow>& rows) {
  std::string out = fmt::format("{:<24}{:>10}{:>10}{:>16}\n", "model", "MAE", "max|E|", "terminal E");
  for (const auto& r : rows)
    out += fmt::format("{:<24}{:>10.3f}{:>10.3f}{:>10.3f} ({})\n", r.label, r.mean_abs, r.max_abs, r.terminal,
                       r.terminal_year);
  return out;
}

/// Central intervals from symmetric level pairs (p, 1 - p) of the e0 fan.
inline std::string intervals_to_csv(const ForecastFan& fan) {
  std::string out = "year,coverage,lower,median,upper\n";
  const auto median = fan.e0_series(0.5);
  for (std::size_t h = 0; h < fan.years.size(); ++h)
    for (std::size_t lo = 0; lo < fan.quantile_levels.size(); ++lo) {
      const double p = fan.quantile_levels[lo];
      if (!(p < 0.5)) continue;
      for (std::size_t hi = 0; hi < fan.quantile_levels.size(); ++hi) {
        if (std::abs(fan.quantile_levels[hi] - (1.0 - p)) > 1e-12) continue;
        const auto l = static_cast<Eigen::Index>(lo), u = static_cast<Eigen::Index>(hi),
                   c = static_cast<Eigen::Index>(h);
        out += fmt::format("{},{},{},{},{}\n", fan.years[h], csv::num(1.0 - 2.0 * p), csv::num(fan.e0(l, c)),
                           csv::num(median[h]), csv::num(fan.e0(u, c)));
      }
    }
  return out;
}

/// Width of the central `coverage` e0 interval in each forecast year.
inline std::vector<double> interval_widths(const ForecastFan& fan, double coverage) {
  const double p = 0.5 * (1.0 - coverage);
  const auto lo = fan.e0_series(p), hi = fan.e0_series(1.0 - p);
  std::vector<double> w;
  for (std::size_t h = 0; h < lo.size(); ++h) w.push_back(hi[h] - lo[h]);
  return w;
}

inline std::string year_series_to_csv(const YearSeries& s, std::string_view column) {
  std::string out = fmt::format("year,{}\n", column);
  for (std::size_t i = 0; i < s.years.size(); ++i) out += fmt::format("{},{}\n", s.years[i], csv::num(s.values[i]));
  return out;
}

// ---- reports ----

enum class RunKind { Retrospective, Prospective };

struct RunReport {
  RunKind kind = RunKind::Retrospective;
  RunConfig config;
  ForecastFan fan;
  std::optional<YearSeries> observed_e0;
  std::optional<ForecastErrors> errors;
  std::optional<LeeCarterFit> baseline;
  std::optional<ForecastFan> baseline_fan;
  std::optional<ForecastErrors> baseline_errors;
  std::vector<ChainDiagnostics> diagnostics;
  std::vector<std::pair<std::string, std::uint64_t>> country_seeds;
  std::vector<InputRecord> inputs;
  std::vector<std::string> notes;
  /// Relative output path -> contents, in write order.
  std::vector<std::pair<std::string, std::string>> files;
  nlohmann::ordered_json manifest;

  std::string label() const { return fmt::format("{} {}", config.country_of_interest, to_string(config.core_model)); }
};

inline std::vector<std::string> diagnostic_parameters(CoreModel model) {
  if (model == CoreModel::Linear) return {"sigma", "mu1", "mu2", "omega1", "omega2", "rho_corr"};
  return {"sigma", "sigma1", "sigma2"};
}

namespace detail {

inline void run_diagnostics(RunReport& report, const PosteriorDraws& draws) {
  for (const auto& p : diagnostic_parameters(report.config.core_model)) {
    try {
      auto d = diagnose(draws, {p});
      report.diagnostics.push_back(std::move(d.front()));
    } catch (const Error& e) {
      report.notes.push_back(fmt::format("diagnostics skipped for {}: {}", p, e.what()));
    }
  }
}

inline nlohmann::ordered_json build_manifest(const RunReport& r) {
  nlohmann::ordered_json m;
  m["tool"] = "morticast";
  m["version"] = std::string(kVersion);
  m["command"] = r.kind == RunKind::Retrospective ? "backtest" : "forecast";
  m["seed"] = r.config.mcmc.seed;
  m["config"] = config_to_json(r.config);
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  for (const auto& [code, seed] : r.country_seeds) seeds[code] = seed;
  m["country_seeds"] = seeds;
  m["libraries"] = {{"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                    {"boost", BOOST_LIB_VERSION},
                    {"fmt", FMT_VERSION}};
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& in : r.inputs) inputs.push_back({{"path", in.path}, {"sha256", in.sha256}, {"bytes", in.bytes}});
  m["inputs"] = inputs;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  for (const auto& [path, text] : r.files) outputs.push_back({{"path", path}, {"sha256", sha256_hex(text)}});
  m["outputs"] = outputs;
  m["notes"] = r.notes;
  return m;
}

inline RunReport run_pipeline(RunConfig cfg, RunKind kind, const RunOptions& options) {
  cfg.validate();
  cfg = resolve_data_dir(std::move(cfg));
  RunReport report;
  report.kind = kind;
  report.config = cfg;
  DataSource source(cfg);

  const CountryRun interest = fit_country(cfg.country_of_interest, 0, cfg, source, options);
  report.country_seeds.emplace_back(interest.code, interest.seed);
  std::vector<CountryRun> references;
  for (std::size_t i = 0; i < cfg.reference_countries.size(); ++i) {
    references.push_back(fit_country(cfg.reference_countries[i], i + 1, cfg, source, options));
    report.country_seeds.emplace_back(references.back().code, references.back().seed);
  }

  report.fan = build_fan(interest, references, cfg);
  const auto median = report.fan.e0_series(0.5);

  if (kind == RunKind::Retrospective) {
    const auto observed = source.load(cfg.country_of_interest, cfg.horizon.first, cfg.horizon.last);
    report.observed_e0 = YearSeries{observed.years, e0_by_year(observed)};
    report.errors = forecast_error({report.fan.years, median}, *report.observed_e0);
  }
  if (cfg.baseline) {
    report.baseline = fit_leecarter(interest.surface);
    report.baseline_fan =
        forecast_leecarter(*report.baseline, jumpoff_rates(interest.surface), report.fan.years, cfg.quantiles);
    if (report.observed_e0)
      report.baseline_errors = forecast_error({report.fan.years, report.baseline_fan->e0_series(0.5)},
                                              *report.observed_e0);
  }
  run_diagnostics(report, interest.draws);

  auto& files = report.files;
  files.emplace_back("rho_base.csv", improvement_to_csv(interest.rho));
  if (interest.prefit) files.emplace_back(fmt::format("prefit_{}.csv", interest.code), prefit_to_csv(*interest.prefit));
  if (cfg.write_draws) {
    files.emplace_back(fmt::format("draws_{}.csv", interest.code), draws_to_csv(interest.draws));
    for (const auto& r : references) files.emplace_back(fmt::format("draws_{}.csv", r.code), draws_to_csv(r.draws));
  }
  files.emplace_back("rho_fan.csv", fan_to_csv(report.fan.quantile_levels, report.fan.ages, report.fan.years,
                                               report.fan.rho_fan, "rho"));
  files.emplace_back("m_fan.csv", m_fan_to_csv(report.fan));
  files.emplace_back("e0_fan.csv", e0_fan_to_csv(report.fan));
  files.emplace_back("intervals.csv", intervals_to_csv(report.fan));
  if (report.observed_e0) {
    files.emplace_back("observed_e0.csv", year_series_to_csv(*report.observed_e0, "e0"));
    files.emplace_back("errors.csv", errors_to_csv(*report.errors));
  }
  if (report.baseline_fan) {
    files.emplace_back("leecarter_m_fan.csv", m_fan_to_csv(*report.baseline_fan));
    files.emplace_back("leecarter_e0_fan.csv", e0_fan_to_csv(*report.baseline_fan));
  }
  if (report.errors) {
    std::vector<ModelErrors> models{{report.label(), *report.errors}};
    if (report.baseline_errors) {
      files.emplace_back("leecarter_errors.csv", errors_to_csv(*report.baseline_errors));
      models.push_back({fmt::format("{} lee-carter", cfg.country_of_interest), *report.baseline_errors});
    }
    const auto rows = compare_models(models);
    files.emplace_back("comparison.csv", comparison_to_csv(rows));
    files.emplace_back("comparison.txt", comparison_to_text(rows));
  }
  if (!report.diagnostics.empty()) {
    files.emplace_back("diagnostics.csv", diagnostics_to_csv(report.diagnostics));
    files.emplace_back("diagnostics.txt", diagnostics_table(report.label(), report.diagnostics));
    for (const auto& d : report.diagnostics)
      files.emplace_back(fmt::format("trace_{}.csv", d.parameter), export_trace(interest.draws, d.parameter));
  }
  report.inputs = source.inputs();
  report.manifest = build_manifest(report);
  return report;
}

}  // namespace detail

inline RunReport run_retrospective(const RunConfig& cfg, const RunOptions& options = {}) {
  return detail::run_pipeline(cfg, RunKind::Retrospective, options);
}

inline RunReport run_prospective(const RunConfig& cfg, const RunOptions& options = {}) {
  return detail::run_pipeline(cfg, RunKind::Prospective, options);
}

/// Writes every report file plus manifest.json under `dir` (default: config.output_dir).
inline void write_report(const RunReport& report, std::filesystem::path dir = {}) {
  if (dir.empty()) dir = report.config.output_dir;
  for (const auto& [path, text] : report.files) csv::write_file(dir / path, text);
  csv::write_file(dir / "manifest.json", report.manifest.dump(2) + "\n");
}

}  // namespace morticast
