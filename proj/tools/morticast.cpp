// morticast command-line driver.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "morticast/morticast.hpp"

namespace mc = morticast;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model;
  bool no_blend = false;
  std::string quantiles;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI config or run manifest (.json)");
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--model", o.model, "core model: linear | loglog")->check(CLI::IsMember({"linear", "loglog"}));
  cmd->add_flag("--no-blend", o.no_blend, "disable blending and drop reference countries");
  cmd->add_option("--quantiles", o.quantiles, "comma-separated quantile levels");
}

mc::RunConfig effective_config(const Overrides& o, bool require_file) {
  mc::RunConfig cfg;
  if (!o.config.empty()) cfg = mc::load_config(o.config);
  else if (require_file) throw mc::Error(mc::ErrorKind::ConfigInvalid, "--config is required");
  if (o.seed) cfg.mcmc.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.model.empty()) cfg.core_model = mc::parse_core_model(o.model);
  if (o.no_blend) {
    cfg.blend_enabled = false;
    cfg.reference_countries.clear();
    cfg.reference_weights.clear();
  }
  if (!o.quantiles.empty()) cfg.quantiles = mc::detail::parse_number_list(o.quantiles);
  return cfg;
}

mc::YearSpan span_arg(const std::string& s) { return mc::detail::parse_span(s); }

void print_report(const mc::RunReport& r) {
  fmt::print("{} -> {}\n", r.label(), r.config.output_dir);
  const auto median = r.fan.e0_series(0.5);
  fmt::print("median e0 {}: {:.2f}   {}: {:.2f}\n", r.fan.years.front(), median.front(), r.fan.years.back(),
             median.back());
  if (r.errors) {
    std::vector<mc::ModelErrors> models{{r.label(), *r.errors}};
    if (r.baseline_errors) models.push_back({"lee-carter", *r.baseline_errors});
    fmt::print("{}", mc::comparison_to_text(mc::compare_models(models)));
  }
  for (const auto& n : r.notes) fmt::print("note: {}\n", n);
}

int exit_code(mc::ErrorCategory c) {
  switch (c) {
    case mc::ErrorCategory::Config: return 2;
    case mc::ErrorCategory::Data: return 3;
    case mc::ErrorCategory::Numeric: return 4;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian mortality improvement forecasts"};
  app.require_subcommand(1);
  Overrides o;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "HMD 1x1 file(s) -> age,year,value surface CSV");
  add_common(ingest, o);
  std::string in_path, exposures_path, sex = "female", years, ages = "0-110", fill = "none";
  ingest->add_option("--input", in_path, "Mx_1x1 file, or Deaths_1x1 when --exposures is given")->required();
  ingest->add_option("--exposures", exposures_path, "Exposures_1x1 file");
  ingest->add_option("--sex", sex, "female | male | total");
  ingest->add_option("--years", years, "FIRST-LAST")->required();
  ingest->add_option("--ages", ages, "FIRST-LAST");
  ingest->add_option("--fill", fill, "none | carry-down");

  // improve
  auto* improve = app.add_subcommand("improve", "surface CSV -> improvement-rate CSV");
  add_common(improve, o);
  std::optional<double> lambda;
  std::string breaks;
  improve->add_option("--input", in_path, "surface CSV")->required();
  improve->add_option("--smooth", lambda, "Whittaker smoothing lambda");
  improve->add_option("--breaks", breaks, "heat-map bin breaks");

  // fit
  auto* fit = app.add_subcommand("fit", "improvement-rate CSV -> posterior draws CSV");
  add_common(fit, o);
  fit->add_option("--input", in_path, "improvement-rate CSV")->required();

  // forecast / backtest
  auto* forecast = app.add_subcommand("forecast", "prospective forecast from a config");
  add_common(forecast, o);
  auto* backtest = app.add_subcommand("backtest", "retrospective forecast with errors against observed e0");
  add_common(backtest, o);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "ACF and Raftery-Lewis diagnostics for a draws CSV");
  add_common(diag, o);
  std::string params = "sigma";
  std::size_t max_lag = 40;
  double q = 0.025, r = 0.005, s = 0.95;
  diag->add_option("--draws", in_path, "draws CSV")->required();
  diag->add_option("--parameters", params, "comma-separated parameter names");
  diag->add_option("--max-lag", max_lag);
  diag->add_option("-q", q);
  diag->add_option("-r", r);
  diag->add_option("-s", s);

  // compare
  auto* compare = app.add_subcommand("compare", "compare error CSVs (year,E_t) over one horizon");
  add_common(compare, o);
  std::vector<std::string> error_files;
  compare->add_option("--errors", error_files, "LABEL=PATH (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const std::filesystem::path out = o.out.empty() ? std::filesystem::path(".") : std::filesystem::path(o.out);
    if (ingest->parsed()) {
      const auto y = span_arg(years), a = span_arg(ages);
      const auto policy = mc::parse_fill_policy(fill);
      mc::MortalitySurface surface;
      if (exposures_path.empty()) {
        auto t = mc::parse_hmd_file(mc::csv::read_file(in_path), mc::TableKind::DeathRates);
        surface = mc::to_surface(t, mc::parse_sex(sex), y.first, y.last, policy);
      } else {
        auto d = mc::parse_hmd_file(mc::csv::read_file(in_path), mc::TableKind::Deaths);
        auto e = mc::parse_hmd_file(mc::csv::read_file(exposures_path), mc::TableKind::Exposures);
        surface = mc::rates_from_counts(d, e, mc::parse_sex(sex), y.first, y.last, policy);
      }
      surface = mc::slice(surface, a.first, a.last, y.first, y.last);
      mc::csv::write_file(out / "surface.csv", mc::surface_to_csv(surface));
      fmt::print("{} ages x {} years, {} filled cells -> {}\n", surface.ages.size(), surface.years.size(),
                 surface.filled.size(), (out / "surface.csv").string());
    } else if (improve->parsed()) {
      auto surface = mc::surface_from_csv(mc::csv::read_file(in_path));
      if (lambda) {
        surface = mc::smooth_surface(surface, *lambda);
        mc::csv::write_file(out / "surface_smoothed.csv", mc::surface_to_csv(surface));
      }
      const auto rho = mc::improvement_rates(surface);
      mc::csv::write_file(out / "rho.csv", mc::improvement_to_csv(rho));
      if (!breaks.empty())
        mc::csv::write_file(out / "heatmap.csv",
                            mc::surface_to_heatmap_csv(rho, mc::detail::parse_number_list(breaks)));
      fmt::print("{} ages x {} years of improvement rates -> {}\n", rho.n_ages(), rho.n_years(), out.string());
    } else if (fit->parsed()) {
      const auto cfg = effective_config(o, false);
      try {
        cfg.mcmc.validate();
      } catch (const mc::Error& e) {
        throw mc::Error(mc::ErrorKind::ConfigInvalid, e.what());
      }
      const auto rho = mc::improvement_from_csv(mc::csv::read_file(in_path));
      const auto time = mc::time_index_for(rho);
      mc::PosteriorDraws draws;
      if (cfg.core_model == mc::CoreModel::Linear) {
        draws = mc::fit_linear(rho, time, cfg.mcmc);
      } else {
        const auto prefit = mc::prefit_loglog(rho, time, cfg.prefit_floor);
        mc::csv::write_file(out / "prefit.csv", mc::prefit_to_csv(prefit));
        draws = mc::fit_loglog(rho, time, cfg.mcmc, {}, {}, cfg.prefit_floor);
      }
      mc::csv::write_file(out / "draws.csv", mc::draws_to_csv(draws));
      fmt::print("{} chains x {} kept draws of {} parameters -> {}\n", draws.n_chains(), draws.n_kept(),
                 draws.n_parameters(), (out / "draws.csv").string());
    } else if (forecast->parsed() || backtest->parsed()) {
      const auto cfg = effective_config(o, true);
      const auto report = backtest->parsed() ? mc::run_retrospective(cfg) : mc::run_prospective(cfg);
      mc::write_report(report);
      print_report(report);
    } else if (diag->parsed()) {
      const auto draws = mc::draws_from_csv(mc::csv::read_file(in_path));
      const auto names = mc::detail::split_list(params);
      const auto diags = mc::diagnose(draws, names, max_lag, q, r, s);
      mc::csv::write_file(out / "diagnostics.csv", mc::diagnostics_to_csv(diags));
      std::string acf = "parameter,lag,acf\n";
      for (const auto& d : diags) {
        for (std::size_t lag = 0; lag < d.acf.size(); ++lag)
          acf += fmt::format("{},{},{}\n", d.parameter, lag, mc::csv::num(d.acf[lag]));
        mc::csv::write_file(out / fmt::format("trace_{}.csv", d.parameter), mc::export_trace(draws, d.parameter));
      }
      mc::csv::write_file(out / "acf.csv", acf);
      fmt::print("{}", mc::diagnostics_table(in_path, diags));
    } else if (compare->parsed()) {
      std::vector<mc::ModelErrors> models;
      for (const auto& spec : error_files) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
          throw mc::Error(mc::ErrorKind::ConfigInvalid, fmt::format("expected LABEL=PATH, got '{}'", spec));
        models.push_back({spec.substr(0, eq), mc::errors_from_csv(mc::csv::read_file(spec.substr(eq + 1)))});
      }
      const auto rows = mc::compare_models(models);
      if (!o.out.empty()) {
        mc::csv::write_file(out / "comparison.csv", mc::comparison_to_csv(rows));
        mc::csv::write_file(out / "comparison.txt", mc::comparison_to_text(rows));
      }
      fmt::print("{}", mc::comparison_to_text(rows));
    }
  } catch (const mc::Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", mc::to_string(e.kind()), e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 3;
  }
  return 0;
}
