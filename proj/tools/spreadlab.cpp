// spreadlab command-line driver.
//
//   spreadlab <clean|spreads|lomb|intraday|fit|dist|classify|synth|all> [--config file] [flags]
//
// Flags override config-file keys; SPREADLAB_OUT sets the default output root.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "spreadlab/pipeline.hpp"

namespace {

struct Flag {
  const char* name;
  const char* key;  // section.key
  const char* help;
};

// Every flag is a string override of one config key; typed parsing happens in
// PipelineConfig::from_config so flags and config files go through one path.
constexpr Flag kFlags[] = {
    {"--input", "pipeline.input", "tick files: glob, file or directory"},
    {"--out", "pipeline.output", "output root directory"},
    {"--jobs", "pipeline.jobs", "worker threads (0 = all cores)"},
    {"--min-day-ticks", "market-data.min_day_ticks", "minimum ticks for a trading day"},
    {"--error-cap", "market-data.error_cap", "maximum fraction of malformed rows per file"},
    {"--mode", "spread-core.averaging_mode", "per-stock averaging: include-zeros | exclude-zeros"},
    {"--market-mode", "spread-core.market_averaging_mode", "market averaging: include-zeros | exclude-zeros"},
    {"--oversample", "spectral.oversample", "frequency grid oversampling factor"},
    {"--hi-factor", "spectral.hi_factor", "highest frequency as a multiple of the average Nyquist"},
    {"--m-independent", "spectral.m_independent", "independent frequencies for p-values (0 = auto)"},
    {"--harmonics", "spectral.harmonics", "number of harmonics to search"},
    {"--window", "spectral.window", "relative search window around each harmonic"},
    {"--zero-policy", "spectral.zero_policy", "empty bins in the Lomb input: omit | keep"},
    {"--tau-min", "scaling.tau_min", "per-stock fit range start"},
    {"--tau-max", "scaling.tau_max", "per-stock fit range end"},
    {"--market-tau-min", "scaling.market_tau_min", "market fit range start"},
    {"--market-tau-max", "scaling.market_tau_max", "market fit range end"},
    {"--t-quantile", "scaling.t_quantile", "quantile for the slope t-test"},
    {"--bins", "scaling.bins", "chi-square bins"},
    {"--level", "scaling.level", "chi-square confidence level"},
    {"--histogram-bins", "scaling.histogram_bins", "bins of the exponent histogram"},
    {"--theta-ref", "scaling.theta_ref", "reference endogenous relaxation exponent"},
    {"--theta-tolerance", "scaling.theta_tolerance", "tolerance for the endogenous label"},
    {"--stocks", "synth.stocks", "synthetic stocks"},
    {"--days", "synth.days", "synthetic trading days"},
    {"--beta", "synth.beta_mean", "synthetic exponent mean"},
    {"--beta-sd", "synth.beta_sd", "synthetic exponent standard deviation"},
    {"--noise", "synth.noise", "synthetic log-noise level"},
    {"--seed", "synth.seed", "synthetic master seed"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spreadlab: intraday bid-ask spread analysis"};
  app.set_version_flag("--version", std::string(spreadlab::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> overrides;
  for (const auto& stage : spreadlab::stage_names()) {
    auto* sub = app.add_subcommand(
        stage, stage == "all" ? std::string("run clean through classify") : "run the " + stage + " stage");
    sub->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    for (const auto& f : kFlags)
      sub->add_option_function<std::string>(
          f.name, [&overrides, key = std::string(f.key)](const std::string& v) { overrides[key] = v; }, f.help);
  }

  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    auto kv = config_path.empty() ? spreadlab::KeyValueConfig{}
                                  : spreadlab::KeyValueConfig::from_file(config_path);
    if (!kv.contains("pipeline.output")) {
      if (const char* env = std::getenv("SPREADLAB_OUT"); env && *env) kv.set("pipeline.output", env);
    }
    for (auto& [key, value] : overrides) kv.set(key, value);

    const auto cfg = spreadlab::PipelineConfig::from_config(kv);
    for (const auto& key : kv.unused_keys()) std::cerr << "warning: unknown config key '" << key << "'\n";

    std::vector<spreadlab::StageReport> reports;
    if (stage == "all") reports = spreadlab::run_all(cfg);
    else reports.push_back(spreadlab::run_stage(stage, cfg));

    for (const auto& r : reports) {
      std::cout << r.stage << ": " << r.outputs.size() << " artifacts";
      if (!r.soft_failures.empty()) std::cout << ", " << r.soft_failures.size() << " soft failures";
      std::cout << '\n';
      for (const auto& f : r.soft_failures)
        std::cerr << "  " << r.stage << ": " << (f.stock_id.empty() ? "" : f.stock_id + ": ") << f.message << '\n';
    }
  } catch (const spreadlab::MissingArtifact& e) {
    std::cerr << "spreadlab " << stage << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "spreadlab " << stage << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
