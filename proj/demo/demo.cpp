// Walks a small synthetic market through the whole analysis in memory:
// ticks -> cleaning -> binned spreads -> market average -> Lomb periodogram ->
// harmonic ladder -> per-stock power laws -> exponent distribution -> labels.

#include <cstdio>
#include <vector>

#include "spreadlab/market_data.hpp"
#include "spreadlab/scaling.hpp"
#include "spreadlab/spectral.hpp"
#include "spreadlab/spread.hpp"
#include "spreadlab/synth.hpp"

using namespace spreadlab;

int main() {
  SynthConfig cfg;
  cfg.stocks = 40;
  cfg.days = 30;
  cfg.beta_mean = 0.2;
  cfg.beta_sd = 0.067;
  cfg.noise = 0.1;
  cfg.crossed_rate = 0.002;
  cfg.sparse_day_rate = 0.02;
  cfg.empty_interval_rate = 0.02;

  std::vector<SpreadSeries> series;
  CleanStats removed;
  for (std::size_t s = 0; s < cfg.stocks; ++s) {
    const auto cleaned = clean_ticks(generate_stock_ticks(cfg, s));
    removed += cleaned.report.total;
    series.push_back(build_spread_series(cleaned.retained));
  }
  std::printf("cleaning: %zu ticks in, %zu kept; %zu crossed quotes, %zu sparse days, %zu days with an empty half hour\n",
              removed.input_ticks, removed.retained_ticks, removed.crossed_quotes, removed.low_frequency_days,
              removed.empty_interval_days);

  const auto days = union_days(series);
  for (auto& s : series) s = align_to_days(s, days);
  const MarketSeries market = market_average(series, "demo");

  // daily periodicity
  const auto samples = lomb_samples(market.values);
  const auto grid = default_freq_grid(samples.times.size(), static_cast<double>(market.values.size()));
  const auto pg = lomb_power(samples.times, samples.values, grid);
  const Peak top = highest_peak(pg);
  std::printf("lomb: %zu samples, %zu frequencies, highest peak at period %.1f bins (P = %.1f)\n", pg.n_samples,
              pg.size(), 1.0 / top.frequency, top.power);
  const auto ladder = harmonic_points(detect_harmonic_peaks(pg, 1.0 / 480.0, 23, 0.02));
  const auto f0 = estimate_fundamental(ladder);
  std::printf("harmonics: %zu found, f0 = %.7f +- %.1e (1/480 = %.7f)\n", ladder.size(), f0.f0, f0.standard_error,
              1.0 / 480.0);

  // intraday relaxation
  const auto market_fit = fit_power_law(intraday_average(market, AveragingMode::exclude_zeros), kMarketTauRange);
  const auto t = regression_t_test(market_fit);
  std::printf("market: beta = %.4f +- %.4f, |T| = %.1f vs %.3f -> %s\n", market_fit.beta, market_fit.beta_stderr,
              t.t_abs, t.critical, t.reject_zero_slope ? "slope is real" : "no slope");

  std::vector<double> betas;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double truth = synth_stock_beta(cfg, s);
    const auto fit = fit_power_law(intraday_average(series[s], AveragingMode::exclude_zeros), kStockTauRange);
    betas.push_back(fit.beta);
    if (s < 5) std::printf("  %s: beta %.4f (generated with %.4f)\n", series[s].stock_id.str().c_str(), fit.beta, truth);
  }
  const Moments m = exponent_moments(betas);
  std::printf("exponents over %zu stocks: mean %.4f, sd %.4f, skewness %.3f, kurtosis %.3f\n", betas.size(), m.mean,
              m.stddev, m.skewness, m.kurtosis);

  const auto label = classify_relaxation(market_fit.beta);
  std::printf("relaxation: theta_endo = %.3f, theta_exo = %.3f -> %s\n", label.theta_endogenous,
              label.theta_exogenous, to_string(label.label));
}
