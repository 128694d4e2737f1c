#pragma once

// Synthetic quote streams with a known intraday spread profile.
//
// Per stock and trading day, ticks arrive at quasi-regular gaps through both
// sessions. A tick in bin tau carries the spread
//
//     s = baseline * u(tau)^(-amplitude * beta) * exp(noise * eps),  eps ~ N(0, 1)
//
// with u(tau) = tau in the morning and u(tau) = tau - morning_bins + reopen_offset
// in the afternoon, quantized to 0.001 CNY. amplitude = 1 makes the morning profile
// an exact power law with exponent beta; amplitude = 0 makes it flat.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "spreadlab/calendar.hpp"
#include "spreadlab/config.hpp"
#include "spreadlab/errors.hpp"
#include "spreadlab/market_data.hpp"
#include "spreadlab/parallel.hpp"

namespace spreadlab {

struct SynthConfig {
  std::size_t stocks = 10;
  std::size_t days = 20;
  double beta_mean = 0.20;
  double beta_sd = 0.0;  // 0: every stock uses beta_mean
  double baseline = 0.04;  // CNY at tau = 1
  double amplitude = 1.0;
  double reopen_offset = 40.0;
  double noise = 0.0;  // sd of the multiplicative log-noise
  double mean_gap = 7.0;  // seconds between ticks; gaps are uniform in mean_gap * [6/7, 8/7]
  std::uint64_t seed = 1;
  double crossed_rate = 0.0;  // per tick: ask <= bid
  double sparse_day_rate = 0.0;  // per (stock, day): only sparse_day_ticks ticks
  double empty_interval_rate = 0.0;  // per (stock, day): one 30-minute interval left empty
  std::size_t sparse_day_ticks = 20;
  Date start_date = Date{std::chrono::year{2005} / 1 / 4};
  int first_code = 600000;
  double base_price = 10.0;

  void validate() const {
    auto rate = [](double r, const char* name) {
      if (!(r >= 0.0 && r <= 1.0))
        throw InvalidArgument(std::string("synth: ") + name + " must be in [0, 1]");
    };
    rate(crossed_rate, "crossed_rate");
    rate(sparse_day_rate, "sparse_day_rate");
    rate(empty_interval_rate, "empty_interval_rate");
    if (stocks == 0 || days == 0) throw InvalidArgument("synth: stocks and days must be positive");
    if (!(baseline > 0.0)) throw InvalidArgument("synth: baseline must be positive");
    if (!(mean_gap >= 1.0)) throw InvalidArgument("synth: mean_gap must be >= 1 second");
    if (!(noise >= 0.0) || !(beta_sd >= 0.0) || !(amplitude >= 0.0))
      throw InvalidArgument("synth: noise, beta_sd and amplitude must be non-negative");
    if (!(reopen_offset >= 1.0)) throw InvalidArgument("synth: reopen_offset must be >= 1");
    if (!(base_price >= 1.0)) throw InvalidArgument("synth: base_price must be >= 1 CNY");
    if (first_code < 0 || first_code + static_cast<long long>(stocks) > 999999)
      throw InvalidArgument("synth: stock codes must fit in 6 digits");
  }

  /// Reads keys from the [synth] section (bare keys are accepted too).
  static SynthConfig from_config(const KeyValueConfig& kv) {
    SynthConfig c;
    const std::string s = "synth";
    c.stocks = kv.get_or<std::size_t>(s, "stocks", c.stocks);
    c.days = kv.get_or<std::size_t>(s, "days", c.days);
    c.beta_mean = kv.get_or<double>(s, "beta_mean", c.beta_mean);
    c.beta_sd = kv.get_or<double>(s, "beta_sd", c.beta_sd);
    c.baseline = kv.get_or<double>(s, "baseline", c.baseline);
    c.amplitude = kv.get_or<double>(s, "amplitude", c.amplitude);
    c.reopen_offset = kv.get_or<double>(s, "reopen_offset", c.reopen_offset);
    c.noise = kv.get_or<double>(s, "noise", c.noise);
    c.mean_gap = kv.get_or<double>(s, "mean_gap", c.mean_gap);
    c.seed = kv.get_or<std::uint64_t>(s, "seed", c.seed);
    c.crossed_rate = kv.get_or<double>(s, "crossed_rate", c.crossed_rate);
    c.sparse_day_rate = kv.get_or<double>(s, "sparse_day_rate", c.sparse_day_rate);
    c.empty_interval_rate = kv.get_or<double>(s, "empty_interval_rate", c.empty_interval_rate);
    c.sparse_day_ticks = kv.get_or<std::size_t>(s, "sparse_day_ticks", c.sparse_day_ticks);
    if (const auto d = kv.get<std::string>(s, "start_date")) {
      const auto parsed = parse_date(*d);
      if (!parsed) throw InvalidArgument("synth.start_date: expected YYYY-MM-DD, got '" + *d + "'");
      c.start_date = *parsed;
    }
    c.first_code = kv.get_or<int>(s, "first_code", c.first_code);
    c.base_price = kv.get_or<double>(s, "base_price", c.base_price);
    c.validate();
    return c;
  }
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0x632BE59BD9B4E019ull));
}

inline constexpr std::uint64_t kBetaStream = 0xFFFFFFFFull;

}  // namespace detail

/// Monday-to-Friday trading days from the configured start date.
inline std::vector<Date> synth_trading_days(const SynthConfig& cfg) {
  std::vector<Date> days;
  Date d = cfg.start_date;
  while (days.size() < cfg.days) {
    const std::chrono::weekday wd{d};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) days.push_back(d);
    d += std::chrono::days{1};
  }
  return days;
}

inline StockId synth_stock_id(const SynthConfig& cfg, std::size_t stock) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%06d", cfg.first_code + static_cast<int>(stock));
  return StockId(buf);
}

/// Ground-truth exponent of one stock.
inline double synth_stock_beta(const SynthConfig& cfg, std::size_t stock) {
  if (cfg.beta_sd == 0.0) return cfg.beta_mean;
  std::mt19937_64 rng(detail::derive_seed(cfg.seed, stock, detail::kBetaStream));
  std::normal_distribution<double> draw(cfg.beta_mean, cfg.beta_sd);
  return draw(rng);
}

/// Noise-free spread (CNY) in a 1-based bin.
inline double synth_profile_value(const SynthConfig& cfg, double beta, int tau,
                                  const SessionCalendar& cal = {}) {
  const int morning = cal.morning_bins();
  const double u = tau <= morning ? static_cast<double>(tau)
                                  : static_cast<double>(tau - morning) + cfg.reopen_offset;
  return cfg.baseline * std::pow(u, -cfg.amplitude * beta);
}

/// Ticks of one stock across all configured days, in time order.
inline std::vector<QuoteTick> generate_stock_ticks(const SynthConfig& cfg, std::size_t stock,
                                                   const SessionCalendar& cal = {}) {
  cfg.validate();
  const StockId id = synth_stock_id(cfg, stock);
  const double beta = synth_stock_beta(cfg, stock);
  const auto days = synth_trading_days(cfg);
  const int bins = cal.bins_per_day();

  std::vector<double> profile(static_cast<std::size_t>(bins));
  for (int tau = 1; tau <= bins; ++tau)
    profile[static_cast<std::size_t>(tau - 1)] = synth_profile_value(cfg, beta, tau, cal);

  const double gap_lo = cfg.mean_gap * 6.0 / 7.0;
  const double gap_hi = cfg.mean_gap * 8.0 / 7.0;
  const auto session_seconds = static_cast<double>(cal.morning_seconds() + cal.afternoon_seconds());
  std::vector<QuoteTick> ticks;
  ticks.reserve(static_cast<std::size_t>(days.size() * (session_seconds / cfg.mean_gap + 4)));

  const auto base_milli = Price::from_cny(cfg.base_price).milli;
  for (std::size_t d = 0; d < days.size(); ++d) {
    std::mt19937_64 rng(detail::derive_seed(cfg.seed, stock, d));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const bool sparse = unit(rng) < cfg.sparse_day_rate;
    const bool hole = unit(rng) < cfg.empty_interval_rate;
    const int empty_interval = static_cast<int>(unit(rng) * cal.intervals_per_day());
    std::int64_t bid_milli = base_milli;

    std::vector<int> seconds;
    if (sparse) {
      for (std::size_t i = 0; i < cfg.sparse_day_ticks; ++i) {
        const int offset = static_cast<int>(unit(rng) * session_seconds);
        seconds.push_back(offset < cal.morning_seconds()
                              ? cal.morning_open.seconds + offset
                              : cal.afternoon_open.seconds + offset - cal.morning_seconds());
      }
      std::sort(seconds.begin(), seconds.end());
    } else {
      for (const auto& [open, close] : {std::pair{cal.morning_open, cal.morning_close},
                                        std::pair{cal.afternoon_open, cal.afternoon_close}}) {
        double t = open.seconds + std::floor(unit(rng) * gap_lo);
        while (t <= close.seconds) {
          seconds.push_back(static_cast<int>(t));
          t += std::max(1.0, std::round(gap_lo + (gap_hi - gap_lo) * unit(rng)));
        }
      }
    }

    for (int sec : seconds) {
      const TimeOfDay time{sec};
      const int bin = *cal.bin_index(time);
      if (hole && cal.interval_of_bin(bin) == empty_interval) continue;
      double s = profile[static_cast<std::size_t>(bin - 1)];
      if (cfg.noise > 0.0) s *= std::exp(cfg.noise * normal(rng));
      const std::int64_t spread_milli = std::max<std::int64_t>(1, std::llround(s * 1000.0));
      if (unit(rng) < 0.1) bid_milli += unit(rng) < 0.5 ? -10 : 10;
      bid_milli = std::max<std::int64_t>(bid_milli, 1000);

      QuoteTick tick{id, Timestamp{days[d], time}, Price{bid_milli + spread_milli}, Price{bid_milli}};
      if (unit(rng) < cfg.crossed_rate)
        tick.ask = unit(rng) < 0.5 ? tick.bid : Price{tick.bid.milli - spread_milli};
      ticks.push_back(tick);
    }
  }
  return ticks;
}

/// Writes one tick CSV per stock (`ticks_<code>.csv`) under `dir`; returns the paths.
inline std::vector<std::filesystem::path> gen_quote_stream(const SynthConfig& cfg,
                                                           const std::filesystem::path& dir,
                                                           unsigned jobs = 0,
                                                           const SessionCalendar& cal = {}) {
  cfg.validate();
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths(cfg.stocks);
  parallel_for(cfg.stocks, jobs, [&](std::size_t i) {
    const auto ticks = generate_stock_ticks(cfg, i, cal);
    paths[i] = dir / ("ticks_" + synth_stock_id(cfg, i).str() + ".csv");
    std::ofstream out(paths[i], std::ios::binary);
    if (!out) throw Error("cannot write " + paths[i].string());
    write_tick_csv(out, ticks);
    if (!out) throw Error("write failed: " + paths[i].string());
  });
  return paths;
}

}  // namespace spreadlab
