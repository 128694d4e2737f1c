#pragma once

// 30-second spread series, market averages and intraday profiles.

#include <algorithm>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "spreadlab/calendar.hpp"
#include "spreadlab/errors.hpp"
#include "spreadlab/market_data.hpp"

namespace spreadlab {

/// Point spread ask - bid in 0.001 CNY units.
constexpr std::int64_t point_spread_milli(const QuoteTick& tick) noexcept {
  return tick.ask.milli - tick.bid.milli;
}

/// Point spread ask - bid in CNY. Cleaned ticks guarantee a strictly positive result.
constexpr double point_spread(const QuoteTick& tick) noexcept {
  return static_cast<double>(point_spread_milli(tick)) / 1000.0;
}

/// Mean point spread per session bin for one (stock, day); empty bins hold 0.
/// Ticks outside the sessions are ignored.
inline std::vector<double> bin_day_spreads(std::span<const QuoteTick> day_ticks,
                                           const SessionCalendar& cal = {}) {
  const auto bins = static_cast<std::size_t>(cal.bins_per_day());
  std::vector<std::int64_t> sums(bins, 0);
  std::vector<std::int64_t> counts(bins, 0);
  for (const QuoteTick& t : day_ticks) {
    if (const auto bin = cal.bin_index(t.timestamp.time)) {
      const auto b = static_cast<std::size_t>(*bin - 1);
      sums[b] += point_spread_milli(t);
      ++counts[b];
    }
  }
  std::vector<double> out(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b)
    if (counts[b] > 0)
      out[b] = static_cast<double>(sums[b]) / (static_cast<double>(counts[b]) * 1000.0);
  return out;
}

/// Per-stock spread series: `bins_per_day` consecutive values per trading day.
struct SpreadSeries {
  StockId stock_id;
  std::vector<Date> days;
  std::vector<double> values;
  int bins_per_day = kBinsPerDay;

  std::size_t day_count() const noexcept { return days.size(); }
  std::span<const double> day(std::size_t d) const {
    return std::span<const double>(values).subspan(d * static_cast<std::size_t>(bins_per_day),
                                                   static_cast<std::size_t>(bins_per_day));
  }
};

/// Builds the series for one stock from its cleaned, date-sorted ticks.
inline SpreadSeries build_spread_series(std::span<const QuoteTick> stock_ticks,
                                        const SessionCalendar& cal = {}) {
  SpreadSeries series;
  series.bins_per_day = cal.bins_per_day();
  if (stock_ticks.empty()) return series;
  series.stock_id = stock_ticks.front().stock_id;
  std::size_t begin = 0;
  while (begin < stock_ticks.size()) {
    const Date date = stock_ticks[begin].timestamp.date;
    if (stock_ticks[begin].stock_id != series.stock_id)
      throw InvalidArgument("build_spread_series: ticks from more than one stock");
    std::size_t end = begin;
    while (end < stock_ticks.size() && stock_ticks[end].timestamp.date == date &&
           stock_ticks[end].stock_id == series.stock_id)
      ++end;
    if (!series.days.empty() && date <= series.days.back())
      throw InvalidArgument("build_spread_series: ticks are not grouped by ascending date");
    const auto day = bin_day_spreads(stock_ticks.subspan(begin, end - begin), cal);
    series.days.push_back(date);
    series.values.insert(series.values.end(), day.begin(), day.end());
    begin = end;
  }
  return series;
}

/// Sorted union of the trading days of several series.
inline std::vector<Date> union_days(std::span<const SpreadSeries> series) {
  std::set<Date> days;
  for (const auto& s : series) days.insert(s.days.begin(), s.days.end());
  return {days.begin(), days.end()};
}

/// Re-indexes a series onto `days`; days absent from the series become zero-filled.
inline SpreadSeries align_to_days(const SpreadSeries& series, std::span<const Date> days) {
  SpreadSeries out;
  out.stock_id = series.stock_id;
  out.bins_per_day = series.bins_per_day;
  out.days.assign(days.begin(), days.end());
  const auto bins = static_cast<std::size_t>(series.bins_per_day);
  out.values.assign(days.size() * bins, 0.0);
  std::size_t src = 0;
  for (std::size_t d = 0; d < days.size(); ++d) {
    while (src < series.days.size() && series.days[src] < days[d]) ++src;
    if (src < series.days.size() && series.days[src] == days[d]) {
      const auto day = series.day(src);
      std::copy(day.begin(), day.end(), out.values.begin() + static_cast<std::ptrdiff_t>(d * bins));
    }
  }
  for (std::size_t s = 0; s < series.days.size(); ++s)
    if (!std::binary_search(days.begin(), days.end(), series.days[s]))
      throw MisalignedSeries("align_to_days: target day list omits " +
                             format_date(series.days[s]));
  return out;
}

/// Cross-sectional average spread per bin over stocks with data in that bin.
struct MarketSeries {
  std::string exchange;
  std::vector<Date> days;
  std::vector<double> values;
  std::vector<std::uint32_t> n_stocks;
  int bins_per_day = kBinsPerDay;
};

/// Averages aligned stock series bin by bin, skipping zero (no-data) entries.
///
/// All inputs must share one day list (see align_to_days). Bins where no stock has
/// data are 0 with a contributor count of 0.
inline MarketSeries market_average(std::span<const SpreadSeries> series,
                                   std::string exchange = {}) {
  if (series.empty()) throw InvalidArgument("market_average: no series");
  MarketSeries out;
  out.exchange = std::move(exchange);
  out.days = series.front().days;
  out.bins_per_day = series.front().bins_per_day;
  const std::size_t n = series.front().values.size();
  for (const auto& s : series)
    if (s.days != out.days || s.values.size() != n || s.bins_per_day != out.bins_per_day)
      throw MisalignedSeries("market_average: series " + s.stock_id.str() +
                             " has a different day list");

  out.values.assign(n, 0.0);
  out.n_stocks.assign(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    double mean = 0.0;
    double lo = 0.0, hi = 0.0;
    std::uint32_t count = 0;
    for (const auto& s : series) {
      const double v = s.values[t];
      if (v == 0.0) continue;
      ++count;
      // Running mean: exact for identical inputs.
      mean += (v - mean) / static_cast<double>(count);
      lo = count == 1 ? v : std::min(lo, v);
      hi = count == 1 ? v : std::max(hi, v);
    }
    out.values[t] = count ? std::clamp(mean, lo, hi) : 0.0;
    out.n_stocks[t] = count;
  }
  return out;
}

enum class AveragingMode {
  include_zeros,  // sum over all days divided by the day count
  exclude_zeros,  // divide by the number of days with data in that bin
};

/// Average spread at each intraday bin over trading days.
struct IntradayProfile {
  std::vector<double> values;
  std::size_t days = 0;
  AveragingMode mode = AveragingMode::exclude_zeros;
};

inline IntradayProfile intraday_average(std::span<const double> series, AveragingMode mode,
                                        int bins_per_day = kBinsPerDay) {
  const auto bins = static_cast<std::size_t>(bins_per_day);
  if (series.empty()) throw InvalidArgument("intraday_average: empty series");
  if (series.size() % bins != 0)
    throw InvalidArgument("intraday_average: series length is not a multiple of " +
                          std::to_string(bins));
  IntradayProfile out;
  out.days = series.size() / bins;
  out.mode = mode;
  out.values.assign(bins, 0.0);
  for (std::size_t tau = 0; tau < bins; ++tau) {
    double sum = 0.0;
    std::size_t nonzero = 0;
    for (std::size_t d = 0; d < out.days; ++d) {
      const double v = series[d * bins + tau];
      sum += v;
      nonzero += v != 0.0;
    }
    if (mode == AveragingMode::include_zeros)
      out.values[tau] = sum / static_cast<double>(out.days);
    else
      out.values[tau] = nonzero ? sum / static_cast<double>(nonzero) : 0.0;
  }
  return out;
}

inline IntradayProfile intraday_average(const SpreadSeries& s, AveragingMode mode) {
  return intraday_average(s.values, mode, s.bins_per_day);
}

inline IntradayProfile intraday_average(const MarketSeries& s, AveragingMode mode) {
  return intraday_average(s.values, mode, s.bins_per_day);
}

}  // namespace spreadlab
