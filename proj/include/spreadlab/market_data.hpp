#pragma once

// Tick ingestion and cleaning for best-bid/best-ask quote streams.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spreadlab/calendar.hpp"
#include "spreadlab/errors.hpp"

namespace spreadlab {

/// Exchange-qualified stock symbol ("600100", "000031"), stored inline.
class StockId {
 public:
  static constexpr std::size_t kCapacity = 15;

  constexpr StockId() noexcept = default;

  explicit StockId(std::string_view text) {
    if (text.empty() || text.size() > kCapacity)
      throw InvalidArgument("stock id must be 1.." + std::to_string(kCapacity) +
                            " characters: '" + std::string(text) + "'");
    std::copy(text.begin(), text.end(), chars_.begin());
    size_ = static_cast<std::uint8_t>(text.size());
  }

  std::string_view view() const noexcept { return {chars_.data(), size_}; }
  std::string str() const { return std::string(view()); }
  bool empty() const noexcept { return size_ == 0; }

  friend bool operator==(const StockId& a, const StockId& b) noexcept {
    return a.view() == b.view();
  }
  friend auto operator<=>(const StockId& a, const StockId& b) noexcept {
    return a.view() <=> b.view();
  }

 private:
  std::array<char, kCapacity> chars_{};
  std::uint8_t size_ = 0;
};

/// Price in integer units of 0.001 CNY.
struct Price {
  std::int64_t milli = 0;

  static constexpr Price from_cny(double cny) noexcept {
    return Price{static_cast<std::int64_t>(cny * 1000.0 + (cny >= 0 ? 0.5 : -0.5))};
  }
  constexpr double cny() const noexcept { return static_cast<double>(milli) / 1000.0; }
  constexpr auto operator<=>(const Price&) const = default;
};

/// Parses a decimal price with at most three fraction digits ("10.5", "10.525").
constexpr std::optional<Price> parse_price(std::string_view text) noexcept {
  if (text.empty()) return std::nullopt;
  std::int64_t whole = 0;
  std::size_t i = 0;
  bool any_digit = false;
  for (; i < text.size() && text[i] != '.'; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') return std::nullopt;
    if (whole > (INT64_MAX / 10000)) return std::nullopt;
    whole = whole * 10 + (c - '0');
    any_digit = true;
  }
  std::int64_t frac = 0;
  int frac_digits = 0;
  if (i < text.size()) {
    for (++i; i < text.size(); ++i) {
      const char c = text[i];
      if (c < '0' || c > '9' || frac_digits == 3) return std::nullopt;
      frac = frac * 10 + (c - '0');
      ++frac_digits;
      any_digit = true;
    }
  }
  if (!any_digit) return std::nullopt;
  for (; frac_digits < 3; ++frac_digits) frac *= 10;
  return Price{whole * 1000 + frac};
}

inline std::string format_price(Price p) {
  char buf[32];
  const std::int64_t whole = p.milli / 1000;
  const std::int64_t frac = p.milli % 1000;
  std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(whole),
                static_cast<long long>(frac < 0 ? -frac : frac));
  return buf;
}

struct Timestamp {
  Date date{};
  TimeOfDay time{};

  constexpr auto operator<=>(const Timestamp&) const = default;
};

/// One best-ask/best-bid observation.
struct QuoteTick {
  StockId stock_id;
  Timestamp timestamp;
  Price ask;
  Price bid;

  friend bool operator==(const QuoteTick&, const QuoteTick&) = default;
};

/// Orders ticks by (stock, date, time); stable sorting keeps file order for ties.
struct TickOrder {
  bool operator()(const QuoteTick& a, const QuoteTick& b) const noexcept {
    if (a.stock_id != b.stock_id) return a.stock_id < b.stock_id;
    return a.timestamp < b.timestamp;
  }
};

inline constexpr std::string_view kTickCsvHeader = "stock_id,date,time,bid,ask";

struct RowError {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

struct ParseOptions {
  /// Maximum tolerated fraction of malformed rows before parsing fails outright.
  double error_cap = 0.05;
};

struct ParsedTicks {
  std::vector<QuoteTick> ticks;
  std::vector<RowError> errors;
  std::size_t rows = 0;
};

namespace detail {

inline std::string_view trim_cr(std::string_view line) noexcept {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  return line;
}

// Splits exactly `N` comma-separated fields; returns false on a count mismatch.
template <std::size_t N>
bool split_fields(std::string_view line, std::array<std::string_view, N>& out) noexcept {
  std::size_t field = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      if (field == N) return false;
      out[field++] = line.substr(start, i - start);
      start = i + 1;
    }
  }
  return field == N;
}

}  // namespace detail

/// Parses the tick CSV schema `stock_id,date,time,bid,ask` from an in-memory buffer.
///
/// Malformed rows are collected with their line numbers and skipped; parsing throws
/// ParseError on a header mismatch or when the malformed fraction exceeds the cap.
/// Output is stably sorted by (stock, date, time).
inline ParsedTicks parse_tick_buffer(std::string_view text, const ParseOptions& options = {}) {
  ParsedTicks out;
  if (text.empty()) return out;
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF)
    text.remove_prefix(3);

  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = detail::trim_cr(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  next_line(line);
  if (line != kTickCsvHeader)
    throw ParseError("tick file header mismatch: expected '" + std::string(kTickCsvHeader) +
                     "', got '" + std::string(line) + "'");

  out.ticks.reserve(text.size() / 36);
  std::array<std::string_view, 5> f;
  while (next_line(line)) {
    if (line.empty()) continue;
    ++out.rows;
    auto fail = [&](std::string msg) { out.errors.push_back({line_no, std::move(msg)}); };
    if (!detail::split_fields(line, f)) {
      fail("expected 5 fields");
      continue;
    }
    if (f[0].empty() || f[0].size() > StockId::kCapacity) {
      fail("bad stock_id");
      continue;
    }
    const auto date = parse_date(f[1]);
    if (!date) {
      fail("bad date '" + std::string(f[1]) + "'");
      continue;
    }
    const auto time = parse_time_of_day(f[2]);
    if (!time) {
      fail("bad time '" + std::string(f[2]) + "'");
      continue;
    }
    const auto bid = parse_price(f[3]);
    if (!bid) {
      fail("bad bid '" + std::string(f[3]) + "'");
      continue;
    }
    const auto ask = parse_price(f[4]);
    if (!ask) {
      fail("bad ask '" + std::string(f[4]) + "'");
      continue;
    }
    if (bid->milli <= 0 || ask->milli <= 0) {
      fail("non-positive price");
      continue;
    }
    out.ticks.push_back(QuoteTick{StockId(f[0]), Timestamp{*date, *time}, *ask, *bid});
  }

  if (out.rows > 0 &&
      static_cast<double>(out.errors.size()) > options.error_cap * static_cast<double>(out.rows))
    throw ParseError(std::to_string(out.errors.size()) + " of " + std::to_string(out.rows) +
                     " rows malformed (cap " + std::to_string(options.error_cap) +
                     "); first at line " + std::to_string(out.errors.front().line) + ": " +
                     out.errors.front().message);

  if (!std::is_sorted(out.ticks.begin(), out.ticks.end(), TickOrder{}))
    std::stable_sort(out.ticks.begin(), out.ticks.end(), TickOrder{});
  return out;
}

inline ParsedTicks parse_tick_file(std::istream& source, const ParseOptions& options = {}) {
  if (!source) throw ParseError("unreadable tick source");
  const std::string text{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  if (source.bad()) throw ParseError("read failure on tick source");
  return parse_tick_buffer(text, options);
}

inline ParsedTicks parse_tick_file(const std::filesystem::path& path,
                                   const ParseOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open tick file: " + path.string());
  try {
    return parse_tick_file(in, options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Writes ticks in the CSV schema accepted by parse_tick_file.
inline void write_tick_csv(std::ostream& out, std::span<const QuoteTick> ticks) {
  std::string buf;
  buf.reserve(1 << 16);
  buf.append(kTickCsvHeader).push_back('\n');
  for (const QuoteTick& t : ticks) {
    buf.append(t.stock_id.view()).push_back(',');
    buf.append(format_date(t.timestamp.date)).push_back(',');
    buf.append(format_time(t.timestamp.time)).push_back(',');
    buf.append(format_price(t.bid)).push_back(',');
    buf.append(format_price(t.ask)).push_back('\n');
    if (buf.size() > (1 << 16) - 128) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

/// Removal counts for one stock (or the whole input when aggregated).
///
/// Tick counts are conserved: input_ticks = crossed_quotes + low_frequency_ticks +
/// out_of_session + empty_interval_ticks + retained_ticks. Day counts likewise:
/// input_days = low_frequency_days + empty_interval_days + retained_days, where a day
/// emptied entirely by rule 1 counts as a low-frequency day.
struct CleanStats {
  std::size_t input_ticks = 0;
  std::size_t crossed_quotes = 0;
  std::size_t low_frequency_ticks = 0;
  std::size_t out_of_session = 0;
  std::size_t empty_interval_ticks = 0;
  std::size_t retained_ticks = 0;

  std::size_t input_days = 0;
  std::size_t low_frequency_days = 0;
  std::size_t empty_interval_days = 0;
  std::size_t retained_days = 0;

  CleanStats& operator+=(const CleanStats& o) noexcept {
    input_ticks += o.input_ticks;
    crossed_quotes += o.crossed_quotes;
    low_frequency_ticks += o.low_frequency_ticks;
    out_of_session += o.out_of_session;
    empty_interval_ticks += o.empty_interval_ticks;
    retained_ticks += o.retained_ticks;
    input_days += o.input_days;
    low_frequency_days += o.low_frequency_days;
    empty_interval_days += o.empty_interval_days;
    retained_days += o.retained_days;
    return *this;
  }

  std::size_t removed_ticks() const noexcept {
    return crossed_quotes + low_frequency_ticks + out_of_session + empty_interval_ticks;
  }

  friend bool operator==(const CleanStats&, const CleanStats&) = default;
};

struct CleanReport {
  std::size_t min_day_ticks = 0;
  CleanStats total;
  std::map<StockId, CleanStats> per_stock;

  CleanReport& operator+=(const CleanReport& o) {
    total += o.total;
    for (const auto& [id, stats] : o.per_stock) per_stock[id] += stats;
    return *this;
  }
};

struct CleanOptions {
  /// Rule 2 threshold: days with fewer in-session ticks than this are dropped.
  std::size_t min_day_ticks = 100;
};

struct CleanResult {
  std::vector<QuoteTick> retained;
  CleanReport report;
};

/// Applies the four cleaning rules in order to ticks grouped by (stock, day):
///  1. drop ticks with ask <= bid;
///  2. drop days whose in-session tick count is below `min_day_ticks`;
///  3. drop ticks outside the two continuous-auction sessions;
///  4. drop days where any coarse interval holds no tick.
/// Groups are identified by contiguous runs of equal (stock, date).
inline CleanResult clean_ticks(std::span<const QuoteTick> ticks, const SessionCalendar& cal = {},
                               const CleanOptions& options = {}) {
  cal.validate();
  CleanResult out;
  out.report.min_day_ticks = options.min_day_ticks;
  out.retained.reserve(ticks.size());

  const int intervals = cal.intervals_per_day();
  std::vector<int> interval_hits(static_cast<std::size_t>(intervals));
  std::vector<QuoteTick> day_kept;

  std::size_t begin = 0;
  while (begin < ticks.size()) {
    const StockId& stock = ticks[begin].stock_id;
    const Date date = ticks[begin].timestamp.date;
    std::size_t end = begin;
    while (end < ticks.size() && ticks[end].stock_id == stock &&
           ticks[end].timestamp.date == date)
      ++end;

    CleanStats day;
    day.input_ticks = end - begin;
    day.input_days = 1;
    day_kept.clear();
    std::fill(interval_hits.begin(), interval_hits.end(), 0);

    std::size_t uncrossed = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const QuoteTick& t = ticks[i];
      if (t.ask <= t.bid) {
        ++day.crossed_quotes;
        continue;
      }
      ++uncrossed;
      if (const auto bin = cal.bin_index(t.timestamp.time)) {
        day_kept.push_back(t);
        ++interval_hits[static_cast<std::size_t>(cal.interval_of_bin(*bin))];
      }
    }
    const std::size_t out_of_session = uncrossed - day_kept.size();

    if (day_kept.size() < options.min_day_ticks || day_kept.empty()) {
      day.low_frequency_ticks = uncrossed;
      day.low_frequency_days = 1;
    } else {
      day.out_of_session = out_of_session;
      const bool any_empty =
          std::any_of(interval_hits.begin(), interval_hits.end(), [](int n) { return n == 0; });
      if (any_empty) {
        day.empty_interval_ticks = day_kept.size();
        day.empty_interval_days = 1;
      } else {
        day.retained_ticks = day_kept.size();
        day.retained_days = 1;
        out.retained.insert(out.retained.end(), day_kept.begin(), day_kept.end());
      }
    }

    out.report.total += day;
    out.report.per_stock[stock] += day;
    begin = end;
  }
  return out;
}

/// Splits a (stock, date)-sorted tick vector into per-stock spans.
inline std::vector<std::span<const QuoteTick>> split_by_stock(std::span<const QuoteTick> ticks) {
  std::vector<std::span<const QuoteTick>> groups;
  std::size_t begin = 0;
  while (begin < ticks.size()) {
    std::size_t end = begin + 1;
    while (end < ticks.size() && ticks[end].stock_id == ticks[begin].stock_id) ++end;
    groups.push_back(ticks.subspan(begin, end - begin));
    begin = end;
  }
  return groups;
}

}  // namespace spreadlab

template <>
struct std::hash<spreadlab::StockId> {
  std::size_t operator()(const spreadlab::StockId& id) const noexcept {
    return std::hash<std::string_view>{}(id.view());
  }
};
