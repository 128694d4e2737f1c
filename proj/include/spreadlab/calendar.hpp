#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "spreadlab/errors.hpp"

namespace spreadlab {

using Date = std::chrono::sys_days;

/// Seconds since midnight, 1-second resolution.
struct TimeOfDay {
  std::int32_t seconds = 0;

  static constexpr TimeOfDay hms(int h, int m, int s) noexcept {
    return TimeOfDay{h * 3600 + m * 60 + s};
  }

  constexpr auto operator<=>(const TimeOfDay&) const = default;
};

namespace detail {

template <class Int>
constexpr bool parse_fixed_digits(std::string_view text, Int& out) noexcept {
  Int value = 0;
  if (text.empty()) return false;
  for (char c : text) {
    if (c < '0' || c > '9') return false;
    value = static_cast<Int>(value * 10 + (c - '0'));
  }
  out = value;
  return true;
}

}  // namespace detail

/// Parses `HH:MM:SS`.
constexpr std::optional<TimeOfDay> parse_time_of_day(std::string_view text) noexcept {
  if (text.size() != 8 || text[2] != ':' || text[5] != ':') return std::nullopt;
  int h = 0, m = 0, s = 0;
  if (!detail::parse_fixed_digits(text.substr(0, 2), h) ||
      !detail::parse_fixed_digits(text.substr(3, 2), m) ||
      !detail::parse_fixed_digits(text.substr(6, 2), s))
    return std::nullopt;
  if (h > 23 || m > 59 || s > 59) return std::nullopt;
  return TimeOfDay::hms(h, m, s);
}

/// Parses `YYYY-MM-DD`, rejecting impossible calendar dates.
inline std::optional<Date> parse_date(std::string_view text) noexcept {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  if (!detail::parse_fixed_digits(text.substr(0, 4), y) ||
      !detail::parse_fixed_digits(text.substr(5, 2), m) ||
      !detail::parse_fixed_digits(text.substr(8, 2), d))
    return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

inline std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::string format_time(TimeOfDay t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", t.seconds / 3600, t.seconds / 60 % 60,
                t.seconds % 60);
  return buf;
}

/// Two-session trading day (continuous double auction) divided into fixed-length bins.
///
/// Defaults describe the Shanghai/Shenzhen A-share day: 09:30-11:30 and 13:00-15:00,
/// 30-second bins (480 per day) and eight 30-minute coarse intervals. The closing
/// instant of each session belongs to that session's last bin.
struct SessionCalendar {
  TimeOfDay morning_open = TimeOfDay::hms(9, 30, 0);
  TimeOfDay morning_close = TimeOfDay::hms(11, 30, 0);
  TimeOfDay afternoon_open = TimeOfDay::hms(13, 0, 0);
  TimeOfDay afternoon_close = TimeOfDay::hms(15, 0, 0);
  int bin_seconds = 30;
  int interval_seconds = 30 * 60;

  constexpr int morning_seconds() const noexcept {
    return morning_close.seconds - morning_open.seconds;
  }
  constexpr int afternoon_seconds() const noexcept {
    return afternoon_close.seconds - afternoon_open.seconds;
  }
  constexpr int morning_bins() const noexcept { return morning_seconds() / bin_seconds; }
  constexpr int bins_per_day() const noexcept {
    return (morning_seconds() + afternoon_seconds()) / bin_seconds;
  }
  constexpr int bins_per_interval() const noexcept { return interval_seconds / bin_seconds; }
  constexpr int intervals_per_day() const noexcept {
    return (morning_seconds() + afternoon_seconds()) / interval_seconds;
  }

  /// Throws InvalidArgument unless both sessions tile exactly into bins and intervals.
  void validate() const {
    if (bin_seconds <= 0 || interval_seconds <= 0)
      throw InvalidArgument("calendar: bin and interval lengths must be positive");
    if (morning_seconds() <= 0 || afternoon_seconds() <= 0 ||
        afternoon_open.seconds < morning_close.seconds)
      throw InvalidArgument("calendar: sessions must be non-empty and ordered");
    if (morning_seconds() % bin_seconds != 0 || afternoon_seconds() % bin_seconds != 0)
      throw InvalidArgument("calendar: sessions must hold a whole number of bins");
    if (interval_seconds % bin_seconds != 0 || morning_seconds() % interval_seconds != 0 ||
        afternoon_seconds() % interval_seconds != 0)
      throw InvalidArgument("calendar: intervals must tile both sessions");
  }

  /// 1-based bin index, or nullopt outside both sessions.
  constexpr std::optional<int> bin_index(TimeOfDay t) const noexcept {
    const int s = t.seconds;
    if (s >= morning_open.seconds && s <= morning_close.seconds) {
      if (s == morning_close.seconds) return morning_bins();
      return (s - morning_open.seconds) / bin_seconds + 1;
    }
    if (s >= afternoon_open.seconds && s <= afternoon_close.seconds) {
      if (s == afternoon_close.seconds) return bins_per_day();
      return morning_bins() + (s - afternoon_open.seconds) / bin_seconds + 1;
    }
    return std::nullopt;
  }

  constexpr bool in_session(TimeOfDay t) const noexcept { return bin_index(t).has_value(); }

  /// 0-based coarse interval holding a 1-based bin.
  constexpr int interval_of_bin(int bin) const noexcept {
    return (bin - 1) / bins_per_interval();
  }
};

inline constexpr int kBinsPerDay = SessionCalendar{}.bins_per_day();
static_assert(kBinsPerDay == 480);
static_assert(SessionCalendar{}.intervals_per_day() == 8);

constexpr std::optional<int> bin_index(TimeOfDay t, const SessionCalendar& cal = {}) noexcept {
  return cal.bin_index(t);
}

}  // namespace spreadlab
