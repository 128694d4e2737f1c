#pragma once

// CSV/JSON encodings of pipeline artifacts. Doubles are written in shortest
// round-trip form, so reading an artifact back reproduces the in-memory values.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spreadlab/errors.hpp"
#include "spreadlab/market_data.hpp"
#include "spreadlab/scaling.hpp"
#include "spreadlab/spectral.hpp"
#include "spreadlab/spread.hpp"

namespace spreadlab::io {

using nlohmann::json;

inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Splits a CSV text into rows of fields after checking the header.
class CsvReader {
 public:
  CsvReader(std::string text, std::string_view expected_header, std::string name)
      : text_(std::move(text)), name_(std::move(name)) {
    std::string_view header;
    if (!next_line(header) || header != expected_header)
      throw ParseError(name_ + ": expected header '" + std::string(expected_header) + "'");
  }

  template <std::size_t N>
  bool next(std::array<std::string_view, N>& fields) {
    std::string_view line;
    while (next_line(line))
      if (!line.empty()) {
        if (!detail::split_fields(line, fields))
          throw ParseError(name_ + ": line " + std::to_string(line_) + " has the wrong field count");
        return true;
      }
    return false;
  }

  template <class T>
  T number(std::string_view field) const {
    T value{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
      throw ParseError(name_ + ": line " + std::to_string(line_) + ": bad number '" +
                       std::string(field) + "'");
    return value;
  }

 private:
  bool next_line(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string::npos) end = text_.size();
    line = detail::trim_cr(std::string_view(text_).substr(pos_, end - pos_));
    pos_ = end + 1;
    ++line_;
    return true;
  }

  std::string text_;
  std::string name_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

// --- series -----------------------------------------------------------------

/// `index,value`, index 1-based.
inline std::string series_csv(std::span<const double> values) {
  std::string out = "index,value\n";
  out.reserve(values.size() * 12);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    append_double(out, values[i]);
    out += '\n';
  }
  return out;
}

inline std::vector<double> read_series_csv(const std::filesystem::path& path) {
  CsvReader csv(read_text(path), "index,value", path.string());
  std::vector<double> values;
  std::array<std::string_view, 2> f;
  while (csv.next(f)) {
    if (csv.number<std::size_t>(f[0]) != values.size() + 1)
      throw ParseError(path.string() + ": indices must run 1, 2, ...");
    values.push_back(csv.number<double>(f[1]));
  }
  return values;
}

/// `index,value,n_stocks`.
inline std::string market_csv(const MarketSeries& m) {
  std::string out = "index,value,n_stocks\n";
  out.reserve(m.values.size() * 16);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    append_double(out, m.values[i]);
    out += ',';
    out += std::to_string(m.n_stocks[i]);
    out += '\n';
  }
  return out;
}

inline MarketSeries read_market_csv(const std::filesystem::path& path) {
  CsvReader csv(read_text(path), "index,value,n_stocks", path.string());
  MarketSeries m;
  std::array<std::string_view, 3> f;
  while (csv.next(f)) {
    if (csv.number<std::size_t>(f[0]) != m.values.size() + 1)
      throw ParseError(path.string() + ": indices must run 1, 2, ...");
    m.values.push_back(csv.number<double>(f[1]));
    m.n_stocks.push_back(csv.number<std::uint32_t>(f[2]));
  }
  return m;
}

/// `tau,value`.
inline std::string profile_csv(const IntradayProfile& p) {
  std::string out = "tau,value\n";
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    append_double(out, p.values[i]);
    out += '\n';
  }
  return out;
}

inline std::vector<double> read_profile_csv(const std::filesystem::path& path) {
  CsvReader csv(read_text(path), "tau,value", path.string());
  std::vector<double> values;
  std::array<std::string_view, 2> f;
  while (csv.next(f)) {
    if (csv.number<std::size_t>(f[0]) != values.size() + 1)
      throw ParseError(path.string() + ": tau must run 1, 2, ...");
    values.push_back(csv.number<double>(f[1]));
  }
  return values;
}

inline json days_json(std::span<const Date> days) {
  json arr = json::array();
  for (Date d : days) arr.push_back(format_date(d));
  return arr;
}

inline std::vector<Date> days_from_json(const json& arr) {
  std::vector<Date> days;
  for (const auto& v : arr) {
    const auto d = parse_date(v.get<std::string>());
    if (!d) throw ParseError("bad date in day list: " + v.get<std::string>());
    days.push_back(*d);
  }
  return days;
}

// --- spectral ---------------------------------------------------------------

/// `frequency,power`.
inline std::string periodogram_csv(const Periodogram& pg) {
  std::string out = "frequency,power\n";
  out.reserve(pg.size() * 28);
  for (std::size_t k = 0; k < pg.size(); ++k) {
    append_double(out, pg.frequencies[k]);
    out += ',';
    append_double(out, pg.powers[k]);
    out += '\n';
  }
  return out;
}

inline json peaks_json(const PeakSet& set) {
  json arr = json::array();
  for (const Peak& p : set.peaks)
    arr.push_back({{"n", p.harmonic}, {"frequency", p.frequency}, {"power", p.power},
                   {"p_value", p.p_value}});
  return arr;
}

inline json fundamental_json(const FundamentalFit& fit) {
  return {{"f0", fit.f0},
          {"stderr", fit.standard_error},
          {"harmonics", fit.harmonics},
          {"model", fit.model == FitModel::through_origin ? "through_origin" : "with_intercept"},
          {"intercept", fit.intercept},
          {"residuals", fit.residuals}};
}

// --- scaling ----------------------------------------------------------------

/// Infinite t statistics (exact fits) are stored as null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json fit_json(std::string_view stock_id, const PowerLawFit& fit) {
  return {{"stock_id", std::string(stock_id)},
          {"beta", fit.beta},
          {"stderr", fit.beta_stderr},
          {"t_stat", number_or_null(fit.t_statistic)},
          {"dof", fit.dof},
          {"tau_min", fit.range.min},
          {"tau_max", fit.range.max},
          {"amplitude", fit.amplitude}};
}

inline PowerLawFit fit_from_json(const json& j) {
  PowerLawFit fit;
  fit.beta = j.at("beta").get<double>();
  fit.beta_stderr = j.at("stderr").get<double>();
  fit.t_statistic = j.at("t_stat").is_null()
                        ? std::copysign(std::numeric_limits<double>::infinity(), fit.beta)
                        : j.at("t_stat").get<double>();
  fit.dof = j.at("dof").get<int>();
  fit.range = {j.at("tau_min").get<int>(), j.at("tau_max").get<int>()};
  fit.amplitude = j.at("amplitude").get<double>();
  return fit;
}

inline json distribution_json(const Moments& m, const Chi2Result& chi2) {
  return {{"n", chi2.n},
          {"mu", m.mean},
          {"sigma", m.stddev},
          {"skewness", m.skewness},
          {"kurtosis", m.kurtosis},
          {"chi2", chi2.chi2},
          {"dof", chi2.dof},
          {"critical", chi2.critical},
          {"level", chi2.level},
          {"verdict", chi2.rejected ? "rejected" : "not rejected"}};
}

/// `bin_center,count,fitted_normal_density`.
inline std::string histogram_csv(std::span<const HistogramBin> bins) {
  std::string out = "bin_center,count,fitted_normal_density\n";
  for (const auto& b : bins) {
    append_double(out, b.center);
    out += ',';
    out += std::to_string(b.count);
    out += ',';
    append_double(out, b.fitted_density);
    out += '\n';
  }
  return out;
}

inline json classification_json(std::string_view id, const RelaxationClass& c) {
  return {{"id", std::string(id)},
          {"beta", c.beta},
          {"theta_endogenous", c.theta_endogenous},
          {"theta_exogenous", c.theta_exogenous},
          {"label", to_string(c.label)},
          {"theta_reference", c.theta_reference},
          {"tolerance", c.tolerance}};
}

// --- market data ------------------------------------------------------------

inline json clean_stats_json(const CleanStats& s) {
  return {{"input_ticks", s.input_ticks},
          {"crossed_quotes", s.crossed_quotes},
          {"low_frequency_ticks", s.low_frequency_ticks},
          {"out_of_session", s.out_of_session},
          {"empty_interval_ticks", s.empty_interval_ticks},
          {"retained_ticks", s.retained_ticks},
          {"input_days", s.input_days},
          {"low_frequency_days", s.low_frequency_days},
          {"empty_interval_days", s.empty_interval_days},
          {"retained_days", s.retained_days}};
}

inline json clean_report_json(const CleanReport& r) {
  json per_stock = json::object();
  for (const auto& [id, stats] : r.per_stock) per_stock[id.str()] = clean_stats_json(stats);
  return {{"min_day_ticks", r.min_day_ticks}, {"total", clean_stats_json(r.total)},
          {"per_stock", per_stock}};
}

}  // namespace spreadlab::io
