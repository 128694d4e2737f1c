#pragma once

// Stage orchestration: each stage reads upstream artifacts from the output tree,
// writes its own CSV/JSON artifacts plus a manifest, and reports per-stock soft
// failures without aborting the batch.
//
//   <out>/clean/     ticks/<stock>.csv, clean_report.json, parse_errors.json
//   <out>/spreads/   stocks/<stock>.csv, market.csv, days.json
//   <out>/lomb/      market_periodogram.csv, market_peaks.json, harmonics.csv,
//                    fundamental.json
//   <out>/intraday/  stocks/<stock>.csv, market.csv
//   <out>/fit/       fits.json, market_fit.json, excluded.json, loglog/<stock>.csv
//   <out>/dist/      report.json, histogram.csv
//   <out>/classify/  classification.json
//
// Every stage directory also holds manifest.json (parameters and SHA-256 digests of
// inputs and outputs) and config.ini (the effective configuration, usable with
// --config to rerun the stage).

#include <glob.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spreadlab/calendar.hpp"
#include "spreadlab/config.hpp"
#include "spreadlab/errors.hpp"
#include "spreadlab/io.hpp"
#include "spreadlab/market_data.hpp"
#include "spreadlab/parallel.hpp"
#include "spreadlab/scaling.hpp"
#include "spreadlab/spectral.hpp"
#include "spreadlab/spread.hpp"
#include "spreadlab/synth.hpp"

namespace spreadlab {

inline constexpr std::string_view kVersion = "0.1.0";

namespace fs = std::filesystem;

struct PipelineConfig {
  std::string input;  // glob, file or directory of tick CSVs
  fs::path output_dir = "spreadlab-out";
  unsigned jobs = 0;

  ParseOptions parse;
  CleanOptions clean;
  SessionCalendar calendar;

  std::string exchange = "market";
  AveragingMode stock_mode = AveragingMode::exclude_zeros;
  AveragingMode market_mode = AveragingMode::exclude_zeros;

  double oversample = 4.0;
  double hi_factor = 1.0;
  double m_independent = 0.0;  // 0: grid size / oversample
  int harmonics = 23;
  double window = 0.02;
  ZeroPolicy lomb_zeros = ZeroPolicy::omit;

  TauRange stock_range = kStockTauRange;
  TauRange market_range = kMarketTauRange;
  double t_quantile = 0.99995;
  int bins = 100;
  double level = 0.9999;
  int histogram_bins = 30;
  double theta_ref = 0.4;
  double theta_tolerance = 0.1;

  SynthConfig synth;

  static PipelineConfig from_config(const KeyValueConfig& kv) {
    PipelineConfig c;
    c.input = kv.get_or<std::string>("pipeline", "input", c.input);
    c.output_dir = kv.get_or<std::string>("pipeline", "output", c.output_dir.string());
    c.jobs = kv.get_or<unsigned>("pipeline", "jobs", c.jobs);

    c.clean.min_day_ticks = kv.get_or<std::size_t>("market-data", "min_day_ticks", c.clean.min_day_ticks);
    c.parse.error_cap = kv.get_or<double>("market-data", "error_cap", c.parse.error_cap);

    c.exchange = kv.get_or<std::string>("spread-core", "exchange", c.exchange);
    if (const auto m = kv.get<std::string>("spread-core", "averaging_mode")) c.stock_mode = parse_mode(*m);
    if (const auto m = kv.get<std::string>("spread-core", "market_averaging_mode")) c.market_mode = parse_mode(*m);

    c.oversample = kv.get_or<double>("spectral", "oversample", c.oversample);
    c.hi_factor = kv.get_or<double>("spectral", "hi_factor", c.hi_factor);
    c.m_independent = kv.get_or<double>("spectral", "m_independent", c.m_independent);
    c.harmonics = kv.get_or<int>("spectral", "harmonics", c.harmonics);
    c.window = kv.get_or<double>("spectral", "window", c.window);
    if (const auto z = kv.get<std::string>("spectral", "zero_policy")) {
      if (*z == "omit") c.lomb_zeros = ZeroPolicy::omit;
      else if (*z == "keep") c.lomb_zeros = ZeroPolicy::keep;
      else throw InvalidArgument("spectral.zero_policy must be omit or keep");
    }

    c.stock_range.min = kv.get_or<int>("scaling", "tau_min", c.stock_range.min);
    c.stock_range.max = kv.get_or<int>("scaling", "tau_max", c.stock_range.max);
    c.market_range.min = kv.get_or<int>("scaling", "market_tau_min", c.market_range.min);
    c.market_range.max = kv.get_or<int>("scaling", "market_tau_max", c.market_range.max);
    c.t_quantile = kv.get_or<double>("scaling", "t_quantile", c.t_quantile);
    c.bins = kv.get_or<int>("scaling", "bins", c.bins);
    c.level = kv.get_or<double>("scaling", "level", c.level);
    c.histogram_bins = kv.get_or<int>("scaling", "histogram_bins", c.histogram_bins);
    c.theta_ref = kv.get_or<double>("scaling", "theta_ref", c.theta_ref);
    c.theta_tolerance = kv.get_or<double>("scaling", "theta_tolerance", c.theta_tolerance);

    c.synth = SynthConfig::from_config(kv);
    return c;
  }

  static AveragingMode parse_mode(const std::string& s) {
    if (s == "include-zeros" || s == "include_zeros") return AveragingMode::include_zeros;
    if (s == "exclude-zeros" || s == "exclude_zeros") return AveragingMode::exclude_zeros;
    throw InvalidArgument("averaging mode must be include-zeros or exclude-zeros, got '" + s + "'");
  }

  static const char* mode_name(AveragingMode m) {
    return m == AveragingMode::include_zeros ? "include-zeros" : "exclude-zeros";
  }

  void validate() const {
    calendar.validate();
    const int bins_per_day = calendar.bins_per_day();
    auto check_range = [&](TauRange r, const char* what) {
      if (r.min < 1 || r.max > bins_per_day || r.max - r.min < 2)
        throw InvalidArgument(std::string(what) + " must satisfy 1 <= min, min + 2 <= max <= " +
                              std::to_string(bins_per_day));
    };
    check_range(stock_range, "scaling.tau_min/tau_max");
    check_range(market_range, "scaling.market_tau_min/market_tau_max");
    if (!(parse.error_cap >= 0.0 && parse.error_cap <= 1.0))
      throw InvalidArgument("market-data.error_cap must be in [0, 1]");
    if (!(oversample >= 1.0)) throw InvalidArgument("spectral.oversample must be >= 1");
    if (!(hi_factor > 0.0)) throw InvalidArgument("spectral.hi_factor must be positive");
    if (m_independent != 0.0 && !(m_independent >= 1.0))
      throw InvalidArgument("spectral.m_independent must be 0 (auto) or >= 1");
    if (harmonics < 1) throw InvalidArgument("spectral.harmonics must be >= 1");
    if (!(window > 0.0 && window < 0.5)) throw InvalidArgument("spectral.window must be in (0, 0.5)");
    if (!(t_quantile > 0.0 && t_quantile < 1.0)) throw InvalidArgument("scaling.t_quantile must be in (0, 1)");
    if (bins < 4) throw InvalidArgument("scaling.bins must be >= 4");
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("scaling.level must be in (0, 1)");
    if (histogram_bins < 1) throw InvalidArgument("scaling.histogram_bins must be >= 1");
    if (!(theta_tolerance >= 0.0)) throw InvalidArgument("scaling.theta_tolerance must be >= 0");
  }

  /// Effective configuration in the same INI form that from_config reads. The thread
  /// count is left out since it never changes an artifact.
  std::string to_ini() const {
    std::ostringstream o;
    auto d = [](double v) { return io::format_double(v); };
    o << "[pipeline]\ninput = " << input << "\noutput = " << output_dir.string()
      << "\n\n[market-data]\nmin_day_ticks = " << clean.min_day_ticks << "\nerror_cap = " << d(parse.error_cap)
      << "\n\n[spread-core]\nexchange = " << exchange << "\naveraging_mode = " << mode_name(stock_mode)
      << "\nmarket_averaging_mode = " << mode_name(market_mode)
      << "\n\n[spectral]\noversample = " << d(oversample) << "\nhi_factor = " << d(hi_factor)
      << "\nm_independent = " << d(m_independent) << "\nharmonics = " << harmonics << "\nwindow = " << d(window)
      << "\nzero_policy = " << (lomb_zeros == ZeroPolicy::omit ? "omit" : "keep")
      << "\n\n[scaling]\ntau_min = " << stock_range.min << "\ntau_max = " << stock_range.max
      << "\nmarket_tau_min = " << market_range.min << "\nmarket_tau_max = " << market_range.max
      << "\nt_quantile = " << d(t_quantile) << "\nbins = " << bins << "\nlevel = " << d(level)
      << "\nhistogram_bins = " << histogram_bins << "\ntheta_ref = " << d(theta_ref)
      << "\ntheta_tolerance = " << d(theta_tolerance)
      << "\n\n[synth]\nstocks = " << synth.stocks << "\ndays = " << synth.days << "\nbeta_mean = " << d(synth.beta_mean)
      << "\nbeta_sd = " << d(synth.beta_sd) << "\nbaseline = " << d(synth.baseline)
      << "\namplitude = " << d(synth.amplitude) << "\nreopen_offset = " << d(synth.reopen_offset)
      << "\nnoise = " << d(synth.noise) << "\nmean_gap = " << d(synth.mean_gap) << "\nseed = " << synth.seed
      << "\ncrossed_rate = " << d(synth.crossed_rate) << "\nsparse_day_rate = " << d(synth.sparse_day_rate)
      << "\nempty_interval_rate = " << d(synth.empty_interval_rate)
      << "\nsparse_day_ticks = " << synth.sparse_day_ticks << "\nstart_date = " << format_date(synth.start_date)
      << "\nfirst_code = " << synth.first_code << "\nbase_price = " << d(synth.base_price) << "\n";
    return o.str();
  }
};

struct SoftFailure {
  std::string stock_id;
  std::string message;
};

struct StageReport {
  std::string stage;
  std::vector<fs::path> outputs;
  std::vector<SoftFailure> soft_failures;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"clean", "spreads", "lomb", "intraday", "fit",
                                              "dist", "classify", "synth", "all"};
  return names;
}

/// Hex SHA-256 digest of a file.
inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact(path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest initialisation failed");
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Expands a glob pattern; a directory expands to its *.csv files. Results are sorted.
inline std::vector<fs::path> expand_input(const std::string& pattern) {
  if (pattern.empty()) throw InvalidArgument("no input given (--input or pipeline.input)");
  std::vector<fs::path> out;
  if (fs::is_directory(pattern)) {
    for (const auto& e : fs::directory_iterator(pattern))
      if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
  } else {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0)
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    globfree(&g);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw MissingArtifact(pattern);
  return out;
}

namespace detail {

inline bool safe_file_stem(std::string_view id) {
  return !id.empty() && id != "." && id != ".." &&
         std::all_of(id.begin(), id.end(), [](char c) {
           return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
         });
}

inline std::vector<fs::path> stage_files(const fs::path& dir, std::string_view ext) {
  if (!fs::is_directory(dir)) throw MissingArtifact(dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifact(p);
  return p;
}

class StageWriter {
 public:
  StageWriter(const PipelineConfig& cfg, std::string stage)
      : cfg_(cfg), dir_(cfg.output_dir / stage) {
    report_.stage = std::move(stage);
    fs::create_directories(dir_);
  }

  const fs::path& dir() const noexcept { return dir_; }

  void input(const fs::path& p) {
    std::lock_guard lock(mutex_);
    inputs_.push_back(p);
  }
  void text(const fs::path& rel, std::string_view content) {
    io::write_text(dir_ / rel, content);
    std::lock_guard lock(mutex_);
    report_.outputs.push_back(dir_ / rel);
  }
  void json(const fs::path& rel, const io::json& j) { text(rel, j.dump(2) + "\n"); }
  void soft_failure(std::string stock, std::string message) {
    std::lock_guard lock(mutex_);
    report_.soft_failures.push_back({std::move(stock), std::move(message)});
  }

  StageReport finish() {
    std::sort(inputs_.begin(), inputs_.end());
    std::sort(report_.outputs.begin(), report_.outputs.end());
    std::sort(report_.soft_failures.begin(), report_.soft_failures.end(),
              [](const auto& a, const auto& b) { return std::tie(a.stock_id, a.message) < std::tie(b.stock_id, b.message); });
    const std::string ini = cfg_.to_ini();
    io::write_text(dir_ / "config.ini", ini);

    io::json m;
    m["tool"] = "spreadlab";
    m["version"] = std::string(kVersion);
    m["stage"] = report_.stage;
    m["parameters"] = KeyValueConfig::from_string(ini).values();
    auto digest_list = [&](const std::vector<fs::path>& paths) {
      std::vector<std::string> digests(paths.size());
      parallel_for(paths.size(), cfg_.jobs, [&](std::size_t i) { digests[i] = sha256_file(paths[i]); });
      io::json arr = io::json::array();
      for (std::size_t i = 0; i < paths.size(); ++i)
        arr.push_back({{"path", relative_name(paths[i])}, {"sha256", digests[i]}});
      return arr;
    };
    m["inputs"] = digest_list(inputs_);
    m["outputs"] = digest_list(report_.outputs);
    io::json soft = io::json::array();
    for (const auto& f : report_.soft_failures) soft.push_back({{"stock_id", f.stock_id}, {"message", f.message}});
    m["soft_failures"] = soft;
    io::write_json(dir_ / "manifest.json", m);
    return report_;
  }

 private:
  std::string relative_name(const fs::path& p) const {
    const auto rel = p.lexically_relative(cfg_.output_dir);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
  }

  const PipelineConfig& cfg_;
  fs::path dir_;
  StageReport report_;
  std::vector<fs::path> inputs_;
  std::mutex mutex_;
};

inline std::string stock_file(const StockId& id, std::string_view ext = ".csv") {
  return id.str() + std::string(ext);
}

}  // namespace detail

// --- stages -----------------------------------------------------------------

inline StageReport run_clean(const PipelineConfig& cfg) {
  cfg.validate();
  const auto files = expand_input(cfg.input);
  detail::StageWriter w(cfg, "clean");

  std::vector<ParsedTicks> parsed(files.size());
  parallel_for(files.size(), cfg.jobs, [&](std::size_t i) {
    parsed[i] = parse_tick_file(files[i], cfg.parse);
  });
  for (const auto& f : files) w.input(f);

  io::json errors = io::json::array();
  for (std::size_t i = 0; i < files.size(); ++i)
    for (const auto& e : parsed[i].errors)
      errors.push_back({{"file", files[i].generic_string()}, {"line", e.line}, {"message", e.message}});

  // Per-stock work units; a stock spread over several files is merged and re-sorted.
  std::map<StockId, std::vector<std::span<const QuoteTick>>> pieces;
  for (const auto& p : parsed)
    for (auto group : split_by_stock(p.ticks)) pieces[group.front().stock_id].push_back(group);
  std::vector<StockId> stocks;
  for (const auto& [id, _] : pieces) {
    if (!detail::safe_file_stem(id.view()))
      throw InvalidArgument("stock id '" + id.str() + "' cannot be used as a file name");
    stocks.push_back(id);
  }

  std::vector<CleanReport> reports(stocks.size());
  fs::create_directories(w.dir() / "ticks");
  parallel_for(stocks.size(), cfg.jobs, [&](std::size_t i) {
    const auto& parts = pieces.at(stocks[i]);
    std::vector<QuoteTick> merged;
    std::span<const QuoteTick> ticks = parts.front();
    if (parts.size() > 1) {
      for (auto part : parts) merged.insert(merged.end(), part.begin(), part.end());
      std::stable_sort(merged.begin(), merged.end(), TickOrder{});
      ticks = merged;
    }
    auto result = clean_ticks(ticks, cfg.calendar, cfg.clean);
    std::ostringstream out;
    write_tick_csv(out, result.retained);
    w.text(fs::path("ticks") / detail::stock_file(stocks[i]), out.str());
    if (result.report.total.retained_days == 0)
      w.soft_failure(stocks[i].str(), "no trading day survived cleaning");
    reports[i] = std::move(result.report);
  });

  CleanReport total;
  total.min_day_ticks = cfg.clean.min_day_ticks;
  for (const auto& r : reports) total += r;
  w.json("clean_report.json", io::clean_report_json(total));
  w.json("parse_errors.json", errors);
  return w.finish();
}

inline StageReport run_spreads(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path src = cfg.output_dir / "clean" / "ticks";
  const auto files = detail::stage_files(src, ".csv");
  detail::StageWriter w(cfg, "spreads");

  std::vector<SpreadSeries> series(files.size());
  parallel_for(files.size(), cfg.jobs, [&](std::size_t i) {
    const auto parsed = parse_tick_file(files[i], ParseOptions{0.0});
    series[i] = build_spread_series(parsed.ticks, cfg.calendar);
    if (series[i].stock_id.empty()) series[i].stock_id = StockId(files[i].stem().string());
    w.input(files[i]);
  });
  std::erase_if(series, [&](const SpreadSeries& s) {
    if (!s.days.empty()) return false;
    w.soft_failure(s.stock_id.str(), "no retained trading days");
    return true;
  });
  if (series.empty()) throw DegenerateInput("spreads: no stock has any retained trading day");

  io::json days = io::json::object();
  days["stocks"] = io::json::object();
  parallel_for(series.size(), cfg.jobs, [&](std::size_t i) {
    w.text(fs::path("stocks") / detail::stock_file(series[i].stock_id), io::series_csv(series[i].values));
  });
  for (const auto& s : series) days["stocks"][s.stock_id.str()] = io::days_json(s.days);

  const auto all_days = union_days(series);
  std::vector<SpreadSeries> aligned(series.size());
  parallel_for(series.size(), cfg.jobs, [&](std::size_t i) { aligned[i] = align_to_days(series[i], all_days); });
  series.clear();
  series.shrink_to_fit();
  const MarketSeries market = market_average(aligned, cfg.exchange);
  days["market"] = io::days_json(market.days);
  days["exchange"] = cfg.exchange;
  w.text("market.csv", io::market_csv(market));
  w.json("days.json", days);
  return w.finish();
}

inline StageReport run_lomb(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path market_path = detail::require(cfg.output_dir / "spreads" / "market.csv");
  detail::StageWriter w(cfg, "lomb");
  w.input(market_path);
  const MarketSeries market = io::read_market_csv(market_path);
  const int bins_per_day = cfg.calendar.bins_per_day();

  const LombSamples samples = lomb_samples(market.values, cfg.lomb_zeros);
  const auto grid = default_freq_grid(samples.times.size(), static_cast<double>(market.values.size()),
                                      cfg.oversample, cfg.hi_factor);
  LombOptions opts;
  opts.threads = cfg.jobs;
  opts.m_independent = cfg.m_independent;
  const Periodogram pg = lomb_power(samples.times, samples.values, grid, opts);
  w.text("market_periodogram.csv", io::periodogram_csv(pg));

  const double f0_guess = 1.0 / bins_per_day;
  const int n_max = std::min(cfg.harmonics,
                             static_cast<int>(std::floor(pg.frequencies.back() / f0_guess + 1e-9)));
  const Peak top = highest_peak(pg);
  io::json summary = {{"highest_peak", {{"frequency", top.frequency}, {"power", top.power},
                                        {"p_value", top.p_value}, {"period", 1.0 / top.frequency}}},
                      {"n_samples", pg.n_samples},
                      {"grid_size", pg.size()},
                      {"m_independent", pg.m_independent}};

  PeakSet peaks;
  if (n_max >= 1) peaks = detect_harmonic_peaks(pg, f0_guess, n_max, cfg.window);
  else w.soft_failure(cfg.exchange, "frequency grid does not reach the daily frequency");
  w.json("market_peaks.json", io::peaks_json(peaks));

  const auto pts = harmonic_points(peaks);
  std::string harmonics_csv = "n,frequency\n";
  for (const auto& p : pts) {
    harmonics_csv += std::to_string(p.n) + ",";
    io::append_double(harmonics_csv, p.frequency);
    harmonics_csv += '\n';
  }
  w.text("harmonics.csv", harmonics_csv);
  if (pts.size() >= 2) {
    summary["through_origin"] = io::fundamental_json(estimate_fundamental(pts));
    if (pts.size() >= 3)
      summary["with_intercept"] = io::fundamental_json(estimate_fundamental(pts, FitModel::with_intercept));
  } else {
    w.soft_failure(cfg.exchange, "fewer than 2 harmonic peaks; fundamental frequency not estimated");
  }
  w.json("fundamental.json", summary);
  return w.finish();
}

inline StageReport run_intraday(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path spreads = cfg.output_dir / "spreads";
  const auto files = detail::stage_files(spreads / "stocks", ".csv");
  const fs::path market_path = detail::require(spreads / "market.csv");
  detail::StageWriter w(cfg, "intraday");
  const int bins_per_day = cfg.calendar.bins_per_day();

  parallel_for(files.size(), cfg.jobs, [&](std::size_t i) {
    w.input(files[i]);
    const auto values = io::read_series_csv(files[i]);
    try {
      const auto profile = intraday_average(values, cfg.stock_mode, bins_per_day);
      w.text(fs::path("stocks") / files[i].filename(), io::profile_csv(profile));
    } catch (const Error& e) {
      w.soft_failure(files[i].stem().string(), e.what());
    }
  });
  w.input(market_path);
  const auto market = io::read_market_csv(market_path);
  w.text("market.csv", io::profile_csv(intraday_average(market.values, cfg.market_mode, bins_per_day)));
  return w.finish();
}

inline StageReport run_fit(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path intraday = cfg.output_dir / "intraday";
  const auto files = detail::stage_files(intraday / "stocks", ".csv");
  const fs::path market_path = detail::require(intraday / "market.csv");
  detail::StageWriter w(cfg, "fit");

  std::vector<std::optional<PowerLawFit>> fits(files.size());
  std::vector<std::string> excluded(files.size());
  parallel_for(files.size(), cfg.jobs, [&](std::size_t i) {
    w.input(files[i]);
    const auto profile = io::read_profile_csv(files[i]);
    try {
      fits[i] = fit_power_law(profile, cfg.stock_range);
    } catch (const Error& e) {
      excluded[i] = e.what();
      w.soft_failure(files[i].stem().string(), e.what());
      return;
    }
    std::string ll = "tau,log_tau,log_value,log_fitted\n";
    for (int tau = cfg.stock_range.min; tau <= cfg.stock_range.max; ++tau) {
      const double lt = std::log(static_cast<double>(tau));
      ll += std::to_string(tau) + ",";
      io::append_double(ll, lt);
      ll += ',';
      io::append_double(ll, std::log(profile[static_cast<std::size_t>(tau - 1)]));
      ll += ',';
      io::append_double(ll, std::log(fits[i]->amplitude) - fits[i]->beta * lt);
      ll += '\n';
    }
    w.text(fs::path("loglog") / files[i].filename(), ll);
  });

  io::json arr = io::json::array();
  io::json excl = io::json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string id = files[i].stem().string();
    if (fits[i]) arr.push_back(io::fit_json(id, *fits[i]));
    else excl.push_back({{"stock_id", id}, {"reason", excluded[i]}});
  }
  w.json("fits.json", arr);
  w.json("excluded.json", excl);

  w.input(market_path);
  const auto market_profile = io::read_profile_csv(market_path);
  try {
    const PowerLawFit mfit = fit_power_law(market_profile, cfg.market_range);
    const TTestResult t = regression_t_test(mfit, cfg.t_quantile);
    io::json j = io::fit_json(cfg.exchange, mfit);
    j["t_abs"] = io::number_or_null(t.t_abs);
    j["t_critical"] = t.critical;
    j["t_quantile"] = cfg.t_quantile;
    j["reject_zero_slope"] = t.reject_zero_slope;
    w.json("market_fit.json", j);
  } catch (const Error& e) {
    w.soft_failure(cfg.exchange, e.what());
  }
  return w.finish();
}

inline std::vector<std::pair<std::string, double>> read_stock_betas(const fs::path& fits_path) {
  std::vector<std::pair<std::string, double>> betas;
  for (const auto& j : io::read_json(fits_path))
    betas.emplace_back(j.at("stock_id").get<std::string>(), j.at("beta").get<double>());
  return betas;
}

inline StageReport run_dist(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path fits_path = detail::require(cfg.output_dir / "fit" / "fits.json");
  detail::StageWriter w(cfg, "dist");
  w.input(fits_path);
  std::vector<double> betas;
  for (const auto& [id, beta] : read_stock_betas(fits_path)) betas.push_back(beta);

  io::json report = {{"n", betas.size()}, {"mu", nullptr}, {"sigma", nullptr}, {"skewness", nullptr},
                     {"kurtosis", nullptr}, {"chi2", nullptr}, {"dof", cfg.bins - 3}, {"critical", nullptr},
                     {"level", cfg.level}, {"verdict", "not tested"}};
  std::vector<HistogramBin> histogram;
  try {
    const Moments m = exponent_moments(betas);
    report["mu"] = m.mean;
    report["sigma"] = m.stddev;
    report["skewness"] = m.skewness;
    report["kurtosis"] = m.kurtosis;
    histogram = exponent_histogram(betas, cfg.histogram_bins);
    report = io::distribution_json(m, chi2_normality(betas, cfg.bins, cfg.level));
  } catch (const DegenerateInput& e) {
    report["error"] = e.what();
    w.soft_failure("", e.what());
  }
  w.json("report.json", report);
  w.text("histogram.csv", io::histogram_csv(histogram));
  return w.finish();
}

inline StageReport run_classify(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path fits_path = detail::require(cfg.output_dir / "fit" / "fits.json");
  const fs::path market_path = cfg.output_dir / "fit" / "market_fit.json";
  detail::StageWriter w(cfg, "classify");
  w.input(fits_path);
  io::json out;
  if (fs::exists(market_path)) {
    w.input(market_path);
    const auto j = io::read_json(market_path);
    out["market"] = io::classification_json(
        j.at("stock_id").get<std::string>(),
        classify_relaxation(j.at("beta").get<double>(), cfg.theta_ref, cfg.theta_tolerance));
  } else {
    out["market"] = nullptr;
  }
  io::json stocks = io::json::array();
  for (const auto& [id, beta] : read_stock_betas(fits_path))
    stocks.push_back(io::classification_json(id, classify_relaxation(beta, cfg.theta_ref, cfg.theta_tolerance)));
  out["stocks"] = stocks;
  w.json("classification.json", out);
  return w.finish();
}

/// Writes a synthetic tick corpus into the output directory.
inline StageReport run_synth(const PipelineConfig& cfg) {
  cfg.synth.validate();
  fs::create_directories(cfg.output_dir);
  StageReport report;
  report.stage = "synth";
  report.outputs = gen_quote_stream(cfg.synth, cfg.output_dir, cfg.jobs, cfg.calendar);
  io::json m;
  m["tool"] = "spreadlab";
  m["version"] = std::string(kVersion);
  m["stage"] = "synth";
  m["parameters"] = KeyValueConfig::from_string(cfg.to_ini()).values();
  io::json outs = io::json::array();
  for (const auto& p : report.outputs)
    outs.push_back({{"path", p.filename().generic_string()}, {"sha256", sha256_file(p)}});
  m["outputs"] = outs;
  io::write_json(cfg.output_dir / "synth_manifest.json", m);
  return report;
}

inline StageReport run_stage(std::string_view name, const PipelineConfig& cfg) {
  if (name == "clean") return run_clean(cfg);
  if (name == "spreads") return run_spreads(cfg);
  if (name == "lomb") return run_lomb(cfg);
  if (name == "intraday") return run_intraday(cfg);
  if (name == "fit") return run_fit(cfg);
  if (name == "dist") return run_dist(cfg);
  if (name == "classify") return run_classify(cfg);
  if (name == "synth") return run_synth(cfg);
  throw InvalidArgument("unknown stage '" + std::string(name) + "'");
}

/// clean -> spreads -> lomb -> intraday -> fit -> dist -> classify.
inline std::vector<StageReport> run_all(const PipelineConfig& cfg) {
  std::vector<StageReport> reports;
  for (const char* stage : {"clean", "spreads", "lomb", "intraday", "fit", "dist", "classify"})
    reports.push_back(run_stage(stage, cfg));
  return reports;
}

}  // namespace spreadlab
