#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "spreadlab/io.hpp"
#include "spreadlab/market_data.hpp"
#include "spreadlab/synth.hpp"

using namespace spreadlab;

namespace {

TimeOfDay tod(const char* s) { return *parse_time_of_day(s); }

QuoteTick tick(const char* stock, const char* date, const char* time, const char* bid, const char* ask) {
  return {StockId(stock), Timestamp{*parse_date(date), tod(time)}, *parse_price(ask), *parse_price(bid)};
}

std::string csv_of(std::span<const QuoteTick> ticks) {
  std::ostringstream out;
  write_tick_csv(out, ticks);
  return out.str();
}

}  // namespace

// --- calendar ---------------------------------------------------------------

TEST(Calendar, BinIndexExamples) {
  EXPECT_EQ(bin_index(tod("09:30:00")), 1);
  EXPECT_EQ(bin_index(tod("09:30:29")), 1);
  EXPECT_EQ(bin_index(tod("09:30:30")), 2);
  EXPECT_EQ(bin_index(tod("13:00:00")), 241);
  EXPECT_EQ(bin_index(tod("11:29:59")), 240);
  EXPECT_EQ(bin_index(tod("11:30:00")), 240);
  EXPECT_EQ(bin_index(tod("15:00:00")), 480);
  EXPECT_FALSE(bin_index(tod("12:15:00")));
  EXPECT_FALSE(bin_index(tod("09:29:59")));
  EXPECT_FALSE(bin_index(tod("11:30:01")));
  EXPECT_FALSE(bin_index(tod("12:59:59")));
  EXPECT_FALSE(bin_index(tod("15:00:01")));
}

TEST(Calendar, BinIndexMatchesScanOverWholeDay) {
  std::vector<int> per_bin(481, 0);
  std::optional<int> prev;
  for (int s = 0; s < 24 * 3600; ++s) {
    const auto got = bin_index(TimeOfDay{s});
    ASSERT_EQ(got, oracle::bin_by_scan(s)) << s;
    if (got) {
      if (prev) {
        EXPECT_GE(*got, *prev);
      }
      prev = got;
      ++per_bin[static_cast<std::size_t>(*got)];
    }
  }
  int distinct = 0;
  for (int b = 1; b <= 480; ++b) {
    distinct += per_bin[static_cast<std::size_t>(b)] > 0;
    // 30 seconds each, plus the close instant in the last bin of each session
    EXPECT_EQ(per_bin[static_cast<std::size_t>(b)], (b == 240 || b == 480) ? 31 : 30) << b;
  }
  EXPECT_EQ(distinct, 480);
}

TEST(Calendar, Geometry) {
  const SessionCalendar cal;
  EXPECT_EQ(cal.bins_per_day(), 480);
  EXPECT_EQ(cal.morning_bins(), 240);
  EXPECT_EQ(cal.intervals_per_day(), 8);
  EXPECT_EQ(cal.interval_of_bin(1), 0);
  EXPECT_EQ(cal.interval_of_bin(60), 0);
  EXPECT_EQ(cal.interval_of_bin(61), 1);
  EXPECT_EQ(cal.interval_of_bin(241), 4);
  EXPECT_EQ(cal.interval_of_bin(480), 7);
  SessionCalendar bad;
  bad.bin_seconds = 7;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Calendar, ParseAndFormat) {
  EXPECT_EQ(format_time(tod("09:31:05")), "09:31:05");
  EXPECT_EQ(format_date(*parse_date("2005-01-04")), "2005-01-04");
  EXPECT_FALSE(parse_date("2005-02-30"));
  EXPECT_FALSE(parse_date("2005-1-04"));
  EXPECT_FALSE(parse_time_of_day("24:00:00"));
  EXPECT_FALSE(parse_time_of_day("9:31:05"));
  EXPECT_FALSE(parse_time_of_day("09:61:05"));
}

// --- parsing ----------------------------------------------------------------

TEST(Parse, FieldMapping) {
  const auto p = parse_tick_buffer("stock_id,date,time,bid,ask\n600100,2005-01-04,09:31:05,10.52,10.55\n");
  ASSERT_EQ(p.ticks.size(), 1u);
  EXPECT_TRUE(p.errors.empty());
  const QuoteTick& t = p.ticks[0];
  EXPECT_EQ(t.stock_id.view(), "600100");
  EXPECT_EQ(t.timestamp.date, *parse_date("2005-01-04"));
  EXPECT_EQ(t.timestamp.time.seconds, 9 * 3600 + 31 * 60 + 5);
  EXPECT_EQ(t.ask.milli, 10550);
  EXPECT_EQ(t.bid.milli, 10520);
}

TEST(Parse, EmptyFileAndHeaderOnly) {
  auto p = parse_tick_buffer("");
  EXPECT_TRUE(p.ticks.empty());
  EXPECT_TRUE(p.errors.empty());
  p = parse_tick_buffer("stock_id,date,time,bid,ask\r\n");
  EXPECT_TRUE(p.ticks.empty());
  EXPECT_TRUE(p.errors.empty());
}

TEST(Parse, HeaderMismatchIsFatal) {
  EXPECT_THROW(parse_tick_buffer("id,date,time,bid,ask\n600100,2005-01-04,09:31:05,10.52,10.55\n"),
               ParseError);
}

TEST(Parse, MalformedRowsAreCollectedWithLineNumbers) {
  std::string text = "stock_id,date,time,bid,ask\n";
  for (int i = 0; i < 30; ++i) text += "600100,2005-01-04,09:31:05,10.52,10.55\n";
  text += "600100,2005-01-04,09:31:06,abc,10.55\n";
  const auto p = parse_tick_buffer(text);
  EXPECT_EQ(p.ticks.size(), 30u);
  ASSERT_EQ(p.errors.size(), 1u);
  EXPECT_EQ(p.errors[0].line, 32u);
  EXPECT_NE(p.errors[0].message.find("abc"), std::string::npos);
}

TEST(Parse, ErrorCapIsEnforced) {
  const std::string text =
      "stock_id,date,time,bid,ask\n600100,2005-01-04,09:31:05,10.52,10.55\n"
      "600100,2005-01-04,09:31:06,10.52,x\n";
  EXPECT_THROW(parse_tick_buffer(text), ParseError);
  EXPECT_EQ(parse_tick_buffer(text, ParseOptions{0.5}).errors.size(), 1u);
}

TEST(Parse, RejectsBadPrices) {
  const std::string text =
      "stock_id,date,time,bid,ask\n600100,2005-01-04,09:31:05,10.5234,10.55\n"
      "600100,2005-01-04,09:31:05,0,10.55\n600100,2005-01-04,09:31:05,-1,10.55\n";
  EXPECT_EQ(parse_tick_buffer(text, ParseOptions{1.0}).errors.size(), 3u);
}

TEST(Parse, SortsPerStockAndDayStably) {
  const auto p = parse_tick_buffer(
      "stock_id,date,time,bid,ask\n"
      "600200,2005-01-04,09:31:00,1.00,1.01\n"
      "600100,2005-01-05,09:31:00,2.00,2.01\n"
      "600100,2005-01-04,10:00:00,3.00,3.01\n"
      "600100,2005-01-04,09:31:00,4.00,4.01\n"
      "600100,2005-01-04,09:31:00,5.00,5.01\n");
  ASSERT_EQ(p.ticks.size(), 5u);
  std::vector<std::int64_t> bids;
  for (const auto& t : p.ticks) bids.push_back(t.bid.milli);
  EXPECT_EQ(bids, (std::vector<std::int64_t>{4000, 5000, 3000, 2000, 1000}));
}

TEST(Parse, WriterRoundTrip) {
  SynthConfig cfg;
  cfg.stocks = 1;
  cfg.days = 2;
  cfg.crossed_rate = 0.05;
  const auto ticks = generate_stock_ticks(cfg, 0);
  const auto back = parse_tick_buffer(csv_of(ticks), ParseOptions{0.0});
  EXPECT_EQ(back.ticks, ticks);
}

// --- cleaning ---------------------------------------------------------------

TEST(Clean, ExamplesFromEachRule) {
  std::vector<QuoteTick> day;
  for (const char* start : {"09:31", "10:01", "10:31", "11:01", "13:01", "13:31", "14:01", "14:31"})
    for (int k = 0; k < 3; ++k) {
      const std::string t = std::string(start) + ":0" + std::to_string(k);
      day.push_back(tick("600100", "2005-01-04", t.c_str(), "10.00", "10.02"));
    }
  const CleanOptions opt{10};

  auto with_extra = [&](QuoteTick extra) {
    auto v = day;
    v.push_back(extra);
    std::stable_sort(v.begin(), v.end(), TickOrder{});
    return clean_ticks(v, {}, opt);
  };

  auto r = with_extra(tick("600100", "2005-01-04", "09:20:00", "10.00", "10.02"));
  EXPECT_EQ(r.report.total.out_of_session, 1u);
  EXPECT_EQ(r.retained, day);

  r = with_extra(tick("600100", "2005-01-04", "09:40:00", "10.00", "10.00"));
  EXPECT_EQ(r.report.total.crossed_quotes, 1u);
  EXPECT_EQ(r.retained, day);

  std::vector<QuoteTick> seven;
  for (const auto& t : day)
    if (t.timestamp.time.seconds < 14 * 3600 + 30 * 60) seven.push_back(t);
  r = clean_ticks(seven, {}, opt);
  EXPECT_TRUE(r.retained.empty());
  EXPECT_EQ(r.report.total.empty_interval_days, 1u);
  EXPECT_EQ(r.report.total.empty_interval_ticks, seven.size());

  r = clean_ticks(std::span(day).first(9), {}, opt);
  EXPECT_EQ(r.report.total.low_frequency_days, 1u);
}

class CleanFixture : public ::testing::TestWithParam<std::string> {};

TEST_P(CleanFixture, RetainedRowsAndReportMatch) {
  const std::filesystem::path dir = SPREADLAB_FIXTURE_DIR;
  const auto parsed = parse_tick_file(dir / (GetParam() + ".csv"), ParseOptions{0.0});
  const auto result = clean_ticks(parsed.ticks, {}, CleanOptions{16});
  EXPECT_EQ(csv_of(result.retained), io::read_text(dir / (GetParam() + ".expected.csv")));
  EXPECT_EQ(io::clean_report_json(result.report), io::read_json(dir / (GetParam() + ".expected.json")));
}

INSTANTIATE_TEST_SUITE_P(Fixtures, CleanFixture,
                         ::testing::Values("rule1_crossed", "rule2_low_frequency", "rule3_out_of_session",
                                           "rule4_empty_interval", "combined"));

namespace {

std::vector<QuoteTick> dirty_corpus(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.stocks = 3;
  cfg.days = 6;
  cfg.seed = seed;
  cfg.mean_gap = 30;
  cfg.crossed_rate = 0.05;
  cfg.sparse_day_rate = 0.2;
  cfg.empty_interval_rate = 0.2;
  std::vector<QuoteTick> all;
  for (std::size_t s = 0; s < cfg.stocks; ++s) {
    auto t = generate_stock_ticks(cfg, s);
    all.insert(all.end(), t.begin(), t.end());
  }
  // sprinkle out-of-session ticks
  std::mt19937_64 rng(seed);
  const std::size_t n = all.size();
  for (std::size_t i = 0; i < n; i += 97) {
    QuoteTick t = all[i];
    t.timestamp.time = TimeOfDay{static_cast<int>(12 * 3600 + rng() % 1800)};
    all.push_back(t);
  }
  std::stable_sort(all.begin(), all.end(), TickOrder{});
  return all;
}

}  // namespace

TEST(Clean, ConservationIdempotenceAndUncrossedOutput) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ticks = dirty_corpus(seed);
    const auto once = clean_ticks(ticks);
    const auto& tot = once.report.total;
    EXPECT_EQ(tot.input_ticks, ticks.size());
    EXPECT_EQ(tot.removed_ticks() + tot.retained_ticks, tot.input_ticks);
    EXPECT_EQ(tot.retained_ticks, once.retained.size());
    EXPECT_EQ(tot.low_frequency_days + tot.empty_interval_days + tot.retained_days, tot.input_days);
    EXPECT_GT(tot.crossed_quotes, 0u);
    EXPECT_GT(tot.out_of_session, 0u);
    EXPECT_GT(tot.low_frequency_days, 0u);
    EXPECT_GT(tot.empty_interval_days, 0u);
    for (const auto& [id, s] : once.report.per_stock)
      EXPECT_EQ(s.removed_ticks() + s.retained_ticks, s.input_ticks) << id.str();
    for (const auto& t : once.retained) ASSERT_GT(t.ask, t.bid);

    const auto twice = clean_ticks(once.retained);
    EXPECT_EQ(twice.retained, once.retained);
    EXPECT_EQ(twice.report.total.removed_ticks(), 0u);
  }
}

TEST(Clean, CrossedRateMatchesBinomialExpectation) {
  double removed = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    SynthConfig cfg;
    cfg.stocks = 1;
    cfg.days = 1;
    cfg.seed = seed;
    cfg.crossed_rate = 0.01;
    const auto ticks = generate_stock_ticks(cfg, 0);
    const auto r = clean_ticks(ticks);
    removed += static_cast<double>(r.report.total.crossed_quotes);
    total += static_cast<double>(ticks.size());
  }
  EXPECT_NEAR(removed / total, 0.01, 0.003);
}

TEST(Clean, DuplicateTimestampsAreKept) {
  std::vector<QuoteTick> v;
  for (const char* start : {"09:31", "10:01", "10:31", "11:01", "13:01", "13:31", "14:01", "14:31"})
    for (int k = 0; k < 2; ++k) v.push_back(tick("1", "2005-01-04", (std::string(start) + ":00").c_str(), "1.00", "1.01"));
  EXPECT_EQ(clean_ticks(v, {}, CleanOptions{16}).retained.size(), 16u);
}
