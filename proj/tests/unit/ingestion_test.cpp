#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "apidrift/error.hpp"
#include "apidrift/format.hpp"
#include "apidrift/ingestion.hpp"
#include "paper_data.hpp"

namespace apidrift {
namespace {

std::vector<CallRecord> parse(const std::string& text, LogFormat format = LogFormat::Jsonl) {
  std::istringstream in(text);
  return parse_log(in, format);
}

TEST(LogReader, MinimalJsonlRecord) {
  auto recs = parse(R"({"ts":1,"api":"frontend"})" "\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].api, "frontend");
  EXPECT_FALSE(recs[0].parent);
  EXPECT_EQ(recs[0].ts, 1.0);
}

TEST(LogReader, NullAndEmptyParentMeanNoParent) {
  auto recs = parse(R"({"ts":1,"api":"a","parent":null})" "\n" R"({"ts":2,"api":"b","parent":""})" "\n"
                    R"({"ts":3,"api":"c","parent":"a"})");
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_FALSE(recs[0].parent);
  EXPECT_FALSE(recs[1].parent);
  EXPECT_EQ(recs[2].parent, "a");
}

TEST(LogReader, EmptyInput) { EXPECT_TRUE(parse("").empty()); }

TEST(LogReader, MissingApiNamesLine) {
  try {
    parse(R"({"ts":1})");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(LogReader, LineNumbersCountBlankLines) {
  try {
    parse(R"({"ts":1,"api":"a"})" "\n\n" "not json\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LogReader, RejectsNonNumericTimestamp) {
  EXPECT_THROW(parse(R"({"ts":"noon","api":"a"})"), ParseError);
  EXPECT_THROW(parse(R"({"ts":1,"api":"a","parent":3})"), ParseError);
  EXPECT_THROW(parse(R"([1,2])"), ParseError);
}

TEST(LogReader, Csv) {
  auto recs = parse("ts,api,parent\n1,frontend,\n2.5,cartservice,frontend\r\n", LogFormat::Csv);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_FALSE(recs[0].parent);
  EXPECT_EQ(recs[1].parent, "frontend");
  EXPECT_EQ(recs[1].ts, 2.5);
  EXPECT_THROW(parse("api,ts,parent\n", LogFormat::Csv), ParseError);
  EXPECT_THROW(parse("ts,api,parent\n1,a\n", LogFormat::Csv), ParseError);
  EXPECT_THROW(parse("ts,api,parent\nx,a,\n", LogFormat::Csv), ParseError);
}

TEST(LogReader, ObserverSeesRawLines) {
  std::istringstream in("ts,api,parent\n1,a,\n\n");
  LogReader reader(in, LogFormat::Csv);
  std::vector<std::string> seen;
  reader.set_line_observer([&](std::string_view l) { seen.emplace_back(l); });
  while (reader.next()) {
  }
  EXPECT_EQ(seen, (std::vector<std::string>{"ts,api,parent", "1,a,", ""}));
}

TEST(LogFormat, FromPath) {
  EXPECT_EQ(log_format_for_path("x.csv"), LogFormat::Csv);
  EXPECT_EQ(log_format_for_path("x.jsonl"), LogFormat::Jsonl);
  EXPECT_EQ(parse_log_format("csv"), LogFormat::Csv);
  EXPECT_THROW(parse_log_format("xml"), ValidationError);
}

TEST(Observations, ModeMapping) {
  CallRecord top{1, "a", std::nullopt};
  CallRecord child{2, "b", "a"};
  EXPECT_EQ(to_observation(top, SpaceMode::Single), Observation::single("a"));
  EXPECT_EQ(to_observation(child, SpaceMode::Pair), Observation::pair("a", "b"));
  EXPECT_EQ(to_observation(top, SpaceMode::Pair), Observation::pair(std::nullopt, "a"));
}

TEST(FrequencyTable, EmptyStream) {
  auto t = accumulate(testdata::boutique_space(), {});
  EXPECT_EQ(t.total(), 0u);
  for (auto c : t.counts()) EXPECT_EQ(c, 0u);
  for (auto p : t.normalized()) EXPECT_EQ(p, 0.0);
}

TEST(FrequencyTable, PaperBaseline) {
  auto f = testdata::table_f();
  EXPECT_EQ(f.total(), 89u);
  EXPECT_EQ(f.count(testdata::pair_at("frontend", "productcatalogservice")), 38u);
  EXPECT_EQ(testdata::table_f_prime().total(), 88u);

  std::ostringstream csv;
  write_matrix_csv(csv, f);
  std::istringstream lines(csv.str());
  std::string header, row;
  std::getline(lines, header);
  EXPECT_EQ(header.rfind("parent\\child,adservice,", 0), 0u);
  while (std::getline(lines, row))
    if (row.rfind("frontend,", 0) == 0) break;
  EXPECT_EQ(row, "frontend,2,9,0,17,0,0,38,0,2,0");
}

TEST(FrequencyTable, CountsAreConservedAndMergeable) {
  auto space = CategorySpace::make_shared({"a", "b", "c"}, SpaceMode::Pair);
  std::mt19937_64 rng(7);
  std::vector<Observation> all;
  for (int trial = 0; trial < 50; ++trial) {
    all.clear();
    const auto n = rng() % 200;
    for (std::uint64_t i = 0; i < n; ++i) {
      CategoryIndex idx;
      do idx = rng() % space->size();
      while (!space->admissible(idx));
      all.push_back(space->decode(idx));
    }
    auto whole = accumulate(space, all);
    EXPECT_EQ(whole.total(), n);
    const auto cut = n ? rng() % (n + 1) : 0;
    auto left = accumulate(space, std::span(all).first(cut));
    left += accumulate(space, std::span(all).subspan(cut));
    EXPECT_EQ(left, whole);
  }
}

TEST(FrequencyTable, Normalized) {
  auto space = CategorySpace::make_shared({"a", "b", "c"}, SpaceMode::Single);
  FrequencyTable t(space, {4, 3, 2});
  auto h = t.normalized();
  EXPECT_DOUBLE_EQ(h[0], 4.0 / 9);
  EXPECT_DOUBLE_EQ(h[1], 3.0 / 9);
  EXPECT_DOUBLE_EQ(h[2], 2.0 / 9);
  EXPECT_THROW(FrequencyTable(space, {1, 2}), ValidationError);
}

TEST(FrequencyTable, JsonRoundTrip) {
  auto f = testdata::table_f();
  EXPECT_EQ(frequency_table_from_json(to_json(f)), f);
}

TEST(Windows, CountWindows) {
  auto space = CategorySpace::make_shared({"a", "b"}, SpaceMode::Single);
  std::vector<Observation> obs(6, Observation::single("a"));
  obs[1] = obs[4] = Observation::single("b");
  auto w = window_histograms(space, obs, 3);
  ASSERT_EQ(w.size(), 2u);
  for (const auto& h : w) {
    EXPECT_FALSE(h.partial);
    EXPECT_DOUBLE_EQ(h.normalized[0] + h.normalized[1], 1.0);
  }
  auto short_tail = window_histograms(space, std::span(obs).first(5), 3);
  ASSERT_EQ(short_tail.size(), 2u);
  EXPECT_TRUE(short_tail[1].partial);
  EXPECT_EQ(short_tail[1].raw.total(), 2u);
  EXPECT_TRUE(window_histograms(space, std::span<const Observation>{}, 3).empty());
  EXPECT_THROW(window_histograms(space, obs, 0), ValidationError);
}

TEST(Windows, TimeWindowsKeepGaps) {
  auto space = CategorySpace::make_shared({"a"}, SpaceMode::Single);
  std::vector<CallRecord> recs{{0.0, "a", {}}, {0.5, "a", {}}, {2.5, "a", {}}};
  auto w = window_histograms(space, recs, WindowSpec{WindowSpec::Kind::Time, 1.0});
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].raw.total(), 2u);
  EXPECT_EQ(w[1].raw.total(), 0u);
  EXPECT_EQ(w[2].raw.total(), 1u);
  EXPECT_TRUE(w[2].partial);
  std::vector<CallRecord> backwards{{1.0, "a", {}}, {0.5, "a", {}}};
  EXPECT_THROW(window_histograms(space, backwards, WindowSpec{WindowSpec::Kind::Time, 1.0}), ValidationError);
}

TEST(FormatReal, RoundTrips) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::exp(u(rng)) * (i % 2 ? 1 : -1);
    EXPECT_EQ(std::stod(format_real(x)), x);
  }
  EXPECT_EQ(format_real(38), "38");
}

}  // namespace
}  // namespace apidrift
