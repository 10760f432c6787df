#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "apidrift/attribution.hpp"
#include "apidrift/error.hpp"
#include "paper_data.hpp"

namespace apidrift {
namespace {

using testdata::pair_at;

TEST(Delta, EmptyHistory) {
  for (double d : delta_scores({}, 4)) EXPECT_EQ(d, 0.0);
}

TEST(Delta, HandValue) {
  auto space = CategorySpace::make_shared({"a", "b"}, SpaceMode::Single);
  auto prior = std::make_shared<const PriorSpec>(prior_from_alpha(space, {1, 1}));
  SequentialDetector d(prior, {.keep_history = true});
  d.step(0);
  d.step(0);
  const auto delta = delta_scores(d.history().entries(), 2);
  EXPECT_NEAR(delta[0], std::log(4.0 / 3.0), 1e-15);
  EXPECT_EQ(delta[1], 0.0);
}

TEST(Delta, RejectsGaps) {
  std::vector<PsiEntry> h{{1, 0, 0.1}, {3, 0, 0.2}};
  EXPECT_THROW(delta_scores(h, 2), ValidationError);
  std::vector<PsiEntry> bad{{1, 5, 0.1}};
  EXPECT_THROW(delta_scores(bad, 2), ValidationError);
}

TEST(Delta, PartitionsTheBayesFactor) {
  std::mt19937_64 rng(31);
  const auto f_prime = testdata::table_f_prime().normalized();
  std::discrete_distribution<std::size_t> pick(f_prime.begin(), f_prime.end());
  for (double odds : {1.0, 2.0, 0.25}) {
    auto prior = std::make_shared<const PriorSpec>(build_prior(testdata::table_f(), {.prior_odds = odds}));
    SequentialDetector d(prior, {.keep_history = true});
    for (int i = 0; i < 2000; ++i) d.step(pick(rng));
    const auto delta = delta_scores(d.history().entries(), prior->alpha0.size());
    const double sum = std::accumulate(delta.begin(), delta.end(), 0.0);
    EXPECT_NEAR(sum, d.log_bf() - std::log(odds), 1e-9);
  }
}

TEST(Rho, Values) {
  const std::vector<double> same{3, 5, 2};
  for (double r : rho_scores(same, same)) EXPECT_NEAR(r, 0.0, 1e-15);

  const auto r = rho_scores(std::vector<double>{0, 2}, std::vector<double>{1, 1});
  EXPECT_NEAR(r[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(r[1], -std::log(2.0), 1e-15);

  const auto paper = rho_scores(std::vector<double>{12.5618, 50 - 12.5618}, std::vector<double>{4, 555});
  EXPECT_NEAR(paper[0], std::log((4.0 / 559) / (12.5618 / 50)), 1e-12);
  EXPECT_NEAR(paper[0], -3.56, 5e-3);

  EXPECT_THROW(rho_scores(std::vector<double>{1}, std::vector<double>{1, 2}), ValidationError);
  EXPECT_THROW(rho_scores(std::vector<double>{0, 0}, std::vector<double>{1, 2}), ValidationError);
}

TEST(ExpectedCounts, PaperRun) {
  const auto prior = build_prior(testdata::table_f());
  const auto e = expected_counts(prior, 559);
  // 559 * theta0; theta0 divides by sum(alpha0) = 50.00546, not by the weight.
  EXPECT_NEAR(e[pair_at("frontend", "currencyservice")], 106.76362231132, 1e-9);
  EXPECT_NEAR(e[pair_at("frontend", "cartservice")], 56.52191769422824, 1e-9);
  EXPECT_NEAR(e[pair_at("frontend", "recommendationservice")], 0.00067072675663817, 1e-12);
  EXPECT_NEAR(e[pair_at("frontend", "currencyservice")], 106.78, 2e-2);
  for (double x : expected_counts(prior, 0)) EXPECT_EQ(x, 0.0);
}

TEST(Aggregate, HandExample) {
  auto space = CategorySpace::make_shared({"a", "b"}, SpaceMode::Pair);
  std::vector<double> scores(space->size(), 0.0);
  scores[space->encode(Observation::pair("a", "b"))] = 1.0;
  scores[space->encode(Observation::pair("a", std::nullopt))] = -2.0;
  const auto parent = aggregate_parent_child(scores, *space, Position::Parent);
  ASSERT_EQ(parent.size(), 3u);
  EXPECT_EQ(parent[0].api, "a");
  EXPECT_DOUBLE_EQ(parent[0].abs_sum, 3.0);
  EXPECT_DOUBLE_EQ(parent[0].positive, 1.0);
  EXPECT_DOUBLE_EQ(parent[0].negative, -2.0);
  EXPECT_EQ(parent[1].abs_sum, 0.0);
  const auto child = aggregate_parent_child(scores, *space, Position::Child);
  EXPECT_DOUBLE_EQ(child[1].abs_sum, 1.0);
  EXPECT_DOUBLE_EQ(child[2].abs_sum, 2.0);
  EXPECT_EQ(child[2].api, std::string(kNullLabel));
}

TEST(Aggregate, RowScoresOnlyHitThatParent) {
  auto space = testdata::boutique_space();
  std::vector<double> scores(space->size(), 0.0);
  for (const auto& api : testdata::boutique_apis()) scores[pair_at("frontend", api.c_str())] = 0.5;
  const auto parent = aggregate_parent_child(scores, *space, Position::Parent);
  for (const auto& a : parent) EXPECT_EQ(a.abs_sum != 0.0, a.api == "frontend") << a.api;
  for (const auto& a : aggregate_parent_child(std::vector<double>(space->size(), 0.0), *space, Position::Child))
    EXPECT_EQ(a.abs_sum, 0.0);
}

TEST(Aggregate, SingleModeRejected) {
  auto space = CategorySpace::make_shared({"a"}, SpaceMode::Single);
  EXPECT_THROW(aggregate_parent_child(std::vector<double>{1.0}, *space, Position::Parent), ValidationError);
}

class ReportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    prior_ = std::make_shared<const PriorSpec>(build_prior(testdata::table_f()));
    detector_.emplace(prior_, DetectorConfig{.keep_history = true});
    std::mt19937_64 rng(8);
    const auto f_prime = testdata::table_f_prime().normalized();
    std::discrete_distribution<std::size_t> pick(f_prime.begin(), f_prime.end());
    for (int i = 0; i < 600; ++i) detector_->step(pick(rng));
  }
  std::shared_ptr<const PriorSpec> prior_;
  std::optional<SequentialDetector> detector_;
};

TEST_F(ReportTest, TopKOrdering) {
  const auto report = top_k_report(*detector_, {.k = 3});
  ASSERT_EQ(report.top_k.size(), 3u);
  for (std::size_t i = 1; i < report.top_k.size(); ++i)
    EXPECT_GE(std::abs(report.top_k[i - 1].score), std::abs(report.top_k[i].score));
  std::set<CategoryIndex> top;
  for (const auto& r : report.top_k) top.insert(r.index);
  for (std::size_t i = 0; i < report.delta.size(); ++i) {
    if (!top.contains(i)) {
      EXPECT_LE(std::abs(report.delta[i]), std::abs(report.top_k.back().score));
    }
  }
  EXPECT_EQ(report.t_stop, 600u);
  EXPECT_DOUBLE_EQ(std::accumulate(report.observed.begin(), report.observed.end(), 0.0), 600.0);
  const auto fc = pair_at("frontend", "currencyservice");
  EXPECT_NEAR(report.expected[fc], 600 * prior_->theta0[fc], 1e-12);
  EXPECT_TRUE(report.delta_aggregates);
  EXPECT_TRUE(report.rho_aggregates);
}

TEST_F(ReportTest, KBeyondSizeReturnsAll) {
  const auto report = top_k_report(*detector_, {.k = 1000, .metric = Metric::Rho});
  EXPECT_EQ(report.top_k.size(), prior_->alpha0.size());
  for (const auto& r : report.top_k) EXPECT_EQ(r.score, r.rho);
}

TEST_F(ReportTest, RhoReferences) {
  const auto by_expected = top_k_report(*detector_, {.rho_reference = RhoReference::ExpectedCounts});
  const auto by_prior = top_k_report(*detector_, {.rho_reference = RhoReference::PriorPseudoCounts});
  // theta0 and alpha0 are proportional, so both references give the same relative frequencies.
  for (std::size_t i = 0; i < by_expected.rho.size(); ++i) {
    if (prior_->alpha0[i] * 600 / prior_->alpha0_sum() < 0.5 || prior_->alpha0[i] < 0.5) continue;
    EXPECT_NEAR(by_expected.rho[i], by_prior.rho[i], 1e-9);
  }
}

TEST_F(ReportTest, Json) {
  const auto j = to_json(top_k_report(*detector_, {.k = 3}), *prior_->space);
  EXPECT_EQ(j["metric"], "delta");
  EXPECT_EQ(j["top_k"].size(), 3u);
  EXPECT_TRUE(j["top_k"][0].contains("category"));
  EXPECT_TRUE(j["top_k"][0].contains("observed"));
  EXPECT_TRUE(j["top_k"][0].contains("expected"));
  EXPECT_TRUE(j.contains("delta_aggregates"));
}

TEST(TopKReport, Preconditions) {
  auto prior = std::make_shared<const PriorSpec>(build_prior(testdata::table_f()));
  EXPECT_THROW(top_k_report(SequentialDetector(prior), {}), ValidationError);
  EXPECT_THROW(top_k_report(SequentialDetector(prior, {.forgetting = 0.9, .keep_history = true}), {}),
               ValidationError);
  EXPECT_THROW(top_k_report(SequentialDetector(prior, {.keep_history = true}), {.k = 0}), ValidationError);
  EXPECT_THROW(parse_metric("gamma"), ValidationError);
  EXPECT_THROW(parse_rho_reference("posterior"), ValidationError);
}

}  // namespace
}  // namespace apidrift
