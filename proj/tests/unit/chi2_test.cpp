#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "apidrift/chi2.hpp"
#include "apidrift/error.hpp"

namespace apidrift {
namespace {

TEST(Chi2Sf, ZeroIsOne) {
  for (int k : {1, 2, 5, 99, 1000}) EXPECT_EQ(chi2_sf(0.0, k), 1.0);
}

TEST(Chi2Sf, TwoDofIsExponential) {
  for (double x : {0.0, 1e-8, 0.3, 1.0, 2.0, 3.0, 5.991, 10.0, 50.0, 200.0, 1000.0})
    EXPECT_NEAR(chi2_sf(x, 2), std::exp(-x / 2), 1e-12) << x;
  EXPECT_NEAR(chi2_sf(5.991, 2), 0.05, 1e-3);
}

TEST(Chi2Sf, CriticalValues) {
  EXPECT_NEAR(chi2_sf(3.841, 1), 0.05, 1e-3);
  EXPECT_NEAR(chi2_sf(6.635, 1), 0.01, 1e-3);
  EXPECT_NEAR(chi2_sf(123.225, 99), 0.05, 1e-3);
}

TEST(Chi2Sf, MatchesBoostOracle) {
  for (int k : {1, 2, 3, 5, 10, 30, 99, 250}) {
    for (double x = 0.01; x < 4.0 * k + 100; x *= 1.37) {
      const double expected = boost::math::gamma_q(k / 2.0, x / 2.0);
      if (expected < 1e-300) break;
      EXPECT_NEAR(chi2_sf(x, k), expected, 1e-10 * expected + 1e-15) << "k=" << k << " x=" << x;
    }
  }
}

TEST(Chi2Sf, Monotone) {
  for (int k : {1, 2, 5, 10, 99}) {
    double prev = 1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double v = chi2_sf(i * (3.0 * k + 30) / 1000.0, k);
      EXPECT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(Chi2Sf, RejectsBadInput) {
  EXPECT_THROW(chi2_sf(-1.0, 2), ValidationError);
  EXPECT_THROW(chi2_sf(NAN, 2), ValidationError);
  EXPECT_THROW(chi2_sf(INFINITY, 2), ValidationError);
  EXPECT_THROW(chi2_sf(1.0, 0), ValidationError);
}

TEST(RegularizedGammaQ, Oracle) {
  EXPECT_NEAR(regularized_gamma_q(0.5, 2.0), boost::math::gamma_q(0.5, 2.0), 1e-14);
  EXPECT_NEAR(regularized_gamma_q(20.0, 19.0), boost::math::gamma_q(20.0, 19.0), 1e-13);
}

TEST(Pearson, HandValue) {
  const std::vector<double> theta{0.5, 0.5};
  const auto r = pearson_gof(std::vector<double>{60, 40}, theta);
  EXPECT_DOUBLE_EQ(r.statistic, 4.0);
  EXPECT_EQ(r.dof, 1);
  EXPECT_NEAR(r.p_value, boost::math::gamma_q(0.5, 2.0), 1e-12);
}

TEST(Pearson, PerfectFit) {
  const auto r = pearson_gof(std::vector<double>{25, 50, 25}, std::vector<double>{0.25, 0.5, 0.25});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.dof, 2);
}

TEST(Pearson, RelabelingInvariant) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng() % 20;
    std::vector<double> theta(k), counts(k);
    double sum = 0;
    for (auto& t : theta) sum += (t = 0.1 + (rng() % 100));
    for (auto& t : theta) t /= sum;
    for (auto& c : counts) c = static_cast<double>(rng() % 50);
    counts[0] += 1;
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pt(k), pc(k);
    for (std::size_t i = 0; i < k; ++i) {
      pt[i] = theta[perm[i]];
      pc[i] = counts[perm[i]];
    }
    EXPECT_NEAR(pearson_gof(counts, theta).statistic, pearson_gof(pc, pt).statistic,
                1e-9 * pearson_gof(counts, theta).statistic);
  }
}

TEST(Pearson, RejectsBadInput) {
  EXPECT_THROW(pearson_gof(std::vector<double>{1, 1}, std::vector<double>{0.5, 0.4}), ValidationError);
  EXPECT_THROW(pearson_gof(std::vector<double>{1, 1}, std::vector<double>{1.0, 0.0}), ValidationError);
  EXPECT_THROW(pearson_gof(std::vector<double>{0, 0}, std::vector<double>{0.5, 0.5}), ValidationError);
  EXPECT_THROW(pearson_gof(std::vector<double>{1}, std::vector<double>{1.0}), ValidationError);
}

TEST(Chi2Monitor, WarmupMustCoverCategories) {
  EXPECT_THROW(Chi2Monitor({0.25, 0.25, 0.25, 0.25}, 0.05, 3), ValidationError);
  EXPECT_EQ(default_chi2_warmup(100), 500u);
}

TEST(Chi2Monitor, SilentBeforeWarmup) {
  Chi2Monitor m({0.5, 0.5}, 0.05, 4);
  EXPECT_FALSE(m.step(0));
  EXPECT_FALSE(m.step(0));
  EXPECT_FALSE(m.step(0));
  EXPECT_TRUE(m.step(0));
}

TEST(Chi2Monitor, DegenerateNullNeverRejects) {
  const std::vector<double> theta{1 - 2e-9, 1e-9, 1e-9};
  const std::vector<CategoryIndex> stream(1000, 0);
  EXPECT_FALSE(sequential_chi2_monitor(stream, theta, 0.05, 15));
}

TEST(Chi2Monitor, StrongDriftRejectsAtWarmup) {
  std::vector<double> theta(10, 0.11);
  theta[9] = 0.01;
  const std::vector<CategoryIndex> stream(1000, 9);
  EXPECT_EQ(sequential_chi2_monitor(stream, theta, 0.05, 50), 50u);
}

TEST(Chi2Monitor, PeekingInflatesFalsePositives) {
  // Dense null where the asymptotic approximation is good: a single test at
  // n = 1000 has level ~0.05, testing after every draw does not.
  const std::vector<double> theta(5, 0.2);
  std::mt19937_64 rng(99);
  int rejected = 0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    std::vector<CategoryIndex> stream(1000);
    for (auto& c : stream) c = rng() % 5;
    if (sequential_chi2_monitor(stream, theta, 0.05, 25)) ++rejected;
  }
  const double rate = static_cast<double>(rejected) / reps;
  EXPECT_GT(rate, 0.05 + 2.326 * std::sqrt(0.05 * 0.95 / reps)) << rate;
}

TEST(Chi2Trajectory, Csv) {
  std::ostringstream out;
  const std::vector<CategoryIndex> stream{0, 1, 0, 0};
  write_chi2_trajectory_csv(out, stream, std::vector<double>{0.5, 0.5}, 3);
  std::istringstream lines(out.str());
  std::string header, first, second, extra;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(header, "t,statistic,p_value");
  EXPECT_EQ(first.rfind("3,", 0), 0u);
  EXPECT_EQ(second.rfind("4,", 0), 0u);
  EXPECT_FALSE(std::getline(lines, extra));
}

}  // namespace
}  // namespace apidrift
