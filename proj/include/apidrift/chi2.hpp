#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "apidrift/category_space.hpp"
#include "apidrift/ingestion.hpp"

namespace apidrift {

/// Regularized upper incomplete gamma Q(a, x). Series for x < a + 1,
/// Lentz continued fraction otherwise.
double regularized_gamma_q(double a, double x);

/// Upper-tail probability of a chi-squared variable with `dof` degrees of
/// freedom: Q(dof/2, x/2).
double chi2_sf(double x, int dof);

struct Chi2Result {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson goodness-of-fit of integer counts against a fully specified null;
/// dof = K - 1, no continuity correction.
Chi2Result pearson_gof(std::span<const double> counts, std::span<const double> theta0);
Chi2Result pearson_gof(const FrequencyTable& counts, std::span<const double> theta0);

/// Re-runs the Pearson test after every observation once `warmup`
/// observations have been seen. This is the "peeking" comparator: it does not
/// control the false-positive rate.
class Chi2Monitor {
 public:
  Chi2Monitor(std::vector<double> theta0, double fp_level, std::uint64_t warmup);

  /// Returns the test result when t >= warmup, nothing before.
  std::optional<Chi2Result> step(CategoryIndex category);

  std::uint64_t t() const noexcept { return t_; }
  std::optional<std::uint64_t> first_rejection() const noexcept { return first_rejection_; }

 private:
  std::vector<double> theta0_;
  std::vector<double> counts_;
  double fp_level_;
  std::uint64_t warmup_;
  std::uint64_t t_ = 0;
  std::optional<std::uint64_t> first_rejection_;
};

/// 5 * K, the default number of observations before the first test.
std::uint64_t default_chi2_warmup(std::size_t k);

/// First t >= warmup with p < fp_level, or nothing. Requires warmup >= K.
std::optional<std::uint64_t> sequential_chi2_monitor(std::span<const CategoryIndex> stream,
                                                     std::span<const double> theta0, double fp_level,
                                                     std::uint64_t warmup);

/// Writes `t,statistic,p_value` rows for every tested t of the stream.
void write_chi2_trajectory_csv(std::ostream& out, std::span<const CategoryIndex> stream,
                               std::span<const double> theta0, std::uint64_t warmup);

}  // namespace apidrift
