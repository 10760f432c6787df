#include "apidrift/chi2.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "apidrift/error.hpp"
#include "apidrift/format.hpp"

namespace apidrift {

namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

// x^a e^-x / Gamma(a), in the log domain.
double gamma_prefactor(double a, double x) {
  return std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double lower_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) return sum * gamma_prefactor(a, x);
  }
  throw NumericFault("incomplete gamma series did not converge");
}

double upper_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h * gamma_prefactor(a, x);
  }
  throw NumericFault("incomplete gamma continued fraction did not converge");
}

void check_theta(std::span<const double> theta0) {
  double sum = 0.0;
  for (double p : theta0) {
    if (!(p > 0.0) || !std::isfinite(p)) throw ValidationError("null probabilities must be strictly positive");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw ValidationError("null probabilities must sum to 1");
}

double pearson_statistic(std::span<const double> counts, std::span<const double> theta0, double n) {
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = n * theta0[i];
    if (!(expected > 0.0)) throw ValidationError("zero expected count in cell " + std::to_string(i));
    const double diff = counts[i] - expected;
    stat += diff * diff / expected;
  }
  return stat;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!std::isfinite(a) || !std::isfinite(x)) throw ValidationError("incomplete gamma needs finite arguments");
  if (!(a > 0.0)) throw ValidationError("incomplete gamma shape must be positive");
  if (x < 0.0) throw ValidationError("incomplete gamma argument must be non-negative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - lower_series(a, x);
  return upper_continued_fraction(a, x);
}

double chi2_sf(double x, int dof) {
  if (dof < 1) throw ValidationError("chi-squared degrees of freedom must be positive");
  if (!std::isfinite(x)) throw ValidationError("chi2_sf needs a finite statistic");
  if (x < 0.0) throw ValidationError("chi2_sf needs a non-negative statistic");
  return regularized_gamma_q(0.5 * dof, 0.5 * x);
}

Chi2Result pearson_gof(std::span<const double> counts, std::span<const double> theta0) {
  if (counts.size() != theta0.size()) throw ValidationError("counts and null probabilities differ in length");
  if (counts.size() < 2) throw ValidationError("goodness of fit needs at least two categories");
  check_theta(theta0);
  double n = 0.0;
  for (double x : counts) {
    if (!(x >= 0.0)) throw ValidationError("counts must be non-negative");
    n += x;
  }
  if (!(n > 0.0)) throw ValidationError("goodness of fit needs at least one observation");
  Chi2Result r;
  r.statistic = pearson_statistic(counts, theta0, n);
  r.dof = static_cast<int>(counts.size()) - 1;
  r.p_value = chi2_sf(r.statistic, r.dof);
  return r;
}

Chi2Result pearson_gof(const FrequencyTable& counts, std::span<const double> theta0) {
  std::vector<double> x(counts.counts().begin(), counts.counts().end());
  return pearson_gof(x, theta0);
}

Chi2Monitor::Chi2Monitor(std::vector<double> theta0, double fp_level, std::uint64_t warmup)
    : theta0_(std::move(theta0)), counts_(theta0_.size(), 0.0), fp_level_(fp_level), warmup_(warmup) {
  if (theta0_.size() < 2) throw ValidationError("chi-squared monitor needs at least two categories");
  check_theta(theta0_);
  if (!(fp_level > 0.0 && fp_level < 1.0)) throw ValidationError("false-positive level must lie in (0, 1)");
  if (warmup_ < theta0_.size()) throw ValidationError("chi-squared warmup must be at least K observations");
}

std::optional<Chi2Result> Chi2Monitor::step(CategoryIndex category) {
  if (category >= counts_.size()) throw ValidationError("category index out of range");
  counts_[category] += 1.0;
  ++t_;
  if (t_ < warmup_) return std::nullopt;
  Chi2Result r;
  r.statistic = pearson_statistic(counts_, theta0_, static_cast<double>(t_));
  r.dof = static_cast<int>(counts_.size()) - 1;
  r.p_value = chi2_sf(r.statistic, r.dof);
  if (!first_rejection_ && r.p_value < fp_level_) first_rejection_ = t_;
  return r;
}

std::uint64_t default_chi2_warmup(std::size_t k) { return 5 * static_cast<std::uint64_t>(k); }

std::optional<std::uint64_t> sequential_chi2_monitor(std::span<const CategoryIndex> stream,
                                                     std::span<const double> theta0, double fp_level,
                                                     std::uint64_t warmup) {
  Chi2Monitor monitor(std::vector<double>(theta0.begin(), theta0.end()), fp_level, warmup);
  for (auto c : stream) {
    monitor.step(c);
    if (monitor.first_rejection()) break;
  }
  return monitor.first_rejection();
}

void write_chi2_trajectory_csv(std::ostream& out, std::span<const CategoryIndex> stream,
                               std::span<const double> theta0, std::uint64_t warmup) {
  // The level only drives first_rejection(), which is not reported here.
  Chi2Monitor monitor(std::vector<double>(theta0.begin(), theta0.end()), 0.05, warmup);
  out << "t,statistic,p_value\n";
  for (auto c : stream) {
    if (auto r = monitor.step(c))
      out << monitor.t() << ',' << format_real(r->statistic) << ',' << format_real(r->p_value) << '\n';
  }
}

}  // namespace apidrift
