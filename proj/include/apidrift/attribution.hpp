#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "apidrift/detector.hpp"

namespace apidrift {

/// Sum of ln(psi_t) per category over a complete history (t = 1, 2, ...).
/// Categories never observed score exactly 0.
std::vector<double> delta_scores(std::span<const PsiEntry> history, std::size_t k);

/// ln( (max(observed_i, floor) / n1) / (max(expected_i, floor) / n0) ), where
/// n0 and n1 are the raw totals of the two vectors.
std::vector<double> rho_scores(std::span<const double> expected, std::span<const double> observed,
                               double floor = 0.5);

/// t * theta0.
std::vector<double> expected_counts(const PriorSpec& prior, std::uint64_t t);

enum class Metric { Delta, Rho };
Metric parse_metric(std::string_view text);
std::string_view to_string(Metric metric);

enum class Position { Parent, Child };

/// Reference vector for rho: expected counts t * theta0 (n0 = t), or the raw
/// prior pseudo-counts alpha0 (n0 = sum alpha0).
enum class RhoReference { ExpectedCounts, PriorPseudoCounts };
RhoReference parse_rho_reference(std::string_view text);

struct ApiAggregate {
  std::string api;  // API name or the null label
  double abs_sum = 0.0;
  double positive = 0.0;
  double negative = 0.0;
};

/// Per-API sums over the categories holding that API in the given position,
/// for every API plus the null element. `abs_sum` adds |score|; `positive`
/// and `negative` split the signed scores.
std::vector<ApiAggregate> aggregate_parent_child(std::span<const double> scores, const CategorySpace& space,
                                                 Position position);

struct RankedCategory {
  CategoryIndex index = 0;
  std::string label;
  double score = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  double observed = 0.0;
  double expected = 0.0;
};

struct AttributionReport {
  Metric metric = Metric::Delta;
  std::uint64_t t_stop = 0;
  double log_bf = 0.0;
  double prior_odds = 1.0;
  std::vector<double> delta;
  std::vector<double> rho;
  std::vector<double> observed;
  std::vector<double> expected;
  std::vector<RankedCategory> top_k;
  struct Aggregates {
    std::vector<ApiAggregate> parent;
    std::vector<ApiAggregate> child;
  };
  std::optional<Aggregates> delta_aggregates;  // pair mode only
  std::optional<Aggregates> rho_aggregates;
};

struct ReportOptions {
  std::size_t k = 3;
  Metric metric = Metric::Delta;
  RhoReference rho_reference = RhoReference::ExpectedCounts;
};

/// Builds the report from a complete psi history. `log_bf` is the detector's
/// value at the stop time; it defaults to ln(prior_odds) + sum of ln psi.
AttributionReport build_report(const PriorSpec& prior, std::span<const PsiEntry> history,
                               const ReportOptions& options, std::optional<double> log_bf = std::nullopt);

/// Report for a stopped detector; needs retained history and w = 1.
AttributionReport top_k_report(const SequentialDetector& detector, const ReportOptions& options);

nlohmann::json to_json(const AttributionReport& report, const CategorySpace& space);

}  // namespace apidrift
