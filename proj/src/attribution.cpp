#include "apidrift/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <nlohmann/json.hpp>

#include "apidrift/error.hpp"

namespace apidrift {

std::vector<double> delta_scores(std::span<const PsiEntry> history, std::size_t k) {
  std::vector<double> delta(k, 0.0);
  std::uint64_t expected_t = 1;
  for (const auto& e : history) {
    if (e.t != expected_t)
      throw ValidationError("psi history is truncated or out of order: expected t=" + std::to_string(expected_t) +
                            ", found t=" + std::to_string(e.t));
    if (e.category >= k) throw ValidationError("psi history category out of range");
    delta[e.category] += e.log_psi;
    ++expected_t;
  }
  return delta;
}

std::vector<double> rho_scores(std::span<const double> expected, std::span<const double> observed, double floor) {
  if (expected.size() != observed.size()) throw ValidationError("expected and observed vectors differ in length");
  if (!(floor > 0.0)) throw ValidationError("rho floor must be positive");
  const double n0 = std::accumulate(expected.begin(), expected.end(), 0.0);
  const double n1 = std::accumulate(observed.begin(), observed.end(), 0.0);
  if (!(n0 > 0.0) || !(n1 > 0.0)) throw ValidationError("rho needs positive expected and observed totals");
  std::vector<double> rho(expected.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    rho[i] = std::log((std::max(observed[i], floor) / n1) / (std::max(expected[i], floor) / n0));
  }
  return rho;
}

std::vector<double> expected_counts(const PriorSpec& prior, std::uint64_t t) {
  std::vector<double> out(prior.theta0.size());
  const auto n = static_cast<double>(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = n * prior.theta0[i];
  return out;
}

Metric parse_metric(std::string_view text) {
  if (text == "delta") return Metric::Delta;
  if (text == "rho") return Metric::Rho;
  throw ValidationError("unknown metric '" + std::string(text) + "' (expected delta|rho)");
}

std::string_view to_string(Metric metric) { return metric == Metric::Delta ? "delta" : "rho"; }

RhoReference parse_rho_reference(std::string_view text) {
  if (text == "expected") return RhoReference::ExpectedCounts;
  if (text == "prior") return RhoReference::PriorPseudoCounts;
  throw ValidationError("unknown rho reference '" + std::string(text) + "' (expected expected|prior)");
}

std::vector<ApiAggregate> aggregate_parent_child(std::span<const double> scores, const CategorySpace& space,
                                                 Position position) {
  if (space.mode() != SpaceMode::Pair) throw ValidationError("parent/child aggregation needs a pair-mode space");
  if (scores.size() != space.size()) throw ValidationError("score vector does not match the space");
  std::vector<ApiAggregate> out(space.positions());
  for (std::size_t p = 0; p < out.size(); ++p) out[p].api = space.position_label(p);
  for (CategoryIndex i = 0; i < scores.size(); ++i) {
    const auto pos = position == Position::Parent ? space.parent_position(i) : space.child_position(i);
    const double s = scores[i];
    auto& agg = out[pos];
    agg.abs_sum += std::fabs(s);
    if (s > 0.0) agg.positive += s;
    if (s < 0.0) agg.negative += s;
  }
  return out;
}

AttributionReport build_report(const PriorSpec& prior, std::span<const PsiEntry> history,
                               const ReportOptions& options, std::optional<double> log_bf) {
  if (options.k < 1) throw ValidationError("top-k report needs k >= 1");
  const auto& space = *prior.space;
  const auto k = space.size();

  AttributionReport r;
  r.metric = options.metric;
  r.t_stop = history.size();
  r.prior_odds = prior.prior_odds;
  r.delta = delta_scores(history, k);
  r.log_bf = log_bf ? *log_bf
                    : std::log(prior.prior_odds) +
                          std::accumulate(history.begin(), history.end(), 0.0,
                                          [](double acc, const PsiEntry& e) { return acc + e.log_psi; });

  r.observed.assign(k, 0.0);
  for (const auto& e : history) r.observed[e.category] += 1.0;
  r.expected = expected_counts(prior, r.t_stop);

  if (r.t_stop > 0) {
    const auto& reference = options.rho_reference == RhoReference::ExpectedCounts ? r.expected : prior.alpha0;
    r.rho = rho_scores(reference, r.observed);
  } else {
    r.rho.assign(k, 0.0);
  }

  const auto& scores = options.metric == Metric::Delta ? r.delta : r.rho;
  std::vector<CategoryIndex> order(k);
  std::iota(order.begin(), order.end(), CategoryIndex{0});
  std::stable_sort(order.begin(), order.end(), [&](CategoryIndex a, CategoryIndex b) {
    return std::fabs(scores[a]) > std::fabs(scores[b]);
  });
  order.resize(std::min(options.k, k));
  for (auto i : order)
    r.top_k.push_back({i, space.label(i), scores[i], r.delta[i], r.rho[i], r.observed[i], r.expected[i]});

  if (space.mode() == SpaceMode::Pair) {
    r.delta_aggregates = AttributionReport::Aggregates{aggregate_parent_child(r.delta, space, Position::Parent),
                                                       aggregate_parent_child(r.delta, space, Position::Child)};
    r.rho_aggregates = AttributionReport::Aggregates{aggregate_parent_child(r.rho, space, Position::Parent),
                                                     aggregate_parent_child(r.rho, space, Position::Child)};
  }
  return r;
}

AttributionReport top_k_report(const SequentialDetector& detector, const ReportOptions& options) {
  if (!detector.has_history()) throw ValidationError("attribution needs a detector that retains its psi history");
  if (detector.config().forgetting != 1.0) throw ValidationError("attribution is not defined under forgetting (w < 1)");
  const auto history = detector.history().entries();
  return build_report(detector.prior(), history, options, detector.log_bf());
}

namespace {

nlohmann::json aggregates_json(const AttributionReport::Aggregates& a) {
  auto rows = [](const std::vector<ApiAggregate>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& x : v)
      out.push_back({{"api", x.api}, {"abs_sum", x.abs_sum}, {"positive", x.positive}, {"negative", x.negative}});
    return out;
  };
  return {{"parent", rows(a.parent)}, {"child", rows(a.child)}};
}

}  // namespace

nlohmann::json to_json(const AttributionReport& report, const CategorySpace& space) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& c : report.top_k) {
    top.push_back({{"index", c.index},
                   {"category", c.label},
                   {"score", c.score},
                   {"delta", c.delta},
                   {"rho", c.rho},
                   {"observed", c.observed},
                   {"expected", c.expected}});
  }
  nlohmann::json j = {{"metric", to_string(report.metric)},
                      {"t_stop", report.t_stop},
                      {"log_bf", report.log_bf},
                      {"prior_odds", report.prior_odds},
                      {"space", to_json(space)},
                      {"top_k", top},
                      {"delta", report.delta},
                      {"rho", report.rho},
                      {"observed", report.observed},
                      {"expected", report.expected}};
  if (report.delta_aggregates) j["delta_aggregates"] = aggregates_json(*report.delta_aggregates);
  if (report.rho_aggregates) j["rho_aggregates"] = aggregates_json(*report.rho_aggregates);
  return j;
}

}  // namespace apidrift
