#include "apidrift/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "apidrift/error.hpp"
#include "apidrift/format.hpp"

namespace apidrift {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0; }

std::vector<double> normalize(const std::vector<double>& alpha) {
  const double sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  std::vector<double> theta(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) theta[i] = alpha[i] / sum;
  return theta;
}

}  // namespace

double PriorSpec::alpha0_sum() const { return std::accumulate(alpha0.begin(), alpha0.end(), 0.0); }

PriorSpec build_prior(const FrequencyTable& baseline, const PriorOptions& options) {
  if (!positive_finite(options.prior_weight)) throw ValidationError("prior weight must be positive");
  if (!positive_finite(options.floor)) throw ValidationError("prior floor must be positive");
  if (!positive_finite(options.prior_odds)) throw ValidationError("prior odds must be positive");
  if (baseline.total() == 0) throw ValidationError("empty baseline: all counts are zero");

  // Relative frequency first, then scale: keeps alpha0 identical for F and m*F.
  const auto total = static_cast<double>(baseline.total());
  std::vector<double> alpha(baseline.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    auto c = baseline.count(i);
    alpha[i] = c > 0 ? options.prior_weight * (static_cast<double>(c) / total) : options.floor;
  }

  PriorSpec spec;
  spec.space = baseline.space();
  spec.theta0 = normalize(alpha);
  spec.alpha0 = std::move(alpha);
  spec.prior_weight = options.prior_weight;
  spec.floor = options.floor;
  spec.prior_odds = options.prior_odds;
  return spec;
}

PriorSpec prior_from_alpha(SpacePtr space, std::vector<double> alpha0, double prior_odds) {
  if (!space) throw ValidationError("prior needs a category space");
  if (alpha0.size() != space->size()) throw ValidationError("alpha0 length does not match the space");
  for (double a : alpha0)
    if (!positive_finite(a)) throw ValidationError("alpha0 entries must be positive and finite");
  if (!positive_finite(prior_odds)) throw ValidationError("prior odds must be positive");
  PriorSpec spec;
  spec.space = std::move(space);
  spec.theta0 = normalize(alpha0);
  spec.prior_weight = std::accumulate(alpha0.begin(), alpha0.end(), 0.0);
  spec.floor = *std::min_element(alpha0.begin(), alpha0.end());
  spec.alpha0 = std::move(alpha0);
  spec.prior_odds = prior_odds;
  return spec;
}

std::vector<std::string> prior_warnings(const PriorSpec& prior) {
  std::vector<std::string> out;
  std::size_t floored = 0;
  for (double a : prior.alpha0)
    if (a == prior.floor) ++floored;
  const double floor_mass = prior.floor * static_cast<double>(floored);
  if (floor_mass > 0.01 * prior.prior_weight) {
    out.push_back("floor cells carry " + format_real(floor_mass) + " pseudo-counts in total, more than 1% of the prior weight " +
                  format_real(prior.prior_weight) + "; consider a smaller --floor");
  }
  return out;
}

nlohmann::json to_json(const PriorSpec& prior) {
  return {{"space", to_json(*prior.space)},     {"alpha0", prior.alpha0},
          {"theta0", prior.theta0},             {"prior_weight", prior.prior_weight},
          {"floor", prior.floor},               {"prior_odds", prior.prior_odds}};
}

PriorSpec prior_from_json(const nlohmann::json& j) {
  PriorSpec spec;
  try {
    spec.space = space_from_json(j.at("space"));
    spec.alpha0 = j.at("alpha0").get<std::vector<double>>();
    spec.theta0 = j.at("theta0").get<std::vector<double>>();
    spec.prior_weight = j.at("prior_weight").get<double>();
    spec.floor = j.at("floor").get<double>();
    spec.prior_odds = j.value("prior_odds", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid prior JSON: ") + e.what());
  }
  const auto k = spec.space->size();
  if (spec.alpha0.size() != k || spec.theta0.size() != k)
    throw ValidationError("prior vectors do not match the category space");
  for (std::size_t i = 0; i < k; ++i) {
    if (!positive_finite(spec.alpha0[i]) || !positive_finite(spec.theta0[i]))
      throw ValidationError("prior entries must be positive and finite");
  }
  if (!positive_finite(spec.prior_odds)) throw ValidationError("prior odds must be positive");
  return spec;
}

}  // namespace apidrift
