#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "apidrift/ingestion.hpp"

namespace apidrift {

struct PriorOptions {
  double prior_weight = 50.0;  // total pseudo-count given to the baseline's nonzero cells
  double floor = 0.00006;      // pseudo-count for cells the baseline never saw
  double prior_odds = 1.0;
};

/// Dirichlet prior alpha0 and the null probability vector theta0 it implies.
struct PriorSpec {
  SpacePtr space;
  std::vector<double> alpha0;
  std::vector<double> theta0;
  double prior_weight = 50.0;
  double floor = 0.00006;
  double prior_odds = 1.0;

  double alpha0_sum() const;

  friend bool operator==(const PriorSpec& a, const PriorSpec& b) {
    return *a.space == *b.space && a.alpha0 == b.alpha0 && a.theta0 == b.theta0 &&
           a.prior_weight == b.prior_weight && a.floor == b.floor && a.prior_odds == b.prior_odds;
  }
};

/// Rescales the baseline's nonzero counts to sum to `prior_weight` and gives
/// every zero cell (the (null, null) pair included) the floor value.
PriorSpec build_prior(const FrequencyTable& baseline, const PriorOptions& options = {});

/// Builds a spec from an explicit alpha0 (theta0 derived by normalization).
PriorSpec prior_from_alpha(SpacePtr space, std::vector<double> alpha0, double prior_odds = 1.0);

/// Human-readable warnings, e.g. when the floor cells carry more than 1% of the
/// prior weight in total.
std::vector<std::string> prior_warnings(const PriorSpec& prior);

nlohmann::json to_json(const PriorSpec& prior);
PriorSpec prior_from_json(const nlohmann::json& j);

}  // namespace apidrift
