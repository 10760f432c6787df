#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "apidrift/detector.hpp"

namespace apidrift {

/// Probability vector over a category space.
struct Distribution {
  SpacePtr space;
  std::vector<double> probs;

  static Distribution from_counts(const FrequencyTable& table);
  static Distribution from_probs(SpacePtr space, std::vector<double> probs);
};

/// (1 - pi) * h + pi * h_alt, elementwise. pi weights the new distribution.
Distribution mix(const Distribution& h, const Distribution& h_alt, double pi);

struct ConstantDrift {
  double pi = 0.0;
};

/// pi_t = 0 before t_start, 1 from t_end on, linear in between.
struct DelayedRamp {
  std::uint64_t t_start = 1;
  std::uint64_t t_end = 1;
};

using DriftSchedule = std::variant<ConstantDrift, DelayedRamp>;

void validate(const DriftSchedule& schedule);
/// Mixing weight at 1-based time t.
double pi_at(const DriftSchedule& schedule, std::uint64_t t);
/// "0.2" for constant drift, "ramp:10-20" for a delayed ramp.
std::string schedule_label(const DriftSchedule& schedule);

/// splitmix64 finalizer over master_seed + (stream + 1) * golden gamma.
std::uint64_t mix64(std::uint64_t master_seed, std::uint64_t stream);

/// Top 53 bits of a 64-bit draw scaled to [0, 1).
double uniform01(std::mt19937_64& rng);

/// Inverse-CDF categorical sampler over the fixed category order.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> probs);

  CategoryIndex operator()(std::mt19937_64& rng) const;
  CategoryIndex from_uniform(double u) const;

 private:
  std::vector<double> cdf_;
  CategoryIndex last_positive_ = 0;
};

/// n draws from mix(h, h_alt, pi_at(schedule, t)) for t = 1..n, seeded with
/// std::mt19937_64(seed).
std::vector<CategoryIndex> sample_stream(const Distribution& h, const Distribution& h_alt,
                                         const DriftSchedule& schedule, std::uint64_t n,
                                         std::uint64_t seed);

struct ExperimentConfig {
  FrequencyTable baseline;
  FrequencyTable alternate;
  std::vector<DriftSchedule> schedules;
  std::uint64_t reps = 500;
  std::uint64_t draws = 1000;
  std::vector<double> fp_levels{0.10, 0.05, 0.01};
  std::uint64_t master_seed = 0;
  PriorOptions prior;
  double forgetting = 1.0;
  bool keep_trajectories = false;
  bool chi2 = false;
  std::uint64_t chi2_warmup = 0;  // 0 = 5 * K
};

struct RepOutcome {
  /// First crossing time per fp level (same order as the config's levels).
  std::vector<std::optional<std::uint64_t>> first_alarm;
  double final_log_bf = 0.0;
  std::vector<double> trajectory;  // log BF after each draw, when requested
  std::vector<std::optional<std::uint64_t>> chi2_first_rejection;
};

struct ScheduleOutcome {
  DriftSchedule schedule;
  std::vector<double> detection_rate;       // per fp level
  std::vector<double> chi2_rejection_rate;  // per fp level, when chi2 was run
  std::vector<RepOutcome> reps;
};

struct DetectionRateTable {
  std::vector<double> fp_levels;
  std::vector<ScheduleOutcome> rows;
};

/// Runs `reps` independent streams per schedule. Rep r uses seed
/// mix64(master_seed, r) for every schedule, so schedules share random
/// numbers. Output does not depend on `jobs`.
DetectionRateTable run_experiment(const ExperimentConfig& config, unsigned jobs = 1);

/// Reads an experiment config from JSON (TOML is converted to the same shape
/// by the CLI). Relative `file` paths resolve against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");

nlohmann::json to_json(const DetectionRateTable& table);

}  // namespace apidrift
