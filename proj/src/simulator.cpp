#include "apidrift/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "apidrift/chi2.hpp"
#include "apidrift/error.hpp"
#include "apidrift/format.hpp"

namespace apidrift {

Distribution Distribution::from_counts(const FrequencyTable& table) {
  if (table.total() == 0) throw ValidationError("cannot build a distribution from an all-zero table");
  return {table.space(), table.normalized()};
}

Distribution Distribution::from_probs(SpacePtr space, std::vector<double> probs) {
  if (!space || probs.size() != space->size()) throw ValidationError("probability vector does not match the space");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("probabilities must be non-negative");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-12) throw ValidationError("probabilities must sum to 1");
  return {std::move(space), std::move(probs)};
}

Distribution mix(const Distribution& h, const Distribution& h_alt, double pi) {
  if (!h.space || !h_alt.space || !(*h.space == *h_alt.space) || h.probs.size() != h_alt.probs.size())
    throw ValidationError("cannot mix distributions over different category spaces");
  if (!(pi >= 0.0 && pi <= 1.0)) throw ValidationError("mixing weight must lie in [0, 1]");
  Distribution out{h.space, std::vector<double>(h.probs.size())};
  for (std::size_t i = 0; i < out.probs.size(); ++i) out.probs[i] = (1.0 - pi) * h.probs[i] + pi * h_alt.probs[i];
  return out;
}

// Schedules ------------------------------------------------------------------

void validate(const DriftSchedule& schedule) {
  if (const auto* c = std::get_if<ConstantDrift>(&schedule)) {
    if (!(c->pi >= 0.0 && c->pi <= 1.0)) throw ValidationError("constant drift weight must lie in [0, 1]");
  } else {
    const auto& r = std::get<DelayedRamp>(schedule);
    if (r.t_start < 1 || r.t_end < r.t_start) throw ValidationError("drift ramp needs 1 <= t_start <= t_end");
  }
}

double pi_at(const DriftSchedule& schedule, std::uint64_t t) {
  if (t < 1) throw ValidationError("time index starts at 1");
  if (const auto* c = std::get_if<ConstantDrift>(&schedule)) return c->pi;
  const auto& r = std::get<DelayedRamp>(schedule);
  if (t < r.t_start) return 0.0;
  if (t >= r.t_end) return 1.0;
  return static_cast<double>(t - r.t_start) / static_cast<double>(r.t_end - r.t_start);
}

std::string schedule_label(const DriftSchedule& schedule) {
  if (const auto* c = std::get_if<ConstantDrift>(&schedule)) return format_real(c->pi);
  const auto& r = std::get<DelayedRamp>(schedule);
  return "ramp:" + std::to_string(r.t_start) + "-" + std::to_string(r.t_end);
}

// Randomness -----------------------------------------------------------------

std::uint64_t mix64(std::uint64_t master_seed, std::uint64_t stream) {
  std::uint64_t z = master_seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

CategoricalSampler::CategoricalSampler(std::span<const double> probs) {
  if (probs.empty()) throw ValidationError("sampler needs at least one category");
  cdf_.resize(probs.size());
  double acc = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0)) throw ValidationError("sampler probabilities must be non-negative");
    acc += probs[i];
    cdf_[i] = acc;
    if (probs[i] > 0.0) {
      last_positive_ = i;
      any = true;
    }
  }
  if (!any) throw ValidationError("sampler needs positive probability mass");
}

CategoryIndex CategoricalSampler::from_uniform(double u) const {
  // Scale by the accumulated total so rounding in the cdf never strands mass.
  const double target = u * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  if (it == cdf_.end()) return last_positive_;
  return static_cast<CategoryIndex>(it - cdf_.begin());
}

CategoryIndex CategoricalSampler::operator()(std::mt19937_64& rng) const { return from_uniform(uniform01(rng)); }

namespace {

/// Per-step sampler for a drift schedule; rebuilds the cdf only when pi changes.
class ScheduledSource {
 public:
  ScheduledSource(const Distribution& h, const Distribution& h_alt, const DriftSchedule& schedule)
      : h_(h), h_alt_(h_alt), schedule_(schedule) {
    validate(schedule_);
  }

  CategoryIndex draw(std::mt19937_64& rng, std::uint64_t t) {
    const double pi = pi_at(schedule_, t);
    if (!sampler_ || pi != current_pi_) {
      sampler_.emplace(mix(h_, h_alt_, pi).probs);
      current_pi_ = pi;
    }
    return (*sampler_)(rng);
  }

 private:
  const Distribution& h_;
  const Distribution& h_alt_;
  DriftSchedule schedule_;
  std::optional<CategoricalSampler> sampler_;
  double current_pi_ = -1.0;
};

}  // namespace

std::vector<CategoryIndex> sample_stream(const Distribution& h, const Distribution& h_alt,
                                         const DriftSchedule& schedule, std::uint64_t n,
                                         std::uint64_t seed) {
  ScheduledSource source(h, h_alt, schedule);
  std::mt19937_64 rng(seed);
  std::vector<CategoryIndex> out;
  out.reserve(n);
  for (std::uint64_t t = 1; t <= n; ++t) out.push_back(source.draw(rng, t));
  return out;
}

// Experiment -----------------------------------------------------------------

namespace {

RepOutcome run_rep(const ExperimentConfig& config, const std::shared_ptr<const PriorSpec>& prior,
                   const Distribution& h, const Distribution& h_alt, const DriftSchedule& schedule,
                   std::uint64_t rep) {
  DetectorConfig dcfg;
  dcfg.fp_levels = config.fp_levels;
  dcfg.forgetting = config.forgetting;
  SequentialDetector detector(prior, dcfg);

  std::optional<Chi2Monitor> chi2;
  if (config.chi2) {
    const auto warmup = config.chi2_warmup ? config.chi2_warmup : default_chi2_warmup(prior->theta0.size());
    chi2.emplace(prior->theta0, config.fp_levels.front(), warmup);
  }

  RepOutcome out;
  out.first_alarm.assign(config.fp_levels.size(), std::nullopt);
  if (config.chi2) out.chi2_first_rejection.assign(config.fp_levels.size(), std::nullopt);
  if (config.keep_trajectories) out.trajectory.reserve(config.draws);

  ScheduledSource source(h, h_alt, schedule);
  std::mt19937_64 rng(mix64(config.master_seed, rep));
  std::size_t chi2_open = config.fp_levels.size();
  for (std::uint64_t t = 1; t <= config.draws; ++t) {
    const auto c = source.draw(rng, t);
    const auto step = detector.step(c);
    if (config.keep_trajectories) out.trajectory.push_back(step.log_bf);
    if (chi2 && chi2_open > 0) {
      if (auto r = chi2->step(c)) {
        for (std::size_t j = 0; j < config.fp_levels.size(); ++j) {
          if (!out.chi2_first_rejection[j] && r->p_value < config.fp_levels[j]) {
            out.chi2_first_rejection[j] = t;
            --chi2_open;
          }
        }
      }
    }
  }
  for (std::size_t j = 0; j < config.fp_levels.size(); ++j) out.first_alarm[j] = detector.first_alarm(config.fp_levels[j]);
  out.final_log_bf = detector.log_bf();
  return out;
}

std::vector<double> rates(const std::vector<RepOutcome>& reps, std::size_t levels,
                          std::vector<std::optional<std::uint64_t>> RepOutcome::*field) {
  std::vector<double> out(levels, 0.0);
  for (std::size_t j = 0; j < levels; ++j) {
    std::uint64_t hits = 0;
    for (const auto& r : reps)
      if ((r.*field)[j]) ++hits;
    out[j] = static_cast<double>(hits) / static_cast<double>(reps.size());
  }
  return out;
}

}  // namespace

DetectionRateTable run_experiment(const ExperimentConfig& config, unsigned jobs) {
  if (config.reps < 1 || config.draws < 1) throw ValidationError("experiment needs reps >= 1 and draws >= 1");
  if (config.fp_levels.empty()) throw ValidationError("experiment needs at least one false-positive level");
  if (config.schedules.empty()) throw ValidationError("experiment needs at least one drift schedule");
  for (const auto& s : config.schedules) validate(s);
  for (double fp : config.fp_levels) log_threshold(fp);
  if (!(*config.baseline.space() == *config.alternate.space()))
    throw ValidationError("baseline and alternate tables use different category spaces");

  auto prior = std::make_shared<const PriorSpec>(build_prior(config.baseline, config.prior));
  const auto h = Distribution::from_counts(config.baseline);
  const auto h_alt = Distribution::from_counts(config.alternate);

  DetectionRateTable table;
  table.fp_levels = config.fp_levels;
  for (const auto& s : config.schedules) {
    ScheduleOutcome row;
    row.schedule = s;
    row.reps.resize(config.reps);
    table.rows.push_back(std::move(row));
  }

  const std::uint64_t total = config.schedules.size() * config.reps;
  std::atomic<std::uint64_t> next{0};
  std::vector<std::exception_ptr> errors(std::max(1u, jobs));
  auto worker = [&](unsigned id) {
    try {
      for (std::uint64_t item = next++; item < total; item = next++) {
        const auto s = item / config.reps;
        const auto rep = item % config.reps;
        table.rows[s].reps[rep] = run_rep(config, prior, h, h_alt, config.schedules[s], rep);
      }
    } catch (...) {
      errors[id] = std::current_exception();
      next = total;
    }
  };
  if (jobs <= 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned id = 0; id < jobs; ++id) pool.emplace_back(worker, id);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (auto& row : table.rows) {
    row.detection_rate = rates(row.reps, config.fp_levels.size(), &RepOutcome::first_alarm);
    if (config.chi2) row.chi2_rejection_rate = rates(row.reps, config.fp_levels.size(), &RepOutcome::chi2_first_rejection);
  }
  return table;
}

// Config ---------------------------------------------------------------------

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::optional<std::string> optional_name(const nlohmann::json& entry, const char* key) {
  auto it = entry.find(key);
  if (it == entry.end() || it->is_null()) return std::nullopt;
  auto s = it->get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

FrequencyTable table_from_config(const nlohmann::json& j, const SpacePtr& space, const std::string& base_dir,
                                 const char* what) {
  if (j.contains("file")) {
    std::filesystem::path path = j.at("file").get<std::string>();
    if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
    auto table = frequency_table_from_json(read_json_file(path));
    if (space && !(*table.space() == *space))
      throw ValidationError(std::string(what) + " file uses a different category space");
    return table;
  }
  if (!space) throw ValidationError(std::string(what) + ": inline counts need a \"space\" section");
  if (j.contains("counts")) return FrequencyTable(space, j.at("counts").get<std::vector<std::uint64_t>>());
  if (j.contains("entries")) {
    FrequencyTable table(space);
    for (const auto& e : j.at("entries")) {
      const auto count = e.at("count").get<std::uint64_t>();
      Observation obs = space->mode() == SpaceMode::Single
                            ? Observation::single(e.at("api").get<std::string>())
                            : Observation::pair(optional_name(e, "parent"), optional_name(e, "child"));
      table.add(space->encode(obs), count);
    }
    return table;
  }
  throw ValidationError(std::string(what) + " needs one of \"file\", \"counts\" or \"entries\"");
}

std::uint64_t seed_from_json(const nlohmann::json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    auto s = v.get<std::int64_t>();
    if (s < 0) throw ValidationError("master_seed must be non-negative");
    return static_cast<std::uint64_t>(s);
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    std::size_t used = 0;
    auto value = std::stoull(s, &used, 0);
    if (used != s.size()) throw ValidationError("bad master_seed '" + s + "'");
    return value;
  }
  throw ValidationError("master_seed must be an integer or a numeric string");
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  try {
    SpacePtr space = j.contains("space") ? space_from_json(j.at("space")) : nullptr;
    auto baseline = table_from_config(j.at("baseline"), space, base_dir, "baseline");
    if (!space) space = baseline.space();
    auto alternate = table_from_config(j.at("alternate"), space, base_dir, "alternate");

    ExperimentConfig cfg{.baseline = std::move(baseline), .alternate = std::move(alternate), .schedules = {}, .prior = {}};
    for (double pi : j.value("pi_values", std::vector<double>{})) cfg.schedules.push_back(ConstantDrift{pi});
    if (j.contains("ramps")) {
      for (const auto& r : j.at("ramps"))
        cfg.schedules.push_back(DelayedRamp{r.at("t_start").get<std::uint64_t>(), r.at("t_end").get<std::uint64_t>()});
    }
    cfg.reps = j.value("reps", cfg.reps);
    cfg.draws = j.value("draws", cfg.draws);
    cfg.fp_levels = j.value("fp_levels", cfg.fp_levels);
    if (j.contains("master_seed")) cfg.master_seed = seed_from_json(j.at("master_seed"));
    if (j.contains("prior")) {
      const auto& p = j.at("prior");
      cfg.prior.prior_weight = p.value("weight", cfg.prior.prior_weight);
      cfg.prior.floor = p.value("floor", cfg.prior.floor);
      cfg.prior.prior_odds = p.value("odds", cfg.prior.prior_odds);
    }
    cfg.forgetting = j.value("forgetting", cfg.forgetting);
    cfg.keep_trajectories = j.value("trajectories", false);
    if (j.contains("chi2")) {
      cfg.chi2 = j.at("chi2").value("enabled", false);
      cfg.chi2_warmup = j.at("chi2").value("warmup", std::uint64_t{0});
    }
    if (cfg.schedules.empty()) throw ValidationError("config needs \"pi_values\" or \"ramps\"");
    for (const auto& s : cfg.schedules) validate(s);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid experiment config: ") + e.what());
  }
}

nlohmann::json to_json(const DetectionRateTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json r = {{"schedule", schedule_label(row.schedule)}, {"detection_rate", row.detection_rate}};
    if (const auto* c = std::get_if<ConstantDrift>(&row.schedule)) r["pi"] = c->pi;
    if (!row.chi2_rejection_rate.empty()) r["chi2_rejection_rate"] = row.chi2_rejection_rate;
    r["reps"] = row.reps.size();
    rows.push_back(std::move(r));
  }
  return {{"fp_levels", table.fp_levels}, {"rows", rows}};
}

}  // namespace apidrift
