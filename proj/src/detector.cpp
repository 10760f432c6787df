#include "apidrift/detector.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "apidrift/error.hpp"

namespace apidrift {

double log_threshold(double fp_level) {
  if (!(fp_level > 0.0 && fp_level < 1.0)) throw ValidationError("false-positive level must lie in (0, 1)");
  return -std::log(fp_level);
}

// PsiHistory -----------------------------------------------------------------

namespace {

struct SpillRecord {
  std::uint64_t t;
  std::uint64_t category;
  double log_psi;
};

}  // namespace

PsiHistory::PsiHistory(std::size_t cap, std::filesystem::path spill_path)
    : cap_(cap), spill_path_(std::move(spill_path)) {
  if (cap_ == 0) throw ValidationError("history cap must be positive");
}

void PsiHistory::spill() {
  if (!file_) {
    std::FILE* f = spill_path_.empty() ? std::tmpfile() : std::fopen(spill_path_.c_str(), "w+b");
    if (!f) throw Error("cannot open psi history spill file");
    file_.reset(f);
  }
  std::vector<SpillRecord> records;
  records.reserve(buffer_.size());
  for (const auto& e : buffer_) records.push_back({e.t, e.category, e.log_psi});
  if (std::fseek(file_.get(), 0, SEEK_END) != 0 ||
      std::fwrite(records.data(), sizeof(SpillRecord), records.size(), file_.get()) != records.size())
    throw Error("failed to write psi history spill file");
  std::fflush(file_.get());
  spilled_ += buffer_.size();
  buffer_.clear();
}

void PsiHistory::push(const PsiEntry& entry) {
  if (buffer_.size() >= cap_) spill();
  buffer_.push_back(entry);
}

std::vector<PsiEntry> PsiHistory::entries() const {
  std::vector<PsiEntry> out;
  out.reserve(size());
  if (spilled_ > 0) {
    std::vector<SpillRecord> records(spilled_);
    if (std::fseek(file_.get(), 0, SEEK_SET) != 0 ||
        std::fread(records.data(), sizeof(SpillRecord), records.size(), file_.get()) != records.size())
      throw Error("failed to read psi history spill file");
    for (const auto& r : records) out.push_back({r.t, static_cast<CategoryIndex>(r.category), r.log_psi});
  }
  out.insert(out.end(), buffer_.begin(), buffer_.end());
  return out;
}

// SequentialDetector ---------------------------------------------------------

SequentialDetector::SequentialDetector(std::shared_ptr<const PriorSpec> prior, DetectorConfig config)
    : prior_(std::move(prior)), config_(std::move(config)) {
  if (!prior_ || !prior_->space) throw ValidationError("detector needs a prior");
  if (!(config_.forgetting > 0.0 && config_.forgetting <= 1.0))
    throw ValidationError("forgetting factor must lie in (0, 1]");
  const auto k = prior_->space->size();
  if (prior_->alpha0.size() != k || prior_->theta0.size() != k)
    throw ValidationError("prior vectors do not match the category space");

  log_theta0_.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(prior_->theta0[i] > 0.0)) throw ValidationError("null probabilities must be strictly positive");
    log_theta0_[i] = std::log(prior_->theta0[i]);
  }
  alpha0_sum_ = prior_->alpha0_sum();
  for (double fp : config_.fp_levels) thresholds_.push_back(log_threshold(fp));

  data_.assign(k, 0.0);
  log_bf_ = std::log(prior_->prior_odds);
  if (config_.keep_history) history_ = PsiHistory(config_.history_cap, config_.spill_path);
}

StepResult SequentialDetector::step(CategoryIndex category) {
  if (category >= data_.size())
    throw ValidationError("category index " + std::to_string(category) + " out of range");

  const double alpha_prev = prior_->alpha0[category] + data_[category];
  const double sum_prev = alpha0_sum_ + data_sum_;
  const double log_psi = std::log(alpha_prev) - log_theta0_[category] - std::log(sum_prev);

  if (config_.forgetting != 1.0) {
    for (double& d : data_) d *= config_.forgetting;
    data_sum_ *= config_.forgetting;
  }
  data_[category] += 1.0;
  data_sum_ += 1.0;
  ++t_;
  if (++since_resum_ == kResumInterval) {
    data_sum_ = std::accumulate(data_.begin(), data_.end(), 0.0);
    since_resum_ = 0;
  }

  log_bf_ += log_psi;
  if (!std::isfinite(log_bf_)) throw NumericFault("log Bayes factor became non-finite at t=" + std::to_string(t_));

  StepResult result{log_psi, log_bf_, {}};
  for (std::size_t j = 0; j < thresholds_.size(); ++j) {
    if (log_bf_ > thresholds_[j] && alarmed_at_.emplace(config_.fp_levels[j], t_).second)
      result.newly_alarmed.push_back(config_.fp_levels[j]);
  }
  if (config_.keep_history) history_.push({t_, category, log_psi});
  return result;
}

double SequentialDetector::posterior_alpha(CategoryIndex i) const {
  return prior_->alpha0.at(i) + data_.at(i);
}

std::vector<double> SequentialDetector::posterior_mean() const {
  std::vector<double> out(data_.size());
  const double sum = alpha0_sum_ + data_sum_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (prior_->alpha0[i] + data_[i]) / sum;
  return out;
}

std::optional<std::uint64_t> SequentialDetector::first_alarm(double fp_level) const {
  auto it = alarmed_at_.find(fp_level);
  if (it == alarmed_at_.end()) return std::nullopt;
  return it->second;
}

// Snapshot -------------------------------------------------------------------

namespace {

constexpr std::string_view kSnapshotFormat = "apidrift.detector";
constexpr int kSnapshotVersion = 1;

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string SequentialDetector::snapshot() const {
  nlohmann::json alarms = nlohmann::json::array();
  for (const auto& [fp, t] : alarmed_at_) alarms.push_back({fp, t});
  nlohmann::json history = nlohmann::json::array();
  if (config_.keep_history) {
    for (const auto& e : history_.entries()) history.push_back({e.t, e.category, e.log_psi});
  }
  nlohmann::json payload = {
      {"prior", to_json(*prior_)},
      {"config",
       {{"fp_levels", config_.fp_levels},
        {"forgetting", config_.forgetting},
        {"keep_history", config_.keep_history},
        {"history_cap", config_.history_cap}}},
      {"t", t_},
      {"data_counts", data_},
      {"data_sum", data_sum_},
      {"since_resum", since_resum_},
      {"log_bf", log_bf_},
      {"alarmed_at", alarms},
      {"history", history},
  };
  const auto body = payload.dump();
  nlohmann::json doc = {{"format", kSnapshotFormat},
                        {"version", kSnapshotVersion},
                        {"checksum", fnv1a_hex(body)},
                        {"payload", std::move(payload)}};
  return doc.dump();
}

SequentialDetector SequentialDetector::restore(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptSnapshot(std::string("snapshot is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format") != kSnapshotFormat) throw CorruptSnapshot("not a detector snapshot");
    if (doc.at("version") != kSnapshotVersion)
      throw CorruptSnapshot("unsupported snapshot version " + doc.at("version").dump());
    const auto& payload = doc.at("payload");
    if (fnv1a_hex(payload.dump()) != doc.at("checksum").get<std::string>())
      throw CorruptSnapshot("snapshot checksum mismatch");

    const auto& cfg = payload.at("config");
    DetectorConfig config;
    config.fp_levels = cfg.at("fp_levels").get<std::vector<double>>();
    config.forgetting = cfg.at("forgetting").get<double>();
    config.keep_history = cfg.at("keep_history").get<bool>();
    config.history_cap = cfg.at("history_cap").get<std::size_t>();

    auto prior = std::make_shared<const PriorSpec>(prior_from_json(payload.at("prior")));
    SequentialDetector d(std::move(prior), std::move(config));
    auto data = payload.at("data_counts").get<std::vector<double>>();
    if (data.size() != d.data_.size()) throw CorruptSnapshot("data count vector has the wrong length");
    d.data_ = std::move(data);
    d.data_sum_ = payload.at("data_sum").get<double>();
    d.since_resum_ = payload.at("since_resum").get<std::uint64_t>();
    d.t_ = payload.at("t").get<std::uint64_t>();
    d.log_bf_ = payload.at("log_bf").get<double>();
    for (const auto& a : payload.at("alarmed_at")) d.alarmed_at_.emplace(a.at(0).get<double>(), a.at(1).get<std::uint64_t>());
    if (d.config_.keep_history) {
      for (const auto& e : payload.at("history"))
        d.history_.push({e.at(0).get<std::uint64_t>(), e.at(1).get<CategoryIndex>(), e.at(2).get<double>()});
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptSnapshot(std::string("malformed snapshot: ") + e.what());
  } catch (const ValidationError& e) {
    throw CorruptSnapshot(std::string("snapshot holds an invalid state: ") + e.what());
  }
}

// Closed form ----------------------------------------------------------------

double log_bf_closed_form(const PriorSpec& prior, std::span<const double> counts) {
  if (counts.size() != prior.alpha0.size()) throw ValidationError("count vector does not match the prior");
  double n = 0.0;
  double sum_alpha = 0.0;
  double log_ratio = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double x = counts[i];
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("counts must be non-negative and finite");
    const double a = prior.alpha0[i];
    n += x;
    sum_alpha += a;
    if (x > 0.0) log_ratio += std::lgamma(a + x) - std::lgamma(a) - x * std::log(prior.theta0[i]);
  }
  return std::lgamma(sum_alpha) - std::lgamma(sum_alpha + n) + log_ratio + std::log(prior.prior_odds);
}

double log_bf_closed_form(const PriorSpec& prior, const FrequencyTable& counts) {
  std::vector<double> x(counts.counts().begin(), counts.counts().end());
  return log_bf_closed_form(prior, x);
}

}  // namespace apidrift
