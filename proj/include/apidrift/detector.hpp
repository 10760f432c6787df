#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apidrift/prior.hpp"

namespace apidrift {

/// Alarm threshold on the log Bayes factor for a false-positive level: ln(1/fp).
double log_threshold(double fp_level);

struct DetectorConfig {
  /// Each level gets its own latched alarm when log BF > ln(1/level).
  std::vector<double> fp_levels{0.10, 0.05, 0.01};
  /// Weight w in (0, 1] applied to past data counts at every step. 1 = no forgetting.
  double forgetting = 1.0;
  bool keep_history = false;
  /// History entries kept in memory before older ones are spilled to disk.
  std::size_t history_cap = std::size_t{1} << 20;
  /// Spill file; a temporary file is used when empty.
  std::filesystem::path spill_path;
};

struct PsiEntry {
  std::uint64_t t = 0;
  CategoryIndex category = 0;
  double log_psi = 0.0;

  friend bool operator==(const PsiEntry&, const PsiEntry&) = default;
};

/// Append-only ln(psi) log. Holds at most `cap` entries in memory; older
/// entries move to a binary spill file.
class PsiHistory {
 public:
  PsiHistory() = default;
  PsiHistory(std::size_t cap, std::filesystem::path spill_path);

  PsiHistory(PsiHistory&&) noexcept = default;
  PsiHistory& operator=(PsiHistory&&) noexcept = default;

  void push(const PsiEntry& entry);
  std::uint64_t size() const noexcept { return spilled_ + buffer_.size(); }
  std::uint64_t spilled() const noexcept { return spilled_; }
  /// Every entry in order, spilled ones included.
  std::vector<PsiEntry> entries() const;

 private:
  struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
  };

  void spill();

  std::size_t cap_ = std::size_t{1} << 20;
  std::filesystem::path spill_path_;
  std::unique_ptr<std::FILE, FileCloser> file_;
  std::vector<PsiEntry> buffer_;
  std::uint64_t spilled_ = 0;
};

struct StepResult {
  double log_psi = 0.0;
  double log_bf = 0.0;
  std::vector<double> newly_alarmed;
};

/// Sequential Dirichlet-multinomial Bayes-factor test against a fixed null.
/// The posterior is alpha0 + data_counts; each step multiplies the Bayes
/// factor by the ratio of the observed category's posterior predictive
/// probability to its null probability. Single writer.
class SequentialDetector {
 public:
  SequentialDetector(std::shared_ptr<const PriorSpec> prior, DetectorConfig config = {});

  SequentialDetector(SequentialDetector&&) noexcept = default;
  SequentialDetector& operator=(SequentialDetector&&) noexcept = default;

  StepResult step(CategoryIndex category);

  const PriorSpec& prior() const noexcept { return *prior_; }
  const std::shared_ptr<const PriorSpec>& prior_ptr() const noexcept { return prior_; }
  const DetectorConfig& config() const noexcept { return config_; }

  std::uint64_t t() const noexcept { return t_; }
  double log_bf() const noexcept { return log_bf_; }
  std::span<const double> data_counts() const noexcept { return data_; }
  double data_sum() const noexcept { return data_sum_; }
  double posterior_alpha(CategoryIndex i) const;
  std::vector<double> posterior_mean() const;

  /// First crossing time per fp level; entries are never removed.
  const std::map<double, std::uint64_t>& alarmed_at() const noexcept { return alarmed_at_; }
  std::optional<std::uint64_t> first_alarm(double fp_level) const;
  bool any_alarm() const noexcept { return !alarmed_at_.empty(); }

  bool has_history() const noexcept { return config_.keep_history; }
  const PsiHistory& history() const noexcept { return history_; }

  /// Versioned, checksummed JSON. restore(snapshot()) continues bit-identically.
  std::string snapshot() const;
  static SequentialDetector restore(std::string_view bytes);

  static constexpr std::uint64_t kResumInterval = std::uint64_t{1} << 16;

 private:
  std::shared_ptr<const PriorSpec> prior_;
  DetectorConfig config_;
  std::vector<double> log_theta0_;
  double alpha0_sum_ = 0.0;
  std::vector<double> thresholds_;

  std::vector<double> data_;
  double data_sum_ = 0.0;
  std::uint64_t since_resum_ = 0;
  std::uint64_t t_ = 0;
  double log_bf_ = 0.0;
  std::map<double, std::uint64_t> alarmed_at_;
  PsiHistory history_;
};

/// ln BF from the Dirichlet-multinomial marginal against the null multinomial,
/// computed with log-gamma. Equals the recursion's final log BF when w = 1.
double log_bf_closed_form(const PriorSpec& prior, std::span<const double> counts);
double log_bf_closed_form(const PriorSpec& prior, const FrequencyTable& counts);

}  // namespace apidrift
