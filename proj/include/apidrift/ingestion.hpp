#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "apidrift/category_space.hpp"

namespace apidrift {

struct CallRecord {
  double ts = 0.0;
  std::string api;
  std::optional<std::string> parent;  // empty = no parent

  friend bool operator==(const CallRecord&, const CallRecord&) = default;
};

enum class LogFormat { Jsonl, Csv };

LogFormat parse_log_format(std::string_view text);
/// ".csv" selects CSV, anything else JSONL.
LogFormat log_format_for_path(std::string_view path);

/// Pull parser over a log stream; yields one record per non-blank line.
/// CSV input must start with the header `ts,api,parent`.
class LogReader {
 public:
  LogReader(std::istream& in, LogFormat format);

  std::optional<CallRecord> next();
  std::size_t line() const noexcept { return line_; }

  /// Called with every raw line read (header and blank lines included).
  void set_line_observer(std::function<void(std::string_view)> observer) { observer_ = std::move(observer); }

 private:
  CallRecord parse_jsonl(const std::string& text) const;
  CallRecord parse_csv(const std::string& text) const;

  std::istream& in_;
  LogFormat format_;
  std::size_t line_ = 0;
  bool header_seen_ = false;
  std::function<void(std::string_view)> observer_;
};

std::vector<CallRecord> parse_log(std::istream& in, LogFormat format);

Observation to_observation(const CallRecord& record, SpaceMode mode);
std::vector<Observation> to_observations(std::span<const CallRecord> records, SpaceMode mode);

/// Integer counts per category. Merging is an elementwise sum.
class FrequencyTable {
 public:
  explicit FrequencyTable(SpacePtr space);
  FrequencyTable(SpacePtr space, std::vector<std::uint64_t> counts);

  const SpacePtr& space() const noexcept { return space_; }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::uint64_t count(CategoryIndex i) const { return counts_.at(i); }
  std::uint64_t total() const noexcept { return total_; }
  std::size_t size() const noexcept { return counts_.size(); }

  void add(CategoryIndex i, std::uint64_t n = 1);
  FrequencyTable& operator+=(const FrequencyTable& other);

  /// counts / total; all zeros when total is 0.
  std::vector<double> normalized() const;

  friend bool operator==(const FrequencyTable& a, const FrequencyTable& b) {
    return *a.space_ == *b.space_ && a.counts_ == b.counts_;
  }

 private:
  SpacePtr space_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

FrequencyTable accumulate(const SpacePtr& space, std::span<const Observation> observations);

struct WindowSpec {
  enum class Kind { Count, Time };
  Kind kind = Kind::Count;
  double size = 1000;  // observations for Count, timestamp units for Time
};

struct WindowedHistogram {
  std::size_t window_index = 0;
  FrequencyTable raw;
  std::vector<double> normalized;
  bool partial = false;
};

/// Consecutive non-overlapping count windows; the trailing short window is
/// emitted with `partial` set.
std::vector<WindowedHistogram> window_histograms(const SpacePtr& space,
                                                 std::span<const Observation> observations,
                                                 std::size_t window_size);

/// Count or time windows over timestamped records. Time windows start at the
/// first record's timestamp, are half-open, and include empty gap windows; the
/// last one is always flagged partial.
std::vector<WindowedHistogram> window_histograms(const SpacePtr& space,
                                                 std::span<const CallRecord> records,
                                                 const WindowSpec& spec);

nlohmann::json to_json(const FrequencyTable& table);
FrequencyTable frequency_table_from_json(const nlohmann::json& j);

/// Pair-mode dense matrix: rows are parents, columns children, in position
/// order with the null element last. The header cell is "parent\child".
void write_matrix_csv(std::ostream& out, const SpacePtr& space, std::span<const double> values);
void write_matrix_csv(std::ostream& out, const FrequencyTable& table);

}  // namespace apidrift
