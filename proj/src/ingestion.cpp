#include "apidrift/ingestion.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "apidrift/error.hpp"
#include "apidrift/format.hpp"

namespace apidrift {

namespace {

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(',', start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

LogFormat parse_log_format(std::string_view text) {
  if (text == "jsonl") return LogFormat::Jsonl;
  if (text == "csv") return LogFormat::Csv;
  throw ValidationError("unknown log format '" + std::string(text) + "' (expected jsonl|csv)");
}

LogFormat log_format_for_path(std::string_view path) {
  return path.ends_with(".csv") ? LogFormat::Csv : LogFormat::Jsonl;
}

LogReader::LogReader(std::istream& in, LogFormat format) : in_(in), format_(format) {}

CallRecord LogReader::parse_jsonl(const std::string& text) const {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_, "record is not a JSON object");

  CallRecord rec;
  auto api = j.find("api");
  if (api == j.end() || !api->is_string()) throw ParseError(line_, "missing string field \"api\"");
  rec.api = api->get<std::string>();
  if (rec.api.empty()) throw ParseError(line_, "empty \"api\"");

  auto ts = j.find("ts");
  if (ts == j.end() || !ts->is_number()) throw ParseError(line_, "missing numeric field \"ts\"");
  rec.ts = ts->get<double>();

  if (auto parent = j.find("parent"); parent != j.end() && !parent->is_null()) {
    if (!parent->is_string()) throw ParseError(line_, "\"parent\" must be a string or null");
    auto p = parent->get<std::string>();
    if (!p.empty()) rec.parent = std::move(p);
  }
  return rec;
}

CallRecord LogReader::parse_csv(const std::string& text) const {
  auto fields = split_commas(text);
  if (fields.size() != 3)
    throw ParseError(line_, "expected 3 CSV fields (ts,api,parent), got " + std::to_string(fields.size()));
  CallRecord rec;
  try {
    std::size_t used = 0;
    rec.ts = std::stod(fields[0], &used);
    if (used != fields[0].size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ParseError(line_, "bad timestamp '" + fields[0] + "'");
  }
  if (fields[1].empty()) throw ParseError(line_, "missing api");
  rec.api = std::move(fields[1]);
  if (!fields[2].empty()) rec.parent = std::move(fields[2]);
  return rec;
}

std::optional<CallRecord> LogReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (observer_) observer_(text);
    strip_cr(text);
    if (format_ == LogFormat::Csv && !header_seen_) {
      if (text != "ts,api,parent") throw ParseError(line_, "CSV header must be 'ts,api,parent'");
      header_seen_ = true;
      continue;
    }
    if (is_blank(text)) continue;
    return format_ == LogFormat::Jsonl ? parse_jsonl(text) : parse_csv(text);
  }
  return std::nullopt;
}

std::vector<CallRecord> parse_log(std::istream& in, LogFormat format) {
  LogReader reader(in, format);
  std::vector<CallRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

Observation to_observation(const CallRecord& record, SpaceMode mode) {
  if (mode == SpaceMode::Single) return Observation::single(record.api);
  return Observation::pair(record.parent, record.api);
}

std::vector<Observation> to_observations(std::span<const CallRecord> records, SpaceMode mode) {
  std::vector<Observation> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_observation(r, mode));
  return out;
}

// FrequencyTable -------------------------------------------------------------

FrequencyTable::FrequencyTable(SpacePtr space) : space_(std::move(space)) {
  if (!space_) throw ValidationError("frequency table needs a category space");
  counts_.assign(space_->size(), 0);
}

FrequencyTable::FrequencyTable(SpacePtr space, std::vector<std::uint64_t> counts)
    : space_(std::move(space)), counts_(std::move(counts)) {
  if (!space_) throw ValidationError("frequency table needs a category space");
  if (counts_.size() != space_->size())
    throw ValidationError("count vector has " + std::to_string(counts_.size()) + " entries, space has " +
                          std::to_string(space_->size()));
  for (auto c : counts_) total_ += c;
}

void FrequencyTable::add(CategoryIndex i, std::uint64_t n) {
  if (i >= counts_.size()) throw ValidationError("category index out of range");
  counts_[i] += n;
  total_ += n;
}

FrequencyTable& FrequencyTable::operator+=(const FrequencyTable& other) {
  if (!(*space_ == *other.space_)) throw ValidationError("cannot merge tables over different spaces");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  return *this;
}

std::vector<double> FrequencyTable::normalized() const {
  std::vector<double> out(counts_.size(), 0.0);
  if (total_ == 0) return out;
  const auto n = static_cast<double>(total_);
  for (std::size_t i = 0; i < counts_.size(); ++i) out[i] = static_cast<double>(counts_[i]) / n;
  return out;
}

FrequencyTable accumulate(const SpacePtr& space, std::span<const Observation> observations) {
  FrequencyTable table(space);
  for (const auto& obs : observations) table.add(space->encode(obs));
  return table;
}

// Windows --------------------------------------------------------------------

namespace {

WindowedHistogram finish_window(std::size_t index, FrequencyTable raw, bool partial) {
  auto normalized = raw.normalized();
  return {index, std::move(raw), std::move(normalized), partial};
}

}  // namespace

std::vector<WindowedHistogram> window_histograms(const SpacePtr& space,
                                                 std::span<const Observation> observations,
                                                 std::size_t window_size) {
  if (window_size == 0) throw ValidationError("window size must be positive");
  std::vector<WindowedHistogram> out;
  for (std::size_t start = 0; start < observations.size(); start += window_size) {
    auto len = std::min(window_size, observations.size() - start);
    out.push_back(finish_window(out.size(), accumulate(space, observations.subspan(start, len)),
                                len < window_size));
  }
  return out;
}

std::vector<WindowedHistogram> window_histograms(const SpacePtr& space,
                                                 std::span<const CallRecord> records,
                                                 const WindowSpec& spec) {
  if (!(spec.size > 0) || !std::isfinite(spec.size)) throw ValidationError("window size must be positive");
  if (spec.kind == WindowSpec::Kind::Count) {
    if (spec.size != std::floor(spec.size)) throw ValidationError("count window size must be an integer");
    auto obs = to_observations(records, space->mode());
    return window_histograms(space, obs, static_cast<std::size_t>(spec.size));
  }

  std::vector<WindowedHistogram> out;
  if (records.empty()) return out;
  const double origin = records.front().ts;
  FrequencyTable current(space);
  std::size_t current_index = 0;
  double last_ts = origin;
  for (const auto& rec : records) {
    if (rec.ts < last_ts) throw ValidationError("time windows need non-decreasing timestamps");
    last_ts = rec.ts;
    auto w = static_cast<std::size_t>(std::floor((rec.ts - origin) / spec.size));
    while (current_index < w) {
      out.push_back(finish_window(current_index, std::move(current), false));
      current = FrequencyTable(space);
      ++current_index;
    }
    current.add(space->encode(to_observation(rec, space->mode())));
  }
  out.push_back(finish_window(current_index, std::move(current), true));
  return out;
}

// Serialization --------------------------------------------------------------

nlohmann::json to_json(const FrequencyTable& table) {
  auto j = to_json(*table.space());
  j["counts"] = std::vector<std::uint64_t>(table.counts().begin(), table.counts().end());
  return j;
}

FrequencyTable frequency_table_from_json(const nlohmann::json& j) {
  auto space = space_from_json(j);
  try {
    return FrequencyTable(space, j.at("counts").get<std::vector<std::uint64_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid frequency table JSON: ") + e.what());
  }
}

void write_matrix_csv(std::ostream& out, const SpacePtr& space, std::span<const double> values) {
  if (space->mode() != SpaceMode::Pair) throw ValidationError("matrix CSV is only defined for pair mode");
  if (values.size() != space->size()) throw ValidationError("matrix CSV value count does not match space");
  const auto p = space->positions();
  out << "parent\\child";
  for (std::size_t c = 0; c < p; ++c) out << ',' << space->position_label(c);
  out << '\n';
  for (std::size_t r = 0; r < p; ++r) {
    out << space->position_label(r);
    for (std::size_t c = 0; c < p; ++c) out << ',' << format_real(values[r * p + c]);
    out << '\n';
  }
}

void write_matrix_csv(std::ostream& out, const FrequencyTable& table) {
  std::vector<double> values(table.counts().begin(), table.counts().end());
  write_matrix_csv(out, table.space(), values);
}

}  // namespace apidrift
