#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "apidrift/attribution.hpp"
#include "apidrift/ingestion.hpp"
#include "apidrift/prior.hpp"

namespace apidrift::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAlarm = 2;

/// Thrown for bad flag combinations; main() maps it to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BaselineOptions {
  std::vector<fs::path> logs;
  SpaceMode mode = SpaceMode::Pair;
  std::optional<LogFormat> format;  // guessed from each file's extension when unset
  std::vector<std::string> apis;    // sorted set of observed names when empty
  PriorOptions prior;
  fs::path out_dir;
};

struct MonitorOptions {
  fs::path baseline;  // baseline directory, or a frequency-table JSON file
  std::string input = "-";
  std::optional<LogFormat> format;
  std::vector<double> fp_levels{0.10, 0.05, 0.01};
  double forgetting = 1.0;
  bool history = true;
  bool keep_going = false;  // --continue
  PriorOptions prior;
  std::size_t k = 3;
  fs::path out_dir;
};

struct SimulateOptions {
  fs::path config;
  fs::path out_dir;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  bool chi2 = false;
  bool trajectories = false;
};

struct AttributeOptions {
  fs::path run_dir;
  std::size_t k = 3;
  Metric metric = Metric::Delta;
  RhoReference rho_reference = RhoReference::ExpectedCounts;
  fs::path out_dir;  // defaults to run_dir
};

int cmd_baseline(const BaselineOptions& options, std::ostream& log);
int cmd_monitor(const MonitorOptions& options, std::istream& stdin_stream, std::ostream& log);
int cmd_simulate(const SimulateOptions& options, std::ostream& log);
int cmd_attribute(const AttributeOptions& options, std::ostream& log);

/// Experiment config as JSON; `.json` files are read directly, anything else
/// as TOML.
nlohmann::json load_config_document(const fs::path& path);

}  // namespace apidrift::cli
