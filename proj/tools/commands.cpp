#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "apidrift/error.hpp"
#include "apidrift/format.hpp"
#include "apidrift/simulator.hpp"
#include "manifest.hpp"

namespace apidrift::cli {

namespace {

using nlohmann::json;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Writes `dir/name`, registering it with the manifest.
template <typename Fn>
void write_output(RunManifest& manifest, const fs::path& dir, const fs::path& name, Fn&& body) {
  auto out = open_output(dir / name);
  body(out);
  out.flush();
  if (!out) throw Error("write failed: " + (dir / name).string());
  manifest.add_output(name);
}

void write_json_output(RunManifest& manifest, const fs::path& dir, const fs::path& name, const json& j) {
  write_output(manifest, dir, name, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

// Labels such as "(a,b)" contain commas.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

json prior_options_json(const PriorOptions& p) {
  return {{"weight", p.prior_weight}, {"floor", p.floor}, {"odds", p.prior_odds}};
}

void warn_prior(const PriorSpec& prior, std::ostream& log) {
  for (const auto& w : prior_warnings(prior)) log << "warning: " << w << '\n';
}

double strictest(const std::vector<double>& levels) {
  if (levels.empty()) throw UsageError("at least one fp level is required");
  return *std::min_element(levels.begin(), levels.end());
}

}  // namespace

// baseline -------------------------------------------------------------------

int cmd_baseline(const BaselineOptions& options, std::ostream& log) {
  if (options.logs.empty()) throw UsageError("baseline needs at least one log file");
  RunManifest manifest("baseline");

  std::vector<CallRecord> records;
  for (const auto& path : options.logs) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    const auto format = options.format.value_or(log_format_for_path(path.string()));
    try {
      auto part = parse_log(in, format);
      records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    } catch (const ParseError& e) {
      throw Error(path.string() + ":" + e.what());
    }
    manifest.add_input(path);
  }
  if (records.empty()) throw Error("empty baseline: the input logs contain no call records");

  auto apis = options.apis;
  if (apis.empty()) {
    std::set<std::string> seen;
    for (const auto& r : records) {
      seen.insert(r.api);
      if (options.mode == SpaceMode::Pair && r.parent) seen.insert(*r.parent);
    }
    apis.assign(seen.begin(), seen.end());
  }
  auto space = CategorySpace::make_shared(apis, options.mode);

  FrequencyTable table(space);
  for (const auto& r : records) table.add(space->encode(to_observation(r, options.mode)));
  const auto prior = build_prior(table, options.prior);
  warn_prior(prior, log);

  ensure_dir(options.out_dir);
  const auto& dir = options.out_dir;
  write_json_output(manifest, dir, "space.json", to_json(*space));
  write_json_output(manifest, dir, "baseline.json", to_json(table));
  if (options.mode == SpaceMode::Pair)
    write_output(manifest, dir, "baseline_matrix.csv", [&](std::ostream& out) { write_matrix_csv(out, table); });
  write_json_output(manifest, dir, "prior.json", to_json(prior));

  manifest.set_config({{"mode", to_string(options.mode)}, {"apis", apis}, {"prior", prior_options_json(options.prior)}});
  manifest.write(dir);
  log << "baseline: " << table.total() << " records over " << space->size() << " categories -> " << dir.string()
      << '\n';
  return kExitOk;
}

// monitor --------------------------------------------------------------------

namespace {

struct LoadedBaseline {
  PriorSpec prior;
  std::vector<fs::path> inputs;
};

// A baseline directory's prior.json is used as written; a bare table file gets
// a fresh prior from the command-line options.
LoadedBaseline load_baseline(const fs::path& path, const PriorOptions& options) {
  LoadedBaseline out;
  if (fs::is_directory(path)) {
    const auto prior_file = path / "prior.json";
    const auto table_file = path / "baseline.json";
    const auto space_file = path / "space.json";
    if (fs::exists(prior_file)) {
      out.prior = prior_from_json(read_json_file(prior_file));
      out.inputs.push_back(prior_file);
    } else if (fs::exists(table_file)) {
      out.prior = build_prior(frequency_table_from_json(read_json_file(table_file)), options);
      out.inputs.push_back(table_file);
    } else {
      throw Error(path.string() + " holds neither prior.json nor baseline.json");
    }
    if (fs::exists(space_file)) {
      auto space = space_from_json(read_json_file(space_file));
      if (!(*space == *out.prior.space))
        throw Error(space_file.string() + " does not match the baseline's category space");
      out.inputs.push_back(space_file);
    }
    return out;
  }
  if (!fs::exists(path)) throw Error("baseline not found: " + path.string());
  out.prior = build_prior(frequency_table_from_json(read_json_file(path)), options);
  out.inputs.push_back(path);
  return out;
}

}  // namespace

int cmd_monitor(const MonitorOptions& options, std::istream& stdin_stream, std::ostream& log) {
  const double stop_level = strictest(options.fp_levels);
  if (options.k == 0) throw UsageError("k must be at least 1");
  RunManifest manifest("monitor");

  auto loaded = load_baseline(options.baseline, options.prior);
  for (const auto& p : loaded.inputs) manifest.add_input(p);
  auto prior = std::make_shared<const PriorSpec>(std::move(loaded.prior));
  warn_prior(*prior, log);
  const auto& space = *prior->space;
  if (options.forgetting < 1.0)
    log << "warning: forgetting w=" << format_real(options.forgetting)
        << " < 1: the Bayes factor is no longer an exact likelihood ratio and attribution is disabled\n";

  ensure_dir(options.out_dir);
  const auto& dir = options.out_dir;

  DetectorConfig config;
  config.fp_levels = options.fp_levels;
  config.forgetting = options.forgetting;
  config.keep_history = options.history;
  config.spill_path = dir / "psi_history.spill";
  SequentialDetector detector(prior, config);

  std::ifstream file;
  std::istream* in = &stdin_stream;
  if (options.input != "-") {
    file.open(options.input);
    if (!file) throw Error("cannot read " + options.input);
    in = &file;
  }
  const auto format = options.format.value_or(
      options.input == "-" ? LogFormat::Jsonl : log_format_for_path(options.input));
  LogReader reader(*in, format);
  Sha256 digest;
  reader.set_line_observer([&](std::string_view line) {
    digest.update(line);
    digest.update("\n");
  });

  std::ofstream trajectory;
  if (options.history) {
    trajectory = open_output(dir / "trajectory.csv");
    trajectory << "t,category,log_psi,log_bf\n";
    manifest.add_output("trajectory.csv");
  }

  json alarms = json::array();
  bool stopped = false;
  const std::string source = options.input == "-" ? "<stdin>" : options.input;
  try {
    while (auto rec = reader.next()) {
      CategoryIndex idx;
      try {
        idx = space.encode(to_observation(*rec, space.mode()));
      } catch (const UnknownCategory& e) {
        throw Error(source + ":" + std::to_string(reader.line()) + ": unknown API label '" + e.label() + "'");
      } catch (const ValidationError& e) {
        throw Error(source + ":" + std::to_string(reader.line()) + ": " + e.what());
      }
      const auto step = detector.step(idx);
      if (options.history)
        trajectory << detector.t() << ',' << idx << ',' << format_real(step.log_psi) << ','
                   << format_real(step.log_bf) << '\n';
      for (double fp : step.newly_alarmed)
        alarms.push_back({{"fp_level", fp}, {"t", detector.t()}, {"log_bf", step.log_bf},
                          {"threshold", log_threshold(fp)}});
      if (!options.keep_going && detector.first_alarm(stop_level)) {
        stopped = true;
        break;
      }
    }
  } catch (const ParseError& e) {
    throw Error(source + ":" + e.what());
  }
  if (trajectory.is_open()) {
    trajectory.close();
    if (!trajectory) throw Error("write failed: " + (dir / "trajectory.csv").string());
  }
  if (options.input == "-") {
    manifest.add_stream_input("-", digest.hex());
  } else {
    manifest.add_input(options.input);
  }

  json alarm_doc = {{"alarmed", detector.any_alarm()},
                    {"stopped_early", stopped},
                    {"t", detector.t()},
                    {"log_bf", detector.log_bf()},
                    {"alarms", alarms}};
  write_json_output(manifest, dir, "alarm.json", alarm_doc);
  write_json_output(manifest, dir, "prior.json", to_json(*prior));
  write_output(manifest, dir, "state.json", [&](std::ostream& out) { out << detector.snapshot() << '\n'; });

  if (options.history && options.forgetting == 1.0) {
    ReportOptions ro;
    ro.k = options.k;
    write_json_output(manifest, dir, "report.json", to_json(top_k_report(detector, ro), space));
  }

  json params = {{"baseline", options.baseline.string()},
                 {"input", options.input},
                 {"fp_levels", options.fp_levels},
                 {"forgetting", options.forgetting},
                 {"history", options.history},
                 {"continue", options.keep_going},
                 {"k", options.k},
                 {"prior", {{"weight", prior->prior_weight}, {"floor", prior->floor}, {"odds", prior->prior_odds}}}};
  manifest.set_config(params);
  manifest.write(dir);

  if (detector.any_alarm()) {
    const auto& first = alarms.front();
    log << "alarm: t=" << first["t"].get<std::uint64_t>() << " fp=" << format_real(first["fp_level"].get<double>())
        << " log_bf=" << format_real(first["log_bf"].get<double>()) << '\n';
    return kExitAlarm;
  }
  log << "no alarm after " << detector.t() << " observations (log_bf=" << format_real(detector.log_bf()) << ")\n";
  return kExitOk;
}

// simulate -------------------------------------------------------------------

int cmd_simulate(const SimulateOptions& options, std::ostream& log) {
  if (options.jobs == 0) throw UsageError("--jobs must be at least 1");
  json doc;
  ExperimentConfig config{.baseline = FrequencyTable(CategorySpace::make_shared({"_"}, SpaceMode::Single)),
                          .alternate = FrequencyTable(CategorySpace::make_shared({"_"}, SpaceMode::Single)),
                          .schedules = {},
                          .prior = {}};
  try {
    doc = load_config_document(options.config);
    if (options.seed) doc["master_seed"] = *options.seed;
    if (options.chi2) doc["chi2"]["enabled"] = true;
    if (options.trajectories) doc["trajectories"] = true;
    config = experiment_config_from_json(doc, options.config.parent_path().string());
  } catch (const Error& e) {
    throw Error(options.config.string() + ": " + e.what());
  }

  RunManifest manifest("simulate");
  manifest.add_input(options.config);
  for (const char* key : {"baseline", "alternate"}) {
    if (doc.contains(key) && doc[key].is_object() && doc[key].contains("file")) {
      fs::path p = doc[key]["file"].get<std::string>();
      if (p.is_relative()) p = options.config.parent_path() / p;
      manifest.add_input(p);
    }
  }

  const auto table = run_experiment(config, options.jobs);
  ensure_dir(options.out_dir);
  const auto& dir = options.out_dir;
  const auto& levels = table.fp_levels;

  auto rate_csv = [&](auto member) {
    return [&, member](std::ostream& out) {
      out << "pi";
      for (double fp : levels) out << ',' << format_real(fp);
      out << '\n';
      for (const auto& row : table.rows) {
        out << schedule_label(row.schedule);
        for (double r : row.*member) out << ',' << format_real(r);
        out << '\n';
      }
    };
  };
  write_output(manifest, dir, "detection_rates.csv", rate_csv(&ScheduleOutcome::detection_rate));
  if (config.chi2) write_output(manifest, dir, "chi2_rates.csv", rate_csv(&ScheduleOutcome::chi2_rejection_rate));
  write_json_output(manifest, dir, "detection_rates.json", to_json(table));

  write_output(manifest, dir, "first_alarms.csv", [&](std::ostream& out) {
    out << "schedule,rep,final_log_bf";
    for (double fp : levels) out << ",alarm_t@" << format_real(fp);
    if (config.chi2)
      for (double fp : levels) out << ",chi2_t@" << format_real(fp);
    out << '\n';
    auto cell = [](const std::optional<std::uint64_t>& t) { return t ? std::to_string(*t) : std::string(); };
    for (const auto& row : table.rows) {
      const auto label = schedule_label(row.schedule);
      for (std::size_t r = 0; r < row.reps.size(); ++r) {
        const auto& rep = row.reps[r];
        out << label << ',' << r << ',' << format_real(rep.final_log_bf);
        for (const auto& t : rep.first_alarm) out << ',' << cell(t);
        for (const auto& t : rep.chi2_first_rejection) out << ',' << cell(t);
        out << '\n';
      }
    }
  });

  if (config.keep_trajectories) {
    ensure_dir(dir / "trajectories");
    for (std::size_t s = 0; s < table.rows.size(); ++s) {
      const auto& row = table.rows[s];
      write_output(manifest, dir, fs::path("trajectories") / ("schedule_" + std::to_string(s) + ".csv"),
                   [&](std::ostream& out) {
                     out << "t";
                     for (std::size_t r = 0; r < row.reps.size(); ++r) out << ",rep_" << r;
                     out << '\n';
                     for (std::uint64_t t = 0; t < config.draws; ++t) {
                       out << t + 1;
                       for (const auto& rep : row.reps) out << ',' << format_real(rep.trajectory[t]);
                       out << '\n';
                     }
                   });
    }
  }

  manifest.set_config(doc);
  manifest.set_seed(config.master_seed);
  manifest.set("jobs", options.jobs);
  manifest.write(dir);

  log << "simulate: " << table.rows.size() << " schedules x " << config.reps << " reps x " << config.draws
      << " draws -> " << dir.string() << '\n';
  return kExitOk;
}

// attribute ------------------------------------------------------------------

namespace {

struct Trajectory {
  std::vector<PsiEntry> entries;
  std::optional<double> last_log_bf;
};

template <typename T>
T parse_number(std::string_view text, const fs::path& path, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw Error(path.string() + ":" + std::to_string(line) + ": bad number '" + std::string(text) + "'");
  return value;
}

Trajectory read_trajectory(const fs::path& path, std::size_t k) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  Trajectory out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1) {
      if (line != "t,category,log_psi,log_bf") throw Error(path.string() + ": unexpected trajectory header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest = line;
    for (;;) {
      auto pos = rest.find(',');
      f.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (f.size() != 4) throw Error(path.string() + ":" + std::to_string(n) + ": expected 4 fields");
    PsiEntry e;
    e.t = parse_number<std::uint64_t>(f[0], path, n);
    e.category = parse_number<std::size_t>(f[1], path, n);
    e.log_psi = parse_number<double>(f[2], path, n);
    if (e.category >= k) throw Error(path.string() + ":" + std::to_string(n) + ": category out of range");
    out.entries.push_back(e);
    out.last_log_bf = parse_number<double>(f[3], path, n);
  }
  return out;
}

void write_aggregates(RunManifest& manifest, const fs::path& dir, const std::string& metric,
                      const AttributionReport::Aggregates& agg) {
  auto write = [&](const char* position, const std::vector<ApiAggregate>& rows) {
    write_output(manifest, dir, std::string(position) + "_" + metric + ".csv", [&](std::ostream& out) {
      out << "api,abs_sum,positive,negative\n";
      for (const auto& a : rows)
        out << csv_field(a.api) << ',' << format_real(a.abs_sum) << ',' << format_real(a.positive) << ','
            << format_real(a.negative) << '\n';
    });
  };
  write("parent", agg.parent);
  write("child", agg.child);
}

}  // namespace

int cmd_attribute(const AttributeOptions& options, std::ostream& log) {
  if (options.k == 0) throw UsageError("k must be at least 1");
  const auto& run = options.run_dir;
  const auto prior_file = run / "prior.json";
  const auto trajectory_file = run / "trajectory.csv";
  const auto state_file = run / "state.json";
  if (!fs::exists(prior_file)) throw Error(run.string() + " is not a monitor run directory (prior.json missing)");
  if (!fs::exists(trajectory_file))
    throw Error(run.string() +
                " has no psi history; rerun `apidrift monitor` with --history on to enable attribution");

  RunManifest manifest("attribute");
  const auto prior = prior_from_json(read_json_file(prior_file));
  manifest.add_input(prior_file);
  if (fs::exists(state_file)) {
    const auto state = read_json_file(state_file);
    const auto w = state.at("payload").at("config").value("forgetting", 1.0);
    if (w != 1.0) throw Error("attribution is not defined for runs with forgetting w < 1");
    manifest.add_input(state_file);
  }
  const auto trajectory = read_trajectory(trajectory_file, prior.space->size());
  manifest.add_input(trajectory_file);

  ReportOptions ro{options.k, options.metric, options.rho_reference};
  const auto report = build_report(prior, trajectory.entries, ro, trajectory.last_log_bf);
  const auto& space = *prior.space;

  const auto dir = options.out_dir.empty() ? run : options.out_dir;
  ensure_dir(dir);
  write_json_output(manifest, dir, "top_k.json", to_json(report, space));
  write_output(manifest, dir, "top_k.csv", [&](std::ostream& out) {
    out << "rank,category,observed,expected," << to_string(options.metric) << '\n';
    for (std::size_t i = 0; i < report.top_k.size(); ++i) {
      const auto& r = report.top_k[i];
      out << i + 1 << ',' << csv_field(r.label) << ',' << format_real(r.observed) << ',' << format_real(r.expected)
          << ',' << format_real(r.score) << '\n';
    }
  });

  if (space.mode() == SpaceMode::Pair) {
    write_output(manifest, dir, "delta_grid.csv",
                 [&](std::ostream& out) { write_matrix_csv(out, prior.space, report.delta); });
    write_output(manifest, dir, "rho_grid.csv",
                 [&](std::ostream& out) { write_matrix_csv(out, prior.space, report.rho); });
    write_aggregates(manifest, dir, "delta", *report.delta_aggregates);
    write_aggregates(manifest, dir, "rho", *report.rho_aggregates);
  } else {
    write_output(manifest, dir, "scores.csv", [&](std::ostream& out) {
      out << "category,observed,expected,delta,rho\n";
      for (std::size_t i = 0; i < space.size(); ++i)
        out << csv_field(space.label(i)) << ',' << format_real(report.observed[i]) << ','
            << format_real(report.expected[i]) << ',' << format_real(report.delta[i]) << ','
            << format_real(report.rho[i]) << '\n';
    });
    log << "notice: single-mode run; parent/child aggregate files are only produced in pair mode\n";
  }

  manifest.set_config({{"run_dir", run.string()},
                       {"k", options.k},
                       {"metric", to_string(options.metric)},
                       {"rho_reference",
                        options.rho_reference == RhoReference::ExpectedCounts ? "expected" : "prior"}});
  manifest.write(dir);
  log << "attribute: t=" << report.t_stop << " log_bf=" << format_real(report.log_bf) << " -> " << dir.string()
      << '\n';
  return kExitOk;
}

}  // namespace apidrift::cli
