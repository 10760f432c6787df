#include <iostream>

#include <CLI11.hpp>

#include "apidrift/error.hpp"
#include "apidrift/version.hpp"
#include "commands.hpp"

namespace {

using namespace apidrift;
using namespace apidrift::cli;

void add_prior_flags(CLI::App& cmd, PriorOptions& prior) {
  cmd.add_option("--prior-weight", prior.prior_weight, "Total pseudo-count for the baseline's observed cells")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--floor", prior.floor, "Pseudo-count for cells the baseline never saw")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--prior-odds", prior.prior_odds, "Prior odds of drift versus no drift")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

std::optional<LogFormat> format_from(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return parse_log_format(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian drift detection for API call logs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  BaselineOptions baseline;
  std::string mode = "pair";
  std::string baseline_format;
  auto* b = app.add_subcommand("baseline", "Build a baseline frequency table and prior from call logs");
  b->add_option("logs", baseline.logs, "Log files (JSONL or CSV)")->required()->check(CLI::ExistingFile);
  b->add_option("--mode", mode, "Category space: single APIs or parent/child pairs")
      ->check(CLI::IsMember({"single", "pair"}))
      ->capture_default_str();
  b->add_option("--format", baseline_format, "Log format; guessed from the extension when omitted")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  b->add_option("--apis", baseline.apis, "Fixed API list (default: every name seen, sorted)")->delimiter(',');
  add_prior_flags(*b, baseline.prior);
  b->add_option("-o,--out", baseline.out_dir, "Output directory")->required()->envname("APIDRIFT_OUTPUT_DIR");

  MonitorOptions monitor;
  std::string history = "on";
  std::string monitor_format;
  auto* m = app.add_subcommand("monitor", "Stream observations through the sequential detector");
  m->add_option("-b,--baseline", monitor.baseline, "Baseline directory or frequency-table JSON")->required();
  m->add_option("-i,--input", monitor.input, "Log file, or - for stdin")->capture_default_str();
  m->add_option("--format", monitor_format, "Log format (default: from extension, JSONL for stdin)")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  m->add_option("--fp", monitor.fp_levels, "False-positive levels")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0).description("in (0, 1)"))
      ->default_str("0.1,0.05,0.01");
  m->add_option("--forget", monitor.forgetting, "Forgetting weight w in (0, 1]")->capture_default_str();
  m->add_option("--history", history, "Keep the psi history needed for attribution")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  m->add_flag("--continue", monitor.keep_going, "Keep reading after the first alarm");
  m->add_option("-k", monitor.k, "Categories in the attribution report")->capture_default_str();
  add_prior_flags(*m, monitor.prior);
  m->add_option("-o,--out", monitor.out_dir, "Output directory")->required()->envname("APIDRIFT_OUTPUT_DIR");

  SimulateOptions simulate;
  auto* s = app.add_subcommand("simulate", "Run a drift-detection simulation experiment");
  s->add_option("config", simulate.config, "Experiment config (TOML or JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--out", simulate.out_dir, "Output directory")->required()->envname("APIDRIFT_OUTPUT_DIR");
  s->add_option("-j,--jobs", simulate.jobs, "Worker threads")->envname("APIDRIFT_JOBS")->capture_default_str();
  s->add_option("--seed", simulate.seed, "Override the config's master_seed");
  s->add_flag("--chi2", simulate.chi2, "Also run the sequential chi-squared comparator");
  s->add_flag("--trajectories", simulate.trajectories, "Write per-rep log BF trajectories");

  AttributeOptions attribute;
  std::string metric = "delta";
  std::string rho_reference = "expected";
  auto* a = app.add_subcommand("attribute", "Rank the categories behind a monitor run's alarm");
  a->add_option("run_dir", attribute.run_dir, "Monitor output directory")->required()->check(CLI::ExistingDirectory);
  a->add_option("-k", attribute.k, "Number of top categories")->capture_default_str();
  a->add_option("--metric", metric, "Ranking score")->check(CLI::IsMember({"delta", "rho"}))->capture_default_str();
  a->add_option("--rho-reference", rho_reference, "Reference counts for rho: expected (t * theta0) or prior (alpha0)")
      ->check(CLI::IsMember({"expected", "prior"}))
      ->capture_default_str();
  a->add_option("-o,--out", attribute.out_dir, "Output directory (default: the run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*b) {
      baseline.mode = parse_space_mode(mode);
      baseline.format = format_from(baseline_format);
      return cmd_baseline(baseline, std::cerr);
    }
    if (*m) {
      monitor.history = history == "on";
      monitor.format = format_from(monitor_format);
      return cmd_monitor(monitor, std::cin, std::cerr);
    }
    if (*s) return cmd_simulate(simulate, std::cerr);
    if (*a) {
      attribute.metric = parse_metric(metric);
      attribute.rho_reference = parse_rho_reference(rho_reference);
      return cmd_attribute(attribute, std::cerr);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitError;
}
