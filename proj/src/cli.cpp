#include "flakeprobe/cli.hpp"

#include <fnmatch.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "flakeprobe/errors.hpp"
#include "flakeprobe/report.hpp"

namespace flakeprobe {

namespace {

// Raised for bad flags, names, or input files.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string scenario;
  std::string params;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = false) {
  cmd->add_option("--scenario", c.scenario, "Catalogue scenario name")->required();
  cmd->add_option("--params", c.params, "Scenario parameter file (JSON)");
  auto* out = cmd->add_option("--out", c.out, "Output path (default: stdout)");
  if (needs_out) out->required();
}

Scenario load(const Common& c) {
  try {
    if (c.params.empty()) return make_scenario(c.scenario);
    ScenarioFile file = load_scenario_file(c.params);
    if (file.app != c.scenario) {
      throw UsageError("parameter file is for " + file.app + ", not " + c.scenario);
    }
    return make_scenario(file);
  } catch (const UnknownName& ex) {
    throw UsageError(ex.what());
  } catch (const ValidationError& ex) {
    throw UsageError(ex.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json read_json(const std::string& path) {
  try {
    return parse_json(read_file(path));
  } catch (const ValidationError& ex) {
    throw UsageError(path + ": " + ex.what());
  }
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct DetectSettings {
  std::optional<int> budget_runs;
  int parallel = 1;
  int suspend_guard = 8;
  int with_rerun = 0;
  bool with_oracle = false;
  std::uint64_t seed = 0;
};

DetectionReport run_detection(const Scenario& s, const DetectSettings& cfg) {
  DetectOptions opts;
  opts.budget_runs = cfg.budget_runs;
  opts.parallel = cfg.parallel;
  opts.suspend_guard = cfg.suspend_guard;

  DetectionReport r;
  r.scenario = s.name;
  r.test = s.test.name;
  r.expected = s.expected;
  r.category = s.category;
  r.sync_op_count = sync_op_count(s.test);
  const auto start = std::chrono::steady_clock::now();
  r.verdict = detect(s.app, s.test, opts);
  r.wall_seconds = seconds_since(start);
  if (cfg.with_rerun > 0) r.rerun = rerun(s.app, s.test, cfg.with_rerun, cfg.seed);
  if (cfg.with_oracle) r.oracle = enumerate_feasible_orders(s.app, s.test);
  return r;
}

std::string witness_line(const Verdict& v) {
  if (!v.witness) return {};
  std::string line = "witness: " + describe(*v.witness);
  if (v.failure) {
    line += " fails statement " + std::to_string(v.failure->stmt) + ": " + v.failure->message;
  }
  return line + "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concurrency flaky-test detector for scripted event-driven apps", "flakeprobe"};
  app.require_subcommand(1);

  Common trace_c;
  auto* trace_cmd = app.add_subcommand("trace", "Map statements to the events they cause");
  add_common(trace_cmd, trace_c);

  Common bounds_c;
  std::string bounds_trace;
  int bounds_guard = 8;
  bool bounds_single = false;
  auto* bounds_cmd = app.add_subcommand("bounds", "Identify async schedule spaces");
  add_common(bounds_cmd, bounds_c);
  bounds_cmd->add_option("--trace", bounds_trace, "Trace file from `trace`")->required();
  bounds_cmd->add_option("--suspend-guard", bounds_guard, "Max simultaneously suspended threads")
      ->check(CLI::PositiveNumber);
  bounds_cmd->add_flag("--no-optimize", bounds_single, "Identify one event per run");

  Common explore_c;
  std::string explore_bounds;
  std::optional<int> explore_budget;
  int explore_parallel = 1;
  auto* explore_cmd = app.add_subcommand("explore", "Run schedule directives");
  add_common(explore_cmd, explore_c);
  explore_cmd->add_option("--bounds", explore_bounds, "Bounds file from `bounds`")->required();
  explore_cmd->add_option("--budget-runs", explore_budget)->check(CLI::PositiveNumber);
  explore_cmd->add_option("--parallel", explore_parallel)->check(CLI::PositiveNumber);

  Common detect_c;
  DetectSettings detect_cfg;
  std::string detect_format = "json";
  bool detect_no_timing = false;
  auto* detect_cmd = app.add_subcommand("detect", "Full detection pipeline");
  add_common(detect_cmd, detect_c);
  detect_cmd->add_option("--budget-runs", detect_cfg.budget_runs)->check(CLI::PositiveNumber);
  detect_cmd->add_option("--parallel", detect_cfg.parallel)->check(CLI::PositiveNumber);
  detect_cmd->add_option("--suspend-guard", detect_cfg.suspend_guard)
      ->check(CLI::PositiveNumber);
  detect_cmd->add_option("--with-rerun", detect_cfg.with_rerun, "Also run RERUN with K attempts")
      ->check(CLI::NonNegativeNumber);
  detect_cmd->add_flag("--with-oracle", detect_cfg.with_oracle);
  detect_cmd->add_option("--seed", detect_cfg.seed, "Timing seed for RERUN");
  detect_cmd->add_option("--format", detect_format)->check(CLI::IsMember({"json", "text"}));
  detect_cmd->add_flag("--no-timing", detect_no_timing, "Omit wall-clock time");

  Common rerun_c;
  int rerun_k = 20;
  std::uint64_t rerun_seed = 0;
  auto* rerun_cmd = app.add_subcommand("rerun", "RERUN baseline");
  add_common(rerun_cmd, rerun_c);
  rerun_cmd->add_option("--k", rerun_k)->check(CLI::PositiveNumber);
  rerun_cmd->add_option("--seed", rerun_seed);

  Common oracle_c;
  std::uint64_t oracle_cap = 12;
  auto* oracle_cmd = app.add_subcommand("oracle", "Enumerate every feasible delivery order");
  add_common(oracle_cmd, oracle_c);
  oracle_cmd->add_option("--event-cap", oracle_cap)->check(CLI::PositiveNumber);

  std::string suite_filter = "*";
  std::string suite_out;
  DetectSettings suite_cfg;
  suite_cfg.with_rerun = 20;
  suite_cfg.with_oracle = true;
  bool suite_no_timing = false;
  auto* suite_cmd = app.add_subcommand("suite", "Detect over the whole catalogue");
  suite_cmd->add_option("--filter", suite_filter, "Glob over scenario names");
  suite_cmd->add_option("--out", suite_out, "Report directory")->required();
  suite_cmd->add_option("--seed", suite_cfg.seed, "Timing seed for RERUN");
  suite_cmd->add_option("--with-rerun", suite_cfg.with_rerun)->check(CLI::NonNegativeNumber);
  suite_cmd->add_option("--budget-runs", suite_cfg.budget_runs)->check(CLI::PositiveNumber);
  suite_cmd->add_flag("--no-timing", suite_no_timing, "Omit wall-clock time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return 1;
  }

  try {
    if (*trace_cmd) {
      const Scenario s = load(trace_c);
      emit(trace_c.out, dump(to_json(trace(s.app, s.test))), out);
    } else if (*bounds_cmd) {
      const Scenario s = load(bounds_c);
      const TraceMap tm = trace_from_json(read_json(bounds_trace));
      BoundsOptions opts;
      opts.optimize = !bounds_single;
      opts.suspend_guard = bounds_guard;
      emit(bounds_c.out, dump(to_json(identify_schedule_spaces(s.app, s.test, tm, opts))), out);
    } else if (*explore_cmd) {
      const Scenario s = load(explore_c);
      const BoundsReport b = bounds_from_json(read_json(explore_bounds));
      Verdict v;
      v.phases.trace = 1;
      v.phases.bounds = runs_needed(b);
      v.runs_used = 1 + runs_needed(b);
      std::size_t asyncs = b.spaces.size();
      int budget = default_budget(b.spaces, s.test.size(), asyncs);
      if (explore_budget) budget = std::min(budget, *explore_budget);
      v = explore(s.app, s.test, enumerate_directives(b.spaces, s.test.size()), budget,
                  explore_parallel, std::move(v));
      emit(explore_c.out, dump(verdict_json(s.test.name, v, s.category)), out);
    } else if (*detect_cmd) {
      const Scenario s = load(detect_c);
      const DetectionReport r = run_detection(s, detect_cfg);
      if (detect_format == "json") {
        emit(detect_c.out, dump(to_json(r, !detect_no_timing)), out);
      } else {
        emit(detect_c.out, render_table({r}, !detect_no_timing) + witness_line(r.verdict), out);
      }
    } else if (*rerun_cmd) {
      const Scenario s = load(rerun_c);
      emit(rerun_c.out, dump(to_json(rerun(s.app, s.test, rerun_k, rerun_seed))), out);
    } else if (*oracle_cmd) {
      const Scenario s = load(oracle_c);
      OracleOptions opts;
      opts.event_cap = oracle_cap;
      emit(oracle_c.out, dump(to_json(enumerate_feasible_orders(s.app, s.test, opts))), out);
    } else if (*suite_cmd) {
      std::filesystem::create_directories(suite_out);
      std::vector<DetectionReport> reports;
      for (const auto& name : scenario_names()) {
        if (fnmatch(suite_filter.c_str(), name.c_str(), 0) != 0) continue;
        reports.push_back(run_detection(make_scenario(name), suite_cfg));
        const auto path = std::filesystem::path(suite_out) / (name + ".json");
        emit(path.string(), dump(to_json(reports.back(), !suite_no_timing)), out);
      }
      if (reports.empty()) throw UsageError("no scenario matches " + suite_filter);
      const std::string table = render_table(reports, !suite_no_timing);
      emit((std::filesystem::path(suite_out) / "summary.txt").string(), table, out);
      out << table;
    }
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace flakeprobe
