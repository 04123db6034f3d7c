#include "flakeprobe/report.hpp"

#include <cstdio>
#include <sstream>

#include "flakeprobe/errors.hpp"

namespace flakeprobe {

namespace {

Json target_json(std::optional<int> stmt) {
  if (stmt) return *stmt;
  return "end";
}

std::optional<int> target_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "end") throw ValidationError("bad statement bound");
    return std::nullopt;
  }
  return j.get<int>();
}

BoundEvidence evidence_from_string(const std::string& s) {
  if (s == "idle-sync") return BoundEvidence::IdleSync;
  if (s == "timed-wait") return BoundEvidence::TimedWait;
  return BoundEvidence::TestEnd;
}

template <typename F>
auto schema_guard(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed ") + what + ": " + ex.what());
  }
}

}  // namespace

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("not JSON: ") + ex.what());
  }
}

Json to_json(const TraceMap& tm) {
  Json out = Json::array();
  for (const auto& entry : tm.entries) {
    Json events = Json::array();
    for (const auto& ref : entry.events) {
      events.push_back({{"sig", ref.identity.method_sig_seq},
                        {"async", ref.identity.is_async},
                        {"occ", ref.occurrence}});
    }
    out.push_back({{"stmt", entry.stmt}, {"events", std::move(events)}});
  }
  return out;
}

TraceMap trace_from_json(const Json& j) {
  return schema_guard("trace", [&] {
    TraceMap tm;
    for (const auto& e : j) {
      TraceEntry entry;
      entry.stmt = e.at("stmt").get<int>();
      for (const auto& ev : e.at("events")) {
        EventRef ref;
        ref.identity.stmt_ordinal = entry.stmt;
        ref.identity.method_sig_seq = ev.at("sig").get<HandlerPath>();
        ref.identity.is_async = ev.at("async").get<bool>();
        ref.occurrence = ev.at("occ").get<int>();
        entry.events.push_back(std::move(ref));
      }
      tm.entries.push_back(std::move(entry));
    }
    return tm;
  });
}

Json to_json(const BoundsReport& report) {
  Json spaces = Json::array();
  for (const auto& s : report.spaces) {
    spaces.push_back({{"sig", s.event.identity.method_sig_seq},
                      {"occ", s.event.occurrence},
                      {"n", s.lower_stmt},
                      {"m", target_json(s.upper_stmt)},
                      {"evidence", to_string(s.evidence)}});
  }
  return {{"spaces", std::move(spaces)},
          {"runs", report.identification_runs},
          {"reruns", report.grouped_reruns}};
}

BoundsReport bounds_from_json(const Json& j) {
  return schema_guard("bounds report", [&] {
    BoundsReport report;
    for (const auto& s : j.at("spaces")) {
      ScheduleSpace space;
      space.lower_stmt = s.at("n").get<int>();
      space.event.identity = {space.lower_stmt, s.at("sig").get<HandlerPath>(), true};
      space.event.occurrence = s.at("occ").get<int>();
      space.upper_stmt = target_from_json(s.at("m"));
      space.evidence = evidence_from_string(s.value("evidence", std::string("test-end")));
      report.spaces.push_back(std::move(space));
    }
    report.identification_runs = j.at("runs").get<int>();
    report.grouped_reruns = j.at("reruns").get<int>();
    return report;
  });
}

Json to_json(const OracleResult& result) {
  Json out = {{"total", result.total_orders}, {"failing", result.failing_orders}};
  if (result.sample_failing_order) out["sample"] = *result.sample_failing_order;
  return out;
}

Json to_json(const RerunResult& result) {
  Json out = {{"attempts", result.attempts}};
  if (result.first_failure_at) {
    out["first_failure_at"] = *result.first_failure_at;
    out["message"] = result.failure->message;
  }
  return out;
}

Json verdict_json(const std::string& test, const Verdict& v, std::optional<Category> category) {
  Json out = {{"test", test}, {"verdict", to_string(v.kind)}};
  if (v.witness) {
    Json w = {{"sig", v.witness->event.identity.method_sig_seq},
              {"occ", v.witness->event.occurrence},
              {"n", v.witness->event.identity.stmt_ordinal},
              {"target", target_json(v.witness->target_stmt)}};
    if (v.failure) {
      w["failing_stmt"] = v.failure->stmt;
      w["message"] = v.failure->message;
    }
    out["witness"] = std::move(w);
  }
  out["runs_used"] = v.runs_used;
  out["events_observed"] = v.events_observed;
  if (category) out["category_hint"] = to_string(*category);
  if (v.kind == VerdictKind::ExecutionError) out["message"] = v.message;
  return out;
}

Json to_json(const DetectionReport& r, bool timing) {
  Json out = verdict_json(r.test, r.verdict, r.category);
  out["scenario"] = r.scenario;
  out["expected"] = to_string(r.expected);
  out["sync_op_count"] = r.sync_op_count;
  out["virtual_ticks"] = r.verdict.virtual_ticks;
  if (timing) out["wall_seconds"] = r.wall_seconds;
  out["phases"] = {{"trace", r.verdict.phases.trace},
                   {"bounds", r.verdict.phases.bounds},
                   {"explore", r.verdict.phases.explore}};
  if (r.verdict.unrealized > 0) out["unrealized_directives"] = r.verdict.unrealized;
  if (r.rerun) out["rerun"] = to_json(*r.rerun);
  if (r.oracle) out["oracle"] = to_json(*r.oracle);
  return out;
}

std::string render_table(const std::vector<DetectionReport>& reports, bool timing) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-4s %4s %8s %5s %-9s %-21s %-8s %-9s", "Test", "Cat",
                "#Op", "#Events", "#Run", "T/B/E", "Verdict", "RERUN", "Oracle");
  os << line << (timing ? "  Time(s)" : "") << '\n';
  for (const auto& r : reports) {
    const auto& v = r.verdict;
    const std::string phases = std::to_string(v.phases.trace) + "/" +
                               std::to_string(v.phases.bounds) + "/" +
                               std::to_string(v.phases.explore);
    std::string rerun = "-";
    if (r.rerun) {
      rerun = r.rerun->first_failure_at ? "fail@" + std::to_string(*r.rerun->first_failure_at)
                                        : "pass";
    }
    std::string oracle = "-";
    if (r.oracle) {
      oracle = std::to_string(r.oracle->failing_orders) + "/" +
               std::to_string(r.oracle->total_orders);
    }
    std::snprintf(line, sizeof line, "%-22s %-4s %4d %8llu %5d %-9s %-21s %-8s %-9s",
                  r.scenario.c_str(),
                  r.category ? std::string(to_string(*r.category)).c_str() : "-",
                  r.sync_op_count, static_cast<unsigned long long>(v.events_observed),
                  v.runs_used, phases.c_str(), std::string(to_string(v.kind)).c_str(),
                  rerun.c_str(), oracle.c_str());
    os << line;
    if (timing) {
      std::snprintf(line, sizeof line, "  %7.3f", r.wall_seconds);
      os << line;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace flakeprobe
