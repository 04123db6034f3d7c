#include "flakeprobe/tracer.hpp"

#include "flakeprobe/controller.hpp"
#include "flakeprobe/errors.hpp"

namespace flakeprobe {

std::string describe(const EventRef& ref) {
  std::string out = join_path(ref.identity.method_sig_seq) + "@" +
                    std::to_string(ref.identity.stmt_ordinal);
  if (ref.identity.is_async) out += "!";
  if (ref.occurrence > 0) out += "#" + std::to_string(ref.occurrence);
  return out;
}

EventRef IdentityAssigner::assign(const Event& e) {
  EventRef ref;
  ref.identity = {e.stmt, e.path, e.is_async};
  ref.occurrence = seen_[ref.identity]++;
  return ref;
}

TraceRun trace_run(const AppProgram& app, const TestProgram& test) {
  RuntimeOptions options;
  options.statement_breakpoints = true;
  Runtime rt(app, test, options);

  TraceRun out;
  for (const auto& s : test.statements) out.map.entries.push_back({s.ordinal, {}});

  IdentityAssigner ids;
  rt.arm_enqueue_hook([&](const Event& e) {
    EventRef ref = ids.assign(e);
    if (e.stmt >= 1 && e.stmt <= test.size()) {
      out.map.entries[static_cast<std::size_t>(e.stmt - 1)].events.push_back(std::move(ref));
    }
    return HookDecision::Pass;
  });

  const DriveOutcome outcome = drive_statements(rt);
  if (outcome == DriveOutcome::Deadlocked) {
    throw DeadlockError("tracing run deadlocked in statement " +
                        std::to_string(rt.current_statement()));
  }
  if (outcome == DriveOutcome::Failed) {
    throw NotPassingError("test fails without interference: statement " +
                          std::to_string(rt.failure()->stmt) + ": " + rt.failure()->message);
  }
  out.events_observed = rt.intercepted_count();
  out.ticks = rt.now();
  out.log = rt.log();
  return out;
}

TraceMap trace(const AppProgram& app, const TestProgram& test) {
  return trace_run(app, test).map;
}

std::vector<EventRef> async_events(const TraceMap& tm) {
  std::vector<EventRef> out;
  for (const auto& entry : tm.entries) {
    for (const auto& ref : entry.events) {
      if (ref.identity.is_async) out.push_back(ref);
    }
  }
  return out;
}

}  // namespace flakeprobe
