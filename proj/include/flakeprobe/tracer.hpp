#pragma once

// Statement-to-event tracing: runs the test one statement at a time and maps
// each statement to the events it caused, under identities that stay stable
// across runs.

#include <map>
#include <string>
#include <vector>

#include "flakeprobe/runtime.hpp"

namespace flakeprobe {

struct EventIdentity {
  int stmt_ordinal = 0;
  HandlerPath method_sig_seq;
  bool is_async = false;

  auto operator<=>(const EventIdentity&) const = default;
};

/// An identity plus its occurrence index among same-identity events of a run.
struct EventRef {
  EventIdentity identity;
  int occurrence = 0;

  auto operator<=>(const EventRef&) const = default;
};

std::string describe(const EventRef& ref);

/// Assigns EventRefs to events in interception order.
class IdentityAssigner {
 public:
  EventRef assign(const Event& e);

 private:
  std::map<EventIdentity, int> seen_;
};

struct TraceEntry {
  int stmt = 0;
  std::vector<EventRef> events;

  bool operator==(const TraceEntry&) const = default;
};

struct TraceMap {
  std::vector<TraceEntry> entries;

  bool operator==(const TraceMap&) const = default;
};

struct TraceRun {
  TraceMap map;
  std::uint64_t events_observed = 0;
  Tick ticks = 0;
  RunLog log;
};

/// Traces the test. The tracing run doubles as the check that the input test
/// passes: throws NotPassingError if it fails, DeadlockError if it hangs.
TraceRun trace_run(const AppProgram& app, const TestProgram& test);
TraceMap trace(const AppProgram& app, const TestProgram& test);

/// Async identities in trace order.
std::vector<EventRef> async_events(const TraceMap& tm);

}  // namespace flakeprobe
