#pragma once

// What-if analysis: withhold async events and watch which statement of the
// test ends up waiting for them. That statement is the event's upper bound.

#include <functional>
#include <optional>
#include <vector>

#include "flakeprobe/controller.hpp"
#include "flakeprobe/tracer.hpp"

namespace flakeprobe {

/// How an upper bound was established.
enum class BoundEvidence { IdleSync, TimedWait, TestEnd };

std::string_view to_string(BoundEvidence evidence);

struct ScheduleSpace {
  EventRef event;
  int lower_stmt = 0;
  // nullopt is the end of the test.
  std::optional<int> upper_stmt;
  BoundEvidence evidence = BoundEvidence::TestEnd;

  bool operator==(const ScheduleSpace&) const = default;
};

struct BoundsReport {
  std::vector<ScheduleSpace> spaces;  // trace order
  int identification_runs = 0;
  int grouped_reruns = 0;
  // False when the run budget or an observer stopped the analysis early.
  bool complete = true;
};

int runs_needed(const BoundsReport& report);

struct DelayedEvent {
  EventRef event;
  // Statement during which the event was let go; nullopt if never released.
  std::optional<int> released_at;
};

struct BoundsRunRecord {
  bool rerun = false;
  std::size_t targets = 0;
  DriveOutcome outcome = DriveOutcome::Passed;
  std::optional<FailureInfo> failure;
  std::vector<DelayedEvent> delayed;
  std::uint64_t events = 0;
  Tick ticks = 0;
};

struct BoundsOptions {
  // Withhold every unresolved event in the same run.
  bool optimize = true;
  // Abort a run once more than this many threads would be suspended at once.
  int suspend_guard = 8;
  // Consulted before each run; returning false stops the analysis.
  std::function<bool()> may_start_run;
  // Sees every finished run; returning false stops the analysis.
  std::function<bool(const BoundsRunRecord&)> on_run;
};

BoundsReport identify_schedule_spaces(const AppProgram& app, const TestProgram& test,
                                      const TraceMap& tm, const BoundsOptions& options = {});

}  // namespace flakeprobe
