#pragma once

// Systematic exploration of statement-boundary delivery points for each async
// event, and the end-to-end detection pipeline.

#include <optional>
#include <string>
#include <vector>

#include "flakeprobe/bounds.hpp"

namespace flakeprobe {

/// Deliver `event` immediately before the first event of `target_stmt`
/// (nullopt: after the final statement).
struct ScheduleDirective {
  EventRef event;
  std::optional<int> target_stmt;

  bool operator==(const ScheduleDirective&) const = default;
};

std::string describe(const ScheduleDirective& d);

/// Maximal delay first: t = m, m-1, ..., n+1 per space, spaces in trace order.
/// An end-of-test space starts at the end, then N, N-1, ....
std::vector<ScheduleDirective> enumerate_directives(const std::vector<ScheduleSpace>& spaces,
                                                    int statement_count);

struct DirectedRun {
  DriveOutcome outcome = DriveOutcome::Passed;
  std::vector<AssertionOutcome> outcomes;
  std::optional<FailureInfo> failure;
  RunLog log;
  // The directive's event was posted in this run.
  bool realized = false;
  // The testing thread blocked on the event before its target statement.
  bool premature = false;
  std::uint64_t event_uid = 0;
  std::uint64_t events = 0;
  Tick ticks = 0;

  bool failed() const { return outcome == DriveOutcome::Failed; }
};

DirectedRun execute_directed(const AppProgram& app, const TestProgram& test,
                             const ScheduleDirective& d);

/// Throws DirectiveUnrealizable if the run never saw the directive's event.
void require_realized(const DirectedRun& run, const ScheduleDirective& d);

/// True if the log shows the held event dispatched right after its release,
/// with no other dispatch or statement start in between, and followed by the
/// start of the target statement before any other dispatch.
bool order_realized(const RunLog& log, std::uint64_t event_uid, std::optional<int> target_stmt);

enum class VerdictKind { Flaky, NotFlakyWithinBudget, ExecutionError };

std::string_view to_string(VerdictKind kind);

struct PhaseRuns {
  int trace = 0;
  int bounds = 0;
  int explore = 0;

  bool operator==(const PhaseRuns&) const = default;
};

struct Verdict {
  VerdictKind kind = VerdictKind::NotFlakyWithinBudget;
  std::optional<ScheduleDirective> witness;
  std::optional<FailureInfo> failure;
  std::string message;  // ExecutionError detail
  int runs_used = 0;
  std::uint64_t events_observed = 0;
  PhaseRuns phases;
  int unrealized = 0;
  Tick virtual_ticks = 0;
  // Directives run in the explore phase, in order.
  std::vector<ScheduleDirective> explored;

  bool flaky() const { return kind == VerdictKind::Flaky; }
};

/// Default run budget: 1 + |async events| + sum of span lengths.
int default_budget(const std::vector<ScheduleSpace>& spaces, int statement_count,
                   std::size_t async_count);

/// Runs directives in order until one fails or `budget` total runs are used.
/// Run counts accumulate onto those already in `verdict`.
Verdict explore(const AppProgram& app, const TestProgram& test,
                const std::vector<ScheduleDirective>& directives, int budget,
                int parallel = 1, Verdict verdict = {});

struct DetectOptions {
  std::optional<int> budget_runs;
  int parallel = 1;
  int suspend_guard = 8;
};

struct Detection {
  Verdict verdict;
  std::optional<TraceRun> trace;
  std::optional<BoundsReport> bounds;
};

/// Trace, identify schedule spaces, then explore, stopping at the first
/// failing run.
Detection detect_full(const AppProgram& app, const TestProgram& test,
                      const DetectOptions& options = {});
Verdict detect(const AppProgram& app, const TestProgram& test, const DetectOptions& options = {});

}  // namespace flakeprobe
