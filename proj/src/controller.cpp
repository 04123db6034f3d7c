#include "flakeprobe/controller.hpp"

namespace flakeprobe {

std::string_view to_string(DriveOutcome outcome) {
  switch (outcome) {
    case DriveOutcome::Passed: return "passed";
    case DriveOutcome::Failed: return "failed";
    case DriveOutcome::Deadlocked: return "deadlocked";
    case DriveOutcome::Aborted: return "aborted";
  }
  return "?";
}

void settle(Runtime& rt) {
  while (true) {
    rt.run_until_stalled();
    if (rt.failed() || rt.terminated()) return;
    if (!rt.advance_clock()) return;
  }
}

namespace {

std::optional<DriveOutcome> stopped(const Runtime& rt) {
  if (rt.failed()) return DriveOutcome::Failed;
  if (rt.terminated()) return DriveOutcome::Aborted;
  return std::nullopt;
}

}  // namespace

DriveOutcome drive_statements(Runtime& rt, const StepHooks& hooks) {
  const int n = rt.statement_count();
  for (int k = 1; k <= n; ++k) {
    settle(rt);
    if (auto s = stopped(rt)) return *s;
    if (hooks.at_boundary) {
      hooks.at_boundary(rt, k);
      if (auto s = stopped(rt)) return *s;
      settle(rt);
      if (auto s = stopped(rt)) return *s;
    }
    rt.continue_statement();
    while (true) {
      rt.run_until_stalled();
      if (auto s = stopped(rt)) return *s;
      if (rt.testing_at_breakpoint() || rt.test_finished()) break;
      const TestWait wait = rt.testing_wait();
      if (wait == TestWait::Timed && hooks.on_test_waiting &&
          hooks.on_test_waiting(rt, k, wait)) {
        continue;
      }
      if (rt.advance_clock()) continue;
      if (wait != TestWait::None && wait != TestWait::Timed && hooks.on_test_waiting &&
          hooks.on_test_waiting(rt, k, wait)) {
        continue;
      }
      if (auto s = stopped(rt)) return *s;
      return DriveOutcome::Deadlocked;
    }
  }
  settle(rt);
  if (auto s = stopped(rt)) return *s;
  if (hooks.at_boundary) {
    hooks.at_boundary(rt, n + 1);
    if (auto s = stopped(rt)) return *s;
    settle(rt);
  }
  return rt.failed() ? DriveOutcome::Failed : DriveOutcome::Passed;
}

}  // namespace flakeprobe
