#pragma once

// Statement-stepping driver shared by every analysis that runs the test with
// breakpoints enabled.

#include <functional>

#include "flakeprobe/runtime.hpp"

namespace flakeprobe {

enum class DriveOutcome { Passed, Failed, Deadlocked, Aborted };

std::string_view to_string(DriveOutcome outcome);

struct StepHooks {
  // Called with the testing thread parked before statement k and the app
  // quiescent. k runs 1..N; k = N + 1 is the end of the test.
  std::function<void(Runtime&, int k)> at_boundary;
  // Called while statement k is blocked. Timed waits are reported before the
  // clock moves; other waits only once no clock advance can help. Returning
  // true means the hook changed something and the run should continue.
  std::function<bool(Runtime&, int k, TestWait wait)> on_test_waiting;
};

/// Runs everything runnable, advancing the clock, until nothing can move.
void settle(Runtime& rt);

/// Drives a runtime created with statement breakpoints to completion.
DriveOutcome drive_statements(Runtime& rt, const StepHooks& hooks = {});

}  // namespace flakeprobe
