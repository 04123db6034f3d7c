#pragma once

// Exhaustive enumeration of feasible async delivery orders, and the RERUN
// baseline that simply repeats the test under random timing.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flakeprobe/runtime.hpp"
#include "flakeprobe/testkit.hpp"

namespace flakeprobe {

/// A delivery order as the sequence of statement starts ("S<k>") and event
/// dispatches ("D:<sig>", async ones suffixed with "!").
using DeliveryOrder = std::vector<std::string>;

struct OracleOptions {
  std::uint64_t event_cap = 12;
  // Keep every failing order, not just the first.
  bool keep_failing = false;
  std::uint64_t execution_limit = 2'000'000;
};

struct OracleResult {
  std::uint64_t total_orders = 0;
  std::uint64_t failing_orders = 0;
  std::optional<DeliveryOrder> sample_failing_order;
  std::optional<FailureInfo> sample_failure;
  std::set<DeliveryOrder> failing;  // filled when keep_failing is set
  std::uint64_t executions = 0;
};

/// Throws CapExceeded when a plain run observes more than event_cap events.
OracleResult enumerate_feasible_orders(const AppProgram& app, const TestProgram& test,
                                       const OracleOptions& options = {});

struct RerunResult {
  int attempts = 0;
  std::optional<int> first_failure_at;
  std::optional<FailureInfo> failure;
  DeliveryOrder failing_order;

  bool operator==(const RerunResult&) const = default;
};

/// Seed of the jittered delays in one attempt.
std::uint64_t attempt_seed(std::uint64_t seed, int attempt);

RerunResult rerun(const AppProgram& app, const TestProgram& test, int k = 20,
                  std::uint64_t seed = 0);

}  // namespace flakeprobe
