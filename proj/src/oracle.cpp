#include "flakeprobe/oracle.hpp"

#include <random>

#include "flakeprobe/controller.hpp"
#include "flakeprobe/errors.hpp"

namespace flakeprobe {

namespace {

// Replays a fixed prefix of decisions, then takes option 0 at every new
// choice point while recording how many options each point offered.
class Chooser {
 public:
  explicit Chooser(std::vector<std::size_t> prefix) : prefix_(std::move(prefix)) {}

  std::size_t choose(std::size_t options) {
    if (options <= 1) return 0;
    const std::size_t pick = taken_.size() < prefix_.size() ? prefix_[taken_.size()] : 0;
    taken_.push_back(pick);
    widths_.push_back(options);
    return pick;
  }

  /// Decision prefix of the next unexplored order, or nullopt when done.
  std::optional<std::vector<std::size_t>> next() const {
    for (std::size_t i = taken_.size(); i-- > 0;) {
      if (taken_[i] + 1 < widths_[i]) {
        std::vector<std::size_t> p(taken_.begin(), taken_.begin() + static_cast<long>(i));
        p.push_back(taken_[i] + 1);
        return p;
      }
    }
    return std::nullopt;
  }

 private:
  std::vector<std::size_t> prefix_;
  std::vector<std::size_t> taken_;
  std::vector<std::size_t> widths_;
};

struct Execution {
  DeliveryOrder order;
  bool failed = false;
  std::optional<FailureInfo> failure;
};

Execution execute(const AppProgram& app, const TestProgram& test, Chooser& chooser) {
  RuntimeOptions options;
  options.statement_breakpoints = true;
  Runtime rt(app, test, options);

  std::vector<std::uint64_t> held;
  auto take = [&](std::size_t i) {
    const std::uint64_t uid = held[i];
    held.erase(held.begin() + static_cast<long>(i));
    return uid;
  };

  rt.arm_enqueue_hook([&](const Event& e) {
    if (!e.is_async) return HookDecision::Pass;
    held.push_back(e.uid);
    return HookDecision::Hold;
  });
  // Before every dispatch, any enabled async event may jump the queue.
  rt.set_dispatch_gate([&](Runtime& r) {
    if (r.test_finished() || held.empty()) return;
    const std::size_t c = chooser.choose(held.size() + 1);
    if (c > 0) r.release_held(take(c - 1), QueuePosition::Front);
  });

  StepHooks hooks;
  hooks.at_boundary = [&](Runtime& r, int) {
    while (!r.test_finished() && !held.empty() && !r.failed()) {
      const std::size_t c = chooser.choose(held.size() + 1);
      if (c == 0) break;
      r.release_held(take(c - 1));
      settle(r);
    }
  };
  // A blocked idle-sync forces one of the withheld events through.
  hooks.on_test_waiting = [&](Runtime& r, int, TestWait wait) {
    if (wait != TestWait::IdleSync || held.empty()) return false;
    r.release_held(take(chooser.choose(held.size())));
    return true;
  };

  const DriveOutcome outcome = drive_statements(rt, hooks);
  Execution out;
  out.order = rt.log().delivery_tokens();
  out.failure = rt.failure();
  if (outcome == DriveOutcome::Deadlocked) {
    out.order.push_back("deadlock");
    out.failure = FailureInfo{rt.current_statement(), "deadlock"};
  }
  out.failed = outcome == DriveOutcome::Failed || outcome == DriveOutcome::Deadlocked;
  return out;
}

}  // namespace

OracleResult enumerate_feasible_orders(const AppProgram& app, const TestProgram& test,
                                       const OracleOptions& options) {
  const PlainRun plain = run_plain(app, test);
  if (plain.events > options.event_cap) {
    throw CapExceeded("program observes " + std::to_string(plain.events) +
                      " events; cap is " + std::to_string(options.event_cap));
  }

  OracleResult result;
  std::set<DeliveryOrder> seen;
  std::optional<std::vector<std::size_t>> prefix = std::vector<std::size_t>{};
  while (prefix) {
    if (result.executions >= options.execution_limit) {
      throw CapExceeded("order enumeration exceeded " +
                        std::to_string(options.execution_limit) + " executions");
    }
    Chooser chooser(std::move(*prefix));
    Execution ex = execute(app, test, chooser);
    ++result.executions;
    prefix = chooser.next();

    if (!seen.insert(ex.order).second) continue;
    ++result.total_orders;
    if (!ex.failed) continue;
    ++result.failing_orders;
    if (!result.sample_failing_order) {
      result.sample_failing_order = ex.order;
      result.sample_failure = ex.failure;
    }
    if (options.keep_failing) result.failing.insert(std::move(ex.order));
  }
  return result;
}

std::uint64_t attempt_seed(std::uint64_t seed, int attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

RerunResult rerun(const AppProgram& app, const TestProgram& test, int k, std::uint64_t seed) {
  RerunResult result;
  for (int a = 1; a <= k; ++a) {
    const PlainRun run = run_plain(app, test, attempt_seed(seed, a));
    result.attempts = a;
    if (!run.passed()) {
      result.first_failure_at = a;
      result.failure = run.failure;
      result.failing_order = run.log.delivery_tokens();
      break;
    }
  }
  return result;
}

}  // namespace flakeprobe
