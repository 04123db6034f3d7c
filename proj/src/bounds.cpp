#include "flakeprobe/bounds.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "flakeprobe/errors.hpp"

namespace flakeprobe {

std::string_view to_string(BoundEvidence evidence) {
  switch (evidence) {
    case BoundEvidence::IdleSync: return "idle-sync";
    case BoundEvidence::TimedWait: return "timed-wait";
    case BoundEvidence::TestEnd: return "test-end";
  }
  return "?";
}

int runs_needed(const BoundsReport& report) {
  return report.identification_runs + report.grouped_reruns;
}

namespace {

struct Bound {
  std::optional<int> upper;
  BoundEvidence evidence = BoundEvidence::TestEnd;
};

struct PassResult {
  BoundsRunRecord record;
  std::map<EventRef, Bound> resolved;
  // Events released together to unblock one wait; the last one is the
  // event whose release actually unblocked it.
  std::vector<std::vector<EventRef>> groups;
  bool guard_tripped = false;
};

PassResult run_pass(const AppProgram& app, const TestProgram& test,
                    const std::set<EventRef>& targets, int guard) {
  RuntimeOptions options;
  options.statement_breakpoints = true;
  Runtime rt(app, test, options);

  PassResult out;
  IdentityAssigner ids;
  std::vector<std::pair<EventRef, std::uint64_t>> held;
  std::map<EventRef, std::size_t> delayed_slot;

  rt.arm_enqueue_hook([&](const Event& e) {
    EventRef ref = ids.assign(e);
    if (!e.is_async || targets.count(ref) == 0) return HookDecision::Pass;
    if (static_cast<int>(held.size()) + 1 > guard) {
      out.guard_tripped = true;
      rt.terminate();
      return HookDecision::Pass;
    }
    delayed_slot[ref] = out.record.delayed.size();
    out.record.delayed.push_back({ref, std::nullopt});
    held.emplace_back(std::move(ref), e.uid);
    return HookDecision::Hold;
  });

  auto let_go = [&](int k) {
    auto [ref, uid] = held.front();
    held.erase(held.begin());
    out.record.delayed[delayed_slot[ref]].released_at = k;
    rt.release_held(uid);
    return ref;
  };

  StepHooks hooks;
  hooks.on_test_waiting = [&](Runtime& r, int k, TestWait wait) {
    if (held.empty()) return false;
    std::vector<EventRef> group;
    if (wait == TestWait::Timed) {
      while (!held.empty()) group.push_back(let_go(k));
      for (const auto& ref : group) out.resolved[ref] = {k, BoundEvidence::TimedWait};
    } else if (wait == TestWait::IdleSync) {
      while (!held.empty()) {
        group.push_back(let_go(k));
        settle(r);
        if (r.failed() || r.terminated() || r.testing_wait() != TestWait::IdleSync) break;
      }
      for (const auto& ref : group) out.resolved[ref] = {k, BoundEvidence::IdleSync};
    } else {
      return false;
    }
    if (group.size() > 1) {
      if (wait == TestWait::Timed) std::rotate(group.begin(), group.begin() + 1, group.end());
      out.groups.push_back(std::move(group));
    }
    return true;
  };

  out.record.outcome = drive_statements(rt, hooks);
  out.record.failure = rt.failure();
  out.record.events = rt.intercepted_count();
  out.record.ticks = rt.now();
  out.record.targets = targets.size();

  const bool withheld_to_end =
      out.record.outcome == DriveOutcome::Passed ||
      (out.record.outcome == DriveOutcome::Failed && held.size() == 1);
  if (withheld_to_end) {
    for (const auto& h : held) out.resolved[h.first] = {std::nullopt, BoundEvidence::TestEnd};
  }
  return out;
}

}  // namespace

BoundsReport identify_schedule_spaces(const AppProgram& app, const TestProgram& test,
                                      const TraceMap& tm, const BoundsOptions& options) {
  BoundsReport report;
  const std::vector<EventRef> events = async_events(tm);
  std::map<EventRef, Bound> bounds;
  bool stopped = false;

  auto may_start = [&] {
    if (stopped) return false;
    if (options.may_start_run && !options.may_start_run()) {
      stopped = true;
      return false;
    }
    return true;
  };
  auto observe = [&](const PassResult& r) {
    if (options.on_run && !options.on_run(r.record)) stopped = true;
  };
  auto unresolved = [&] {
    std::vector<EventRef> out;
    for (const auto& e : events) {
      if (bounds.count(e) == 0) out.push_back(e);
    }
    return out;
  };
  // One event withheld alone; used for the unoptimized path and for reruns.
  auto resolve_alone = [&](const EventRef& e, bool rerun) {
    PassResult r = run_pass(app, test, {e}, options.suspend_guard);
    r.record.rerun = rerun;
    if (rerun) {
      ++report.grouped_reruns;
    } else {
      ++report.identification_runs;
    }
    if (r.record.outcome == DriveOutcome::Deadlocked) {
      throw DeadlockError("testing thread deadlocked with only " + describe(e) + " withheld");
    }
    auto it = r.resolved.find(e);
    bounds[e] = it != r.resolved.end() ? it->second : Bound{};
    observe(r);
  };

  std::vector<std::vector<EventRef>> groups;
  if (options.optimize) {
    while (!stopped) {
      const std::vector<EventRef> todo = unresolved();
      if (todo.empty() || !may_start()) break;
      PassResult r = run_pass(app, test, {todo.begin(), todo.end()}, options.suspend_guard);
      ++report.identification_runs;
      for (const auto& [ref, b] : r.resolved) bounds[ref] = b;
      for (auto& g : r.groups) groups.push_back(std::move(g));
      observe(r);
      const bool progress = !r.resolved.empty();
      if (!progress || r.record.outcome != DriveOutcome::Passed || r.guard_tripped) break;
    }
  }
  for (const auto& e : unresolved()) {
    if (!may_start()) break;
    resolve_alone(e, false);
  }
  for (const auto& group : groups) {
    for (std::size_t i = 0; i + 1 < group.size(); ++i) {
      if (!may_start()) break;
      resolve_alone(group[i], true);
    }
  }

  for (const auto& e : events) {
    auto it = bounds.find(e);
    if (it == bounds.end()) {
      report.complete = false;
      continue;
    }
    report.spaces.push_back({e, e.identity.stmt_ordinal, it->second.upper, it->second.evidence});
  }
  if (stopped) report.complete = false;
  return report;
}

}  // namespace flakeprobe
