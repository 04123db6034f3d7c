#include "flakeprobe/explorer.hpp"

#include <algorithm>
#include <future>
#include <set>

#include "flakeprobe/errors.hpp"

namespace flakeprobe {

std::string describe(const ScheduleDirective& d) {
  return describe(d.event) + " -> " +
         (d.target_stmt ? "before S" + std::to_string(*d.target_stmt) : std::string("end"));
}

std::string_view to_string(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::Flaky: return "Flaky";
    case VerdictKind::NotFlakyWithinBudget: return "NotFlakyWithinBudget";
    case VerdictKind::ExecutionError: return "ExecutionError";
  }
  return "?";
}

std::vector<ScheduleDirective> enumerate_directives(const std::vector<ScheduleSpace>& spaces,
                                                    int statement_count) {
  std::vector<ScheduleDirective> out;
  for (const auto& s : spaces) {
    int top = statement_count;
    if (s.upper_stmt) {
      top = *s.upper_stmt;
    } else {
      out.push_back({s.event, std::nullopt});
    }
    for (int t = top; t > s.lower_stmt; --t) out.push_back({s.event, t});
  }
  return out;
}

DirectedRun execute_directed(const AppProgram& app, const TestProgram& test,
                             const ScheduleDirective& d) {
  RuntimeOptions options;
  options.statement_breakpoints = true;
  Runtime rt(app, test, options);
  const int target = d.target_stmt.value_or(test.size() + 1);

  DirectedRun out;
  IdentityAssigner ids;
  bool holding = false;
  rt.arm_enqueue_hook([&](const Event& e) {
    if (ids.assign(e) != d.event) return HookDecision::Pass;
    out.realized = true;
    out.event_uid = e.uid;
    if (!e.is_async) return HookDecision::Pass;
    holding = true;
    return HookDecision::Hold;
  });

  StepHooks hooks;
  hooks.at_boundary = [&](Runtime& r, int k) {
    if (holding && k == target) {
      holding = false;
      r.release_held(out.event_uid);
    }
  };
  hooks.on_test_waiting = [&](Runtime& r, int, TestWait wait) {
    if (!holding || wait == TestWait::Timed) return false;
    holding = false;
    out.premature = true;
    r.release_held(out.event_uid);
    return true;
  };

  out.outcome = drive_statements(rt, hooks);
  out.outcomes = rt.outcomes();
  out.failure = rt.failure();
  out.log = rt.log();
  out.events = rt.intercepted_count();
  out.ticks = rt.now();
  return out;
}

void require_realized(const DirectedRun& run, const ScheduleDirective& d) {
  if (!run.realized) throw DirectiveUnrealizable("event never posted: " + describe(d));
}

bool order_realized(const RunLog& log, std::uint64_t event_uid, std::optional<int> target_stmt) {
  const auto& recs = log.records();
  std::size_t i = 0;
  while (i < recs.size() && !(recs[i].action == "release" && recs[i].event_uid == event_uid)) ++i;
  if (i == recs.size()) return false;

  // Events posted after the release may run before the target statement;
  // anything older may not.
  std::set<std::uint64_t> fresh;
  bool delivered = false;
  std::size_t j = i + 1;
  for (; j < recs.size(); ++j) {
    const auto& r = recs[j];
    if (r.action == "post") fresh.insert(r.event_uid);
    if (r.action == "stmt-begin") break;
    if (r.action != "dispatch") continue;
    if (!delivered) {
      if (r.event_uid != event_uid) return false;
      delivered = true;
    } else if (fresh.count(r.event_uid) == 0) {
      return false;
    }
  }
  if (!delivered) return false;
  if (!target_stmt) return j == recs.size();
  if (j == recs.size() || recs[j].token != "S" + std::to_string(*target_stmt)) return false;

  // The first dispatch after the statement starts must be one of its own.
  std::set<std::uint64_t> own;
  for (std::size_t k = j + 1; k < recs.size(); ++k) {
    const auto& r = recs[k];
    if (r.action == "stmt-begin") break;
    if (r.action == "post") own.insert(r.event_uid);
    if (r.action == "dispatch") return own.count(r.event_uid) != 0;
  }
  return true;
}

int default_budget(const std::vector<ScheduleSpace>& spaces, int statement_count,
                   std::size_t async_count) {
  int budget = 1 + static_cast<int>(async_count);
  for (const auto& s : spaces) {
    budget += s.upper_stmt.value_or(statement_count + 1) - s.lower_stmt;
  }
  return budget;
}

Verdict explore(const AppProgram& app, const TestProgram& test,
                const std::vector<ScheduleDirective>& directives, int budget, int parallel,
                Verdict verdict) {
  const std::size_t width = static_cast<std::size_t>(std::max(1, parallel));
  std::size_t next = 0;
  while (next < directives.size() && verdict.runs_used < budget) {
    const std::size_t room = static_cast<std::size_t>(budget - verdict.runs_used);
    const std::size_t batch = std::min({width, room, directives.size() - next});

    std::vector<DirectedRun> runs(batch);
    if (batch == 1) {
      runs[0] = execute_directed(app, test, directives[next]);
    } else {
      std::vector<std::future<DirectedRun>> pending;
      for (std::size_t i = 0; i < batch; ++i) {
        pending.push_back(std::async(std::launch::async, [&, i] {
          return execute_directed(app, test, directives[next + i]);
        }));
      }
      for (std::size_t i = 0; i < batch; ++i) runs[i] = pending[i].get();
    }

    // Runs past the first failure in enumeration order are not counted.
    for (std::size_t i = 0; i < batch; ++i) {
      ++verdict.runs_used;
      ++verdict.phases.explore;
      verdict.explored.push_back(directives[next + i]);
      verdict.virtual_ticks += runs[i].ticks;
      if (!runs[i].realized) ++verdict.unrealized;
      if (runs[i].failed()) {
        verdict.kind = VerdictKind::Flaky;
        verdict.witness = directives[next + i];
        verdict.failure = runs[i].failure;
        return verdict;
      }
    }
    next += batch;
  }
  verdict.kind = VerdictKind::NotFlakyWithinBudget;
  return verdict;
}

Detection detect_full(const AppProgram& app, const TestProgram& test,
                      const DetectOptions& options) {
  Detection out;
  Verdict& v = out.verdict;

  try {
    out.trace = trace_run(app, test);
  } catch (const Error& ex) {
    v.kind = VerdictKind::ExecutionError;
    v.message = ex.what();
    v.runs_used = 1;
    v.phases.trace = 1;
    return out;
  }
  v.runs_used = 1;
  v.phases.trace = 1;
  v.events_observed = out.trace->events_observed;
  v.virtual_ticks = out.trace->ticks;

  const std::vector<EventRef> asyncs = async_events(out.trace->map);
  if (asyncs.empty()) {
    v.kind = VerdictKind::NotFlakyWithinBudget;
    return out;
  }

  const int n = test.size();
  std::vector<ScheduleDirective> candidates;
  BoundsOptions bo;
  bo.suspend_guard = options.suspend_guard;
  bo.may_start_run = [&] { return !options.budget_runs || v.runs_used < *options.budget_runs; };
  bo.on_run = [&](const BoundsRunRecord& rec) {
    ++v.runs_used;
    ++v.phases.bounds;
    v.virtual_ticks += rec.ticks;
    if (!rec.failure) return true;
    if (rec.delayed.size() == 1 && !rec.delayed[0].released_at) {
      // Withholding this one event for the whole run is the failing schedule.
      v.kind = VerdictKind::Flaky;
      v.witness = ScheduleDirective{rec.delayed[0].event, std::nullopt};
      v.failure = rec.failure;
      return false;
    }
    for (const auto& d : rec.delayed) candidates.push_back({d.event, d.released_at});
    return true;
  };

  try {
    out.bounds = identify_schedule_spaces(app, test, out.trace->map, bo);
  } catch (const Error& ex) {
    v.kind = VerdictKind::ExecutionError;
    v.message = ex.what();
    return out;
  }
  if (v.flaky()) return out;

  int budget = default_budget(out.bounds->spaces, n, asyncs.size());
  if (options.budget_runs) budget = std::min(budget, *options.budget_runs);

  std::vector<ScheduleDirective> directives;
  for (auto& d : candidates) {
    if (std::find(directives.begin(), directives.end(), d) == directives.end()) {
      directives.push_back(d);
    }
  }
  for (auto& d : enumerate_directives(out.bounds->spaces, n)) {
    if (std::find(directives.begin(), directives.end(), d) == directives.end()) {
      directives.push_back(d);
    }
  }
  v = explore(app, test, directives, budget, options.parallel, std::move(v));
  return out;
}

Verdict detect(const AppProgram& app, const TestProgram& test, const DetectOptions& options) {
  return detect_full(app, test, options).verdict;
}

}  // namespace flakeprobe
