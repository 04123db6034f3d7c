#include <gtest/gtest.h>

#include "flakeprobe/bounds.hpp"
#include "flakeprobe/controller.hpp"
#include "flakeprobe/corpus.hpp"
#include "flakeprobe/errors.hpp"
#include "flakeprobe/explorer.hpp"
#include "flakeprobe/testkit.hpp"
#include "flakeprobe/tracer.hpp"

using namespace flakeprobe;

namespace {

const HandlerPath kCreate = {"ActivityThread.handleLaunchActivity", "Feed.onCreate"};
const HandlerPath kLoaded = {"Handler.dispatchMessage", "FeedTask.onLoaded"};
const HandlerPath kOpen = {"ViewRootImpl.dispatchInputEvent", "Feed.onOpen"};

// onCreate starts a loader; clicking "open" records whether it finished.
AppProgram feed_app() {
  return AppBuilder("feed")
      .handler(kCreate,
               [](HandlerContext& ctx) {
                 ctx.acquire("loader");
                 ctx.spawn({"loader", {AsyncOp::sleep(3), AsyncOp::post(kLoaded),
                                       AsyncOp::release("loader")}});
               })
      .handler(kLoaded, [](HandlerContext& ctx) { ctx.state().set("loaded", 1); })
      .handler(kOpen,
               [](HandlerContext& ctx) {
                 ctx.state().set("opened", ctx.state().value_or("loaded", 0));
               })
      .view("open", "click", {kOpen})
      .build();
}

TestProgram synced_test() {
  return TestBuilder("synced")
      .launch(kCreate)
      .idle_sync({"loader"})
      .click("open")
      .check([](const AppState& s) { return s.value_or("opened", 0) == 1; }, "opened early")
      .build();
}

TestProgram broken_test() {
  return TestBuilder("broken")
      .launch(kCreate)
      .check([](const AppState& s) { return s.value_or("opened", 0) == 1; }, "never opened")
      .build();
}

std::size_t async_count(const TraceMap& tm) { return async_events(tm).size(); }

}  // namespace

TEST(Controller, DrivesPassingTestToEnd) {
  RuntimeOptions opts;
  opts.statement_breakpoints = true;
  Runtime rt(feed_app(), synced_test(), opts);
  std::vector<int> seen;
  StepHooks hooks;
  hooks.at_boundary = [&](Runtime&, int k) { seen.push_back(k); };
  EXPECT_EQ(drive_statements(rt, hooks), DriveOutcome::Passed);
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3, 4, 5}));
}

TEST(Tracer, MapsEachStatementToItsEvents) {
  TraceMap tm = trace(feed_app(), synced_test());
  ASSERT_EQ(tm.entries.size(), 4u);
  ASSERT_EQ(tm.entries[0].events.size(), 2u);
  EXPECT_EQ(tm.entries[0].events[0].identity.method_sig_seq, kCreate);
  EXPECT_FALSE(tm.entries[0].events[0].identity.is_async);
  EXPECT_EQ(tm.entries[0].events[1].identity.method_sig_seq, kLoaded);
  EXPECT_TRUE(tm.entries[0].events[1].identity.is_async);
  EXPECT_TRUE(tm.entries[1].events.empty());
  ASSERT_EQ(tm.entries[2].events.size(), 1u);
  EXPECT_TRUE(tm.entries[3].events.empty());
}

TEST(Tracer, StableAcrossRuns) {
  for (const auto& s : catalogue()) {
    EXPECT_EQ(trace(s.app, s.test), trace(s.app, s.test)) << s.name;
  }
}

TEST(Tracer, CleanCounterHasOneSyncEventPerClick) {
  Scenario s = make_scenario("clean_counter");
  TraceMap tm = trace(s.app, s.test);
  ASSERT_EQ(tm.entries.size(), 4u);
  int with_one = 0;
  for (const auto& e : tm.entries) {
    if (e.events.size() == 1 && !e.events[0].identity.is_async) ++with_one;
  }
  EXPECT_EQ(with_one, 3);
  EXPECT_TRUE(async_events(tm).empty());
}

TEST(Tracer, RejectsFailingInput) {
  EXPECT_THROW(trace(feed_app(), broken_test()), NotPassingError);
}

TEST(Tracer, OccurrencesCountRepeatedIdentities) {
  IdentityAssigner ids;
  Event e;
  e.stmt = 2;
  e.path = kOpen;
  EXPECT_EQ(ids.assign(e).occurrence, 0);
  EXPECT_EQ(ids.assign(e).occurrence, 1);
  e.stmt = 3;
  EXPECT_EQ(ids.assign(e).occurrence, 0);
}

TEST(Bounds, IdleSyncBoundsTheLoader) {
  TraceMap tm = trace(feed_app(), synced_test());
  BoundsReport b = identify_schedule_spaces(feed_app(), synced_test(), tm);
  ASSERT_EQ(b.spaces.size(), 1u);
  EXPECT_EQ(b.spaces[0].lower_stmt, 1);
  EXPECT_EQ(b.spaces[0].upper_stmt, 2);
  EXPECT_EQ(b.spaces[0].evidence, BoundEvidence::IdleSync);
  EXPECT_EQ(runs_needed(b), 1);
}

TEST(Bounds, OptimizedMatchesUnoptimizedOnCatalogue) {
  for (const auto& s : catalogue()) {
    TraceMap tm;
    try {
      tm = trace(s.app, s.test);
    } catch (const Error&) {
      continue;
    }
    BoundsOptions single;
    single.optimize = false;
    BoundsReport fast = identify_schedule_spaces(s.app, s.test, tm);
    BoundsReport slow = identify_schedule_spaces(s.app, s.test, tm, single);
    EXPECT_EQ(fast.spaces, slow.spaces) << s.name;
    EXPECT_LE(runs_needed(fast), runs_needed(slow)) << s.name;
    EXPECT_LE(static_cast<std::size_t>(runs_needed(fast)), async_count(tm)) << s.name;
    EXPECT_EQ(static_cast<std::size_t>(slow.identification_runs), async_count(tm)) << s.name;
  }
}

TEST(Bounds, IdleSyncUpperBoundIsTight) {
  // Delivering at m works; holding past m makes the test block on the event.
  for (const auto& s : catalogue()) {
    TraceMap tm;
    try {
      tm = trace(s.app, s.test);
    } catch (const Error&) {
      continue;
    }
    for (const auto& sp : identify_schedule_spaces(s.app, s.test, tm).spaces) {
      if (sp.evidence != BoundEvidence::IdleSync) continue;
      DirectedRun at = execute_directed(s.app, s.test, {sp.event, sp.upper_stmt});
      EXPECT_TRUE(at.realized) << s.name;
      if (!at.premature) {
        EXPECT_TRUE(order_realized(at.log, at.event_uid, sp.upper_stmt)) << s.name;
      }
      std::optional<int> past;
      if (*sp.upper_stmt < s.test.size()) past = *sp.upper_stmt + 1;
      DirectedRun beyond = execute_directed(s.app, s.test, {sp.event, past});
      EXPECT_TRUE(beyond.premature || beyond.failed()) << s.name << " " << describe(sp.event);
    }
  }
}

TEST(Bounds, BudgetCutsAnalysisShort) {
  Scenario s = make_scenario("three_async_distinct");
  TraceMap tm = trace(s.app, s.test);
  BoundsOptions opts;
  opts.optimize = false;
  int runs = 0;
  opts.may_start_run = [&] { return runs < 1; };
  opts.on_run = [&](const BoundsRunRecord&) {
    ++runs;
    return true;
  };
  BoundsReport b = identify_schedule_spaces(s.app, s.test, tm, opts);
  EXPECT_FALSE(b.complete);
  EXPECT_EQ(runs, 1);
}

TEST(Explorer, EnumeratesMaximalDelayFirst) {
  EventRef e1{{1, kLoaded, true}, 0};
  EventRef e2{{2, kLoaded, true}, 0};
  std::vector<ScheduleSpace> spaces = {{e1, 1, 3, BoundEvidence::IdleSync},
                                       {e2, 2, std::nullopt, BoundEvidence::TestEnd}};
  std::vector<ScheduleDirective> want = {
      {e1, 3}, {e1, 2}, {e2, std::nullopt}, {e2, 4}, {e2, 3}};
  EXPECT_EQ(enumerate_directives(spaces, 4), want);
  // 1 + 2 events + (3 - 1) + (5 - 2)
  EXPECT_EQ(default_budget(spaces, 4, 2), 8);
}

TEST(Explorer, DirectedRunDeliversBeforeTarget) {
  TraceMap tm = trace(feed_app(), synced_test());
  const EventRef e = async_events(tm).front();
  DirectedRun run = execute_directed(feed_app(), synced_test(), {e, 2});
  EXPECT_TRUE(run.realized);
  EXPECT_FALSE(run.premature);
  EXPECT_EQ(run.outcome, DriveOutcome::Passed);
  EXPECT_TRUE(order_realized(run.log, run.event_uid, 2));
  EXPECT_FALSE(order_realized(run.log, run.event_uid, 3));
}

TEST(Explorer, UnknownEventIsUnrealizable) {
  EventRef ghost{{1, {"Nobody.home"}, true}, 0};
  ScheduleDirective d{ghost, 2};
  DirectedRun run = execute_directed(feed_app(), synced_test(), d);
  EXPECT_FALSE(run.realized);
  EXPECT_THROW(require_realized(run, d), DirectiveUnrealizable);
}

TEST(Explorer, WitnessReplaysIdentically) {
  for (const auto& s : catalogue()) {
    Verdict v = detect(s.app, s.test);
    if (!v.flaky()) continue;
    ASSERT_TRUE(v.witness && v.failure) << s.name;
    for (int i = 0; i < 3; ++i) {
      DirectedRun run = execute_directed(s.app, s.test, *v.witness);
      ASSERT_TRUE(run.failure) << s.name;
      EXPECT_EQ(run.failure->stmt, v.failure->stmt) << s.name;
      EXPECT_EQ(run.failure->message, v.failure->message) << s.name;
    }
  }
}

TEST(Explorer, LargerBudgetNeverLosesAWitness) {
  for (const auto& s : catalogue()) {
    Verdict full = detect(s.app, s.test);
    if (!full.flaky()) continue;
    bool found = false;
    for (int b = 1; b <= full.runs_used + 2; ++b) {
      DetectOptions opts;
      opts.budget_runs = b;
      Verdict v = detect(s.app, s.test, opts);
      EXPECT_LE(v.runs_used, b) << s.name;
      if (found) EXPECT_TRUE(v.flaky()) << s.name << " budget " << b;
      found = found || v.flaky();
      if (v.flaky()) EXPECT_EQ(v.witness, full.witness) << s.name;
    }
    EXPECT_TRUE(found) << s.name;
  }
}

TEST(Explorer, ParallelPicksSameWitness) {
  for (const auto& s : catalogue()) {
    DetectOptions par;
    par.parallel = 4;
    Verdict a = detect(s.app, s.test);
    Verdict b = detect(s.app, s.test, par);
    EXPECT_EQ(a.kind, b.kind) << s.name;
    EXPECT_EQ(a.witness, b.witness) << s.name;
  }
}

TEST(Explorer, FailingInputIsExecutionError) {
  Verdict v = detect(feed_app(), broken_test());
  EXPECT_EQ(v.kind, VerdictKind::ExecutionError);
  EXPECT_EQ(v.runs_used, 1);
  EXPECT_FALSE(v.message.empty());
}

TEST(Explorer, NoAsyncEventsMeansOneRun) {
  Scenario s = make_scenario("clean_counter");
  Verdict v = detect(s.app, s.test);
  EXPECT_EQ(v.kind, VerdictKind::NotFlakyWithinBudget);
  EXPECT_EQ(v.runs_used, 1);
}
