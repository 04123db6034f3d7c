#include <gtest/gtest.h>

#include <random>

#include "flakeprobe/errors.hpp"
#include "flakeprobe/runtime.hpp"
#include "flakeprobe/testkit.hpp"

using namespace flakeprobe;

namespace {

const HandlerPath kCreate = {"ActivityThread.handleLaunchActivity", "Ping.onCreate"};
const HandlerPath kDone = {"Handler.dispatchMessage", "Ping.onDone"};
const HandlerPath kTapDown = {"ViewRootImpl.dispatchInputEvent", "Ping.onDown"};
const HandlerPath kTapUp = {"ViewRootImpl.dispatchInputEvent", "Ping.onUp"};

// onCreate spawns a worker that holds "work" while sleeping, then posts onDone.
AppProgram ping_app(Tick delay = 5) {
  return AppBuilder("ping")
      .handler(kCreate,
               [delay](HandlerContext& ctx) {
                 ctx.acquire("work");
                 ctx.spawn({"worker", {AsyncOp::sleep(delay), AsyncOp::release("work"),
                                       AsyncOp::post(kDone)}});
               })
      .handler(kDone, [](HandlerContext& ctx) { ctx.state().set("done", 1); })
      .handler(kTapDown, [](HandlerContext& ctx) { ctx.state().set("taps", 1); })
      .handler(kTapUp, [](HandlerContext& ctx) {
        ctx.state().set("taps", ctx.state().value_or("taps", 0) + 1);
      })
      .view("button", "click", {kTapDown, kTapUp})
      .build();
}

TestProgram ping_test() {
  return TestBuilder("ping_test")
      .launch(kCreate)
      .idle_sync({"work"})
      .click("button")
      .check([](const AppState& s) { return s.value_or("done", 0) == 1; }, "not done")
      .build();
}

}  // namespace

TEST(Runtime, EmptyProgramHasMainAndTestingOnly) {
  Runtime rt(AppProgram{}, TestProgram{});
  ASSERT_EQ(rt.threads().size(), 2u);
  EXPECT_EQ(rt.kind(rt.main_thread()), ThreadKind::Main);
  EXPECT_EQ(rt.kind(rt.testing_thread()), ThreadKind::Testing);
  EXPECT_TRUE(rt.queue_empty());
  EXPECT_EQ(rt.now(), 0);
  EXPECT_FALSE(rt.hook_armed());
}

TEST(Runtime, MalformedTestIsRejected) {
  TestProgram bad = TestBuilder("bad").click("missing").build();
  EXPECT_THROW(Runtime(ping_app(), bad), ValidationError);
}

TEST(Runtime, FreshTestingThreadIsRunnableAndTerminatesAtEnd) {
  Runtime rt(ping_app(), ping_test());
  EXPECT_EQ(rt.thread_status(rt.testing_thread()), ThreadStatus::Runnable);
  rt.step_to_idle();
  EXPECT_TRUE(rt.test_finished());
  EXPECT_EQ(rt.thread_status(rt.testing_thread()), ThreadStatus::Terminated);
}

TEST(Runtime, SinglePostedEventIsProcessed) {
  AppProgram app = AppBuilder("one")
                       .handler(kCreate, [](HandlerContext& ctx) { ctx.state().set("x", 7); })
                       .build();
  Runtime rt(app, TestBuilder("t").launch(kCreate).build());
  rt.step_to_idle();
  EXPECT_TRUE(rt.queue_empty());
  EXPECT_EQ(rt.dispatched_count(), 1u);
  EXPECT_EQ(rt.state().get("x"), 7);
}

TEST(Runtime, TimedWaitAdvancesClockByItsLength) {
  Runtime rt(AppProgram{}, TestBuilder("t").timed_wait(10).build());
  rt.step_to_idle();
  EXPECT_EQ(rt.now(), 10);
  EXPECT_TRUE(rt.test_finished());
}

TEST(Runtime, HookSeesClickEventsInPostingOrder) {
  AppProgram app = ping_app();
  TestProgram test = TestBuilder("t").click("button").build();
  Runtime rt(app, test);
  std::vector<HandlerPath> seen;
  rt.arm_enqueue_hook([&](const Event& e) {
    seen.push_back(e.path);
    return HookDecision::Pass;
  });
  rt.step_to_idle();
  EXPECT_EQ(seen, app.find_view("button", "click")->events);
}

TEST(Runtime, HookOnTerminatedRuntimeIsRejected) {
  Runtime rt(ping_app(), ping_test());
  rt.terminate();
  EXPECT_THROW(rt.arm_enqueue_hook([](const Event&) { return HookDecision::Pass; }),
               NoOpError);
}

TEST(Runtime, SuspendErrors) {
  Runtime rt(ping_app(), ping_test());
  EXPECT_THROW(rt.suspend_thread(ThreadId{42}), UnknownThread);
  EXPECT_THROW(rt.thread_status(ThreadId{42}), UnknownThread);
  rt.step_to_idle();
  EXPECT_THROW(rt.suspend_thread(rt.testing_thread()), AlreadyTerminated);
}

TEST(Runtime, SuspendedWorkerPostsNothingAndTestingThreadWaits) {
  Runtime rt(ping_app(), ping_test());
  // Step until the worker exists.
  while (rt.threads().size() < 3) ASSERT_TRUE(rt.step());
  const ThreadId worker = rt.threads()[2];
  rt.suspend_thread(worker);
  EXPECT_THROW(rt.step_to_idle(), DeadlockError);
  EXPECT_EQ(rt.thread_status(rt.testing_thread()), ThreadStatus::Waiting);
  EXPECT_EQ(rt.testing_wait(), TestWait::IdleSync);
  for (const auto& e : rt.queued_events()) EXPECT_NE(e.poster, worker);
  rt.resume_thread(worker);
  rt.step_to_idle();
  EXPECT_TRUE(rt.test_finished());
  EXPECT_FALSE(rt.failed());
}

TEST(Runtime, SuspendResumeWithoutStepsIsInvisible) {
  Runtime a(ping_app(), ping_test());
  Runtime b(ping_app(), ping_test());
  while (a.threads().size() < 3) a.step();
  while (b.threads().size() < 3) b.step();
  b.suspend_thread(b.threads()[2]);
  b.resume_thread(b.threads()[2]);
  a.step_to_idle();
  b.step_to_idle();
  EXPECT_EQ(a.state(), b.state());
  EXPECT_EQ(a.now(), b.now());
  EXPECT_EQ(a.log().delivery_tokens(), b.log().delivery_tokens());
}

TEST(Runtime, HeldEventIsDeliveredOnRelease) {
  RuntimeOptions opts;
  opts.statement_breakpoints = true;
  Runtime rt(ping_app(), ping_test(), opts);
  rt.arm_enqueue_hook(
      [](const Event& e) { return e.is_async ? HookDecision::Hold : HookDecision::Pass; });
  for (int k = 1; k <= 3; ++k) {
    rt.continue_statement();
    rt.step_to_idle();
  }
  ASSERT_EQ(rt.held_events().size(), 1u);
  EXPECT_EQ(rt.held_events()[0].path, kDone);
  EXPECT_EQ(rt.held_events()[0].stmt, 1);
  rt.release_held(rt.held_events()[0].uid);
  rt.step_to_idle();
  EXPECT_EQ(rt.state().get("done"), 1);
  rt.continue_statement();
  rt.step_to_idle();
  EXPECT_TRUE(rt.test_finished());
  EXPECT_FALSE(rt.failed());
}

TEST(Runtime, HeldEventMakesAssertionFail) {
  Runtime rt(ping_app(), ping_test());
  rt.arm_enqueue_hook(
      [](const Event& e) { return e.is_async ? HookDecision::Hold : HookDecision::Pass; });
  rt.step_to_idle();
  ASSERT_TRUE(rt.failed());
  EXPECT_EQ(rt.failure()->message, "not done");
  EXPECT_EQ(rt.failure()->stmt, 4);
}

TEST(Runtime, HoldingSyncEventIsAnError) {
  Runtime rt(ping_app(), ping_test());
  rt.arm_enqueue_hook([](const Event&) { return HookDecision::Hold; });
  EXPECT_THROW(rt.step_to_idle(), Error);
}

TEST(Runtime, RunLogIsByteIdenticalAcrossRuns) {
  Runtime a(ping_app(), ping_test());
  Runtime b(ping_app(), ping_test());
  a.step_to_idle();
  b.step_to_idle();
  EXPECT_FALSE(a.log().serialize().empty());
  EXPECT_EQ(a.log().serialize(), b.log().serialize());
}

TEST(Runtime, EveryEventIsDispatchedOnceOnMain) {
  Runtime rt(ping_app(), ping_test());
  rt.step_to_idle();
  std::map<std::uint64_t, int> posts, dispatches;
  for (const auto& r : rt.log().records()) {
    if (r.action == "post") ++posts[r.event_uid];
    if (r.action == "dispatch") {
      ++dispatches[r.event_uid];
      EXPECT_EQ(r.thread, rt.main_thread());
    }
  }
  EXPECT_EQ(posts, dispatches);
  EXPECT_EQ(posts.size(), rt.intercepted_count());
}

TEST(Runtime, AsyncFlagFollowsPosterKind) {
  Runtime rt(ping_app(), ping_test());
  std::vector<Event> seen;
  rt.arm_enqueue_hook([&](const Event& e) {
    seen.push_back(e);
    return HookDecision::Pass;
  });
  rt.step_to_idle();
  ASSERT_EQ(seen.size(), 4u);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    EXPECT_EQ(seen[i].enqueue_index, i);
    EXPECT_EQ(seen[i].is_async, rt.kind(seen[i].poster) == ThreadKind::Async);
  }
}

TEST(Runtime, RandomSuspensionNeverLeaksPosts) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Runtime rt(ping_app(3), ping_test());
    std::set<int> suspended;
    std::vector<Event> posts;
    rt.arm_enqueue_hook([&](const Event& e) {
      posts.push_back(e);
      return HookDecision::Pass;
    });
    for (int i = 0; i < 200 && !rt.test_finished() && !rt.failed(); ++i) {
      const auto ids = rt.threads();
      const ThreadId pick = ids[rng() % ids.size()];
      if (rt.kind(pick) == ThreadKind::Async && rt.thread_status(pick) != ThreadStatus::Terminated) {
        if (suspended.count(pick.value)) {
          rt.resume_thread(pick);
          suspended.erase(pick.value);
        } else {
          rt.suspend_thread(pick);
          suspended.insert(pick.value);
        }
      }
      const std::size_t before = posts.size();
      if (!rt.step()) rt.advance_clock();
      for (std::size_t k = before; k < posts.size(); ++k) {
        EXPECT_EQ(suspended.count(posts[k].poster.value), 0u);
      }
    }
  }
}

TEST(Runtime, HandlerExceptionFailsTest) {
  AppProgram app = AppBuilder("boom")
                       .handler(kCreate, [](HandlerContext& ctx) { ctx.fail("boom"); })
                       .build();
  Runtime rt(app, TestBuilder("t").launch(kCreate).build());
  rt.step_to_idle();
  ASSERT_TRUE(rt.failed());
  EXPECT_EQ(rt.failure()->message, "boom");
  EXPECT_EQ(rt.failure()->stmt, 1);
}

TEST(Runtime, BreakpointsParkTestingThreadBetweenStatements) {
  RuntimeOptions opts;
  opts.statement_breakpoints = true;
  Runtime rt(ping_app(), ping_test(), opts);
  EXPECT_TRUE(rt.testing_at_breakpoint());
  EXPECT_EQ(rt.thread_status(rt.testing_thread()), ThreadStatus::Suspended);
  rt.step_to_idle();
  EXPECT_EQ(rt.current_statement(), 0);
  rt.continue_statement();
  rt.step_to_idle();
  EXPECT_TRUE(rt.testing_at_breakpoint());
  EXPECT_EQ(rt.current_statement(), 1);
}
