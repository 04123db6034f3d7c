#include <gtest/gtest.h>

#include "flakeprobe/errors.hpp"
#include "flakeprobe/testkit.hpp"

using namespace flakeprobe;

namespace {

const HandlerPath kCreate = {"ActivityThread.handleLaunchActivity", "Counter.onCreate"};
const HandlerPath kInc = {"ViewRootImpl.dispatchInputEvent", "View.performClick",
                          "Counter.onIncrement"};
const HandlerPath kBoom = {"Counter.explode"};

AppProgram counter_app() {
  return AppBuilder("counter")
      .handler(kCreate, [](HandlerContext& ctx) { ctx.state().set("count", 0); })
      .handler(kInc,
               [](HandlerContext& ctx) {
                 ctx.state().set("count", ctx.state().value_or("count", 0) + 1);
               })
      .handler(kBoom, [](HandlerContext&) { throw std::out_of_range("index 3"); })
      .view("inc", "click", {kInc})
      .build();
}

}  // namespace

TEST(Validate, RejectsDuplicateHandlers) {
  AppProgram app = counter_app();
  app.handlers.push_back(app.handlers.front());
  EXPECT_THROW(validate(app, TestProgram{}), ValidationError);
}

TEST(Validate, RejectsGappedOrdinals) {
  TestProgram t = TestBuilder("t").launch(kCreate).click("inc").build();
  t.statements[1].ordinal = 3;
  EXPECT_THROW(validate(counter_app(), t), ValidationError);
}

TEST(Validate, RejectsUnknownLaunchTarget) {
  TestProgram t = TestBuilder("t").launch({"Nope.onCreate"}).build();
  EXPECT_THROW(validate(counter_app(), t), ValidationError);
}

TEST(Validate, RejectsUnknownView) {
  TestProgram t = TestBuilder("t").click("dec").build();
  EXPECT_THROW(validate(counter_app(), t), ValidationError);
}

TEST(TestBuilder, AssignsContiguousOrdinals) {
  TestProgram t = TestBuilder("t").launch(kCreate).idle_sync().click("inc").timed_wait(3).build();
  ASSERT_EQ(t.size(), 4);
  for (int i = 0; i < t.size(); ++i) EXPECT_EQ(t.statements[i].ordinal, i + 1);
  EXPECT_EQ(sync_op_count(t), 2);
}

TEST(RunPlain, DeterministicCounterPasses) {
  TestProgram t = TestBuilder("t")
                      .launch(kCreate)
                      .click("inc")
                      .click("inc")
                      .check([](const AppState& s) { return s.value_or("count", -1) == 2; },
                             "count != 2")
                      .build();
  PlainRun run = run_plain(counter_app(), t);
  EXPECT_TRUE(run.passed());
  ASSERT_EQ(run.outcomes.size(), 1u);
  EXPECT_TRUE(run.outcomes[0].passed);
  EXPECT_EQ(run.events, 3u);
}

TEST(RunPlain, ThrowingHandlerFailsWithItsMessage) {
  TestProgram t = TestBuilder("t").launch(kCreate).custom(kBoom).click("inc").build();
  PlainRun run = run_plain(counter_app(), t);
  ASSERT_FALSE(run.passed());
  EXPECT_EQ(run.failure->stmt, 2);
  EXPECT_EQ(run.failure->message, "index 3");
  // Fail-fast: statement 3 never ran.
  EXPECT_FALSE(run.final_state.value_or("count", 0) > 0);
}

TEST(RunPlain, FailingAssertStopsTheTest) {
  TestProgram t = TestBuilder("t")
                      .launch(kCreate)
                      .check([](const AppState&) { return false; }, "first")
                      .check([](const AppState&) { return false; }, "second")
                      .build();
  PlainRun run = run_plain(counter_app(), t);
  ASSERT_EQ(run.outcomes.size(), 1u);
  EXPECT_EQ(run.outcomes[0], (AssertionOutcome{2, false, "first"}));
}

TEST(RunPlain, StatementBoundariesAreLogged) {
  TestProgram t = TestBuilder("t").launch(kCreate).click("inc").build();
  PlainRun run = run_plain(counter_app(), t);
  std::vector<std::string> marks;
  for (const auto& r : run.log.records()) {
    if (r.action == "stmt-begin" || r.action == "stmt-end") marks.push_back(r.action);
  }
  EXPECT_EQ(marks, (std::vector<std::string>{"stmt-begin", "stmt-end", "stmt-begin", "stmt-end"}));
}
