#pragma once

// Deterministic simulator of the single-UI-thread event model: a main looper
// thread, one testing thread and any number of async threads, all driven by a
// single controller loop under a virtual clock.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "flakeprobe/program.hpp"

namespace flakeprobe {

enum class ThreadKind { Main, Testing, Async };
enum class ThreadStatus { Runnable, Running, Waiting, Suspended, Terminated };

std::string_view to_string(ThreadKind kind);
std::string_view to_string(ThreadStatus status);

struct ThreadId {
  int value = -1;

  auto operator<=>(const ThreadId&) const = default;
};

struct Event {
  std::uint64_t uid = 0;
  HandlerPath path;
  ThreadId poster;
  std::uint64_t enqueue_index = 0;
  bool is_async = false;
  // Statement the testing thread had most recently begun when this was posted.
  int stmt = 0;
};

enum class HookDecision { Pass, Hold };
enum class QueuePosition { Back, Front };

/// What the testing thread is currently blocked on, if anything.
enum class TestWait { None, Drain, IdleSync, Timed, Busy };

using EnqueueHook = std::function<HookDecision(const Event&)>;

class Runtime;
using DispatchGate = std::function<void(Runtime&)>;

struct RunLogRecord {
  std::uint64_t step = 0;
  ThreadId thread;
  std::string action;
  std::string detail;
  // Delivery-order token ("S<k>" for a statement start, "D:<sig>" for a
  // dispatch). Empty for bookkeeping records. Not serialized.
  std::string token;
  std::uint64_t event_uid = 0;
};

class RunLog {
 public:
  void append(RunLogRecord record) { records_.push_back(std::move(record)); }
  const std::vector<RunLogRecord>& records() const { return records_; }

  /// `step TAB thread TAB action TAB detail`, one line per record.
  std::string serialize() const;

  /// Delivery tokens up to the end of the test (or its failure).
  std::vector<std::string> delivery_tokens() const;

 private:
  std::vector<RunLogRecord> records_;
};

struct FailureInfo {
  int stmt = 0;
  std::string message;

  bool operator==(const FailureInfo&) const = default;
};

struct RuntimeOptions {
  // Park the testing thread before every statement until the controller lets
  // it continue.
  bool statement_breakpoints = false;
  // When set, jittered sleeps draw their duration from their noise range.
  std::optional<std::uint64_t> delay_seed;
  std::uint64_t step_limit = 1'000'000;
};

class Runtime {
 public:
  /// Validates both programs; throws ValidationError when malformed.
  Runtime(const AppProgram& app, const TestProgram& test, RuntimeOptions options = {});
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // Thread registry.
  ThreadId main_thread() const { return ThreadId{0}; }
  ThreadId testing_thread() const { return ThreadId{1}; }
  std::vector<ThreadId> threads() const;
  ThreadKind kind(ThreadId tid) const;
  const std::string& name(ThreadId tid) const;
  ThreadStatus thread_status(ThreadId tid) const;
  TestWait testing_wait() const;

  // Instrumentation.
  void arm_enqueue_hook(EnqueueHook hook);
  bool hook_armed() const { return static_cast<bool>(hook_); }
  void set_dispatch_gate(DispatchGate gate);
  void suspend_thread(ThreadId tid);
  void resume_thread(ThreadId tid, QueuePosition position = QueuePosition::Back);
  /// Events diverted by the enqueue hook, in hold order.
  std::vector<Event> held_events() const;
  void release_held(std::uint64_t uid, QueuePosition position = QueuePosition::Back);

  // Execution.
  bool step();
  void run_until_stalled();
  bool advance_clock();
  /// Runs everything not suspended until the queue is empty and nothing is
  /// runnable, advancing the clock across timed waits.
  void step_to_idle();
  /// Lets a testing thread parked at a statement breakpoint run one statement.
  void continue_statement();
  void terminate();

  // Queries.
  bool terminated() const { return terminated_; }
  bool test_finished() const { return finished_; }
  bool failed() const { return failure_.has_value(); }
  const std::optional<FailureInfo>& failure() const { return failure_; }
  bool testing_at_breakpoint() const;
  int current_statement() const { return current_stmt_; }
  int statement_count() const { return test_.size(); }
  bool queue_empty() const { return queue_.empty(); }
  std::size_t queue_size() const { return queue_.size(); }
  std::vector<Event> queued_events() const { return {queue_.begin(), queue_.end()}; }
  Tick now() const { return now_; }
  const AppState& state() const { return state_; }
  int resource_count(const std::string& resource) const;
  std::uint64_t intercepted_count() const { return intercepted_; }
  std::uint64_t dispatched_count() const { return dispatched_; }
  const std::vector<AssertionOutcome>& outcomes() const { return outcomes_; }
  const RunLog& log() const { return log_; }
  const TestProgram& test() const { return test_; }

 private:
  enum class Wait { None, Breakpoint, Drain, IdleSync, Timed, Busy, Sleep };

  struct Thread {
    ThreadId id;
    ThreadKind kind = ThreadKind::Async;
    std::string name;
    bool suspended = false;
    bool terminated = false;
    Wait wait = Wait::None;
    Tick wake = 0;
    // Async task body and program counter.
    std::vector<AsyncOp> ops;
    std::size_t pc = 0;
    std::optional<Event> held;
  };

  class Context;
  friend class Context;

  Thread& thread(ThreadId tid);
  const Thread& thread(ThreadId tid) const;
  bool can_step(const Thread& t) const;
  bool idle_sync_satisfied(const IdleSync& sync) const;
  void check_live() const;

  void step_main(Thread& t);
  void step_testing(Thread& t);
  void step_async(Thread& t);
  void begin_statement(Thread& t);
  void complete_statement(Thread& t);

  Event make_event(ThreadId poster, const HandlerPath& path);
  void post_from(ThreadId poster, const HandlerPath& path);
  void enqueue(Event event, QueuePosition position);
  void invoke(ThreadId self, const HandlerPath& path);
  ThreadId spawn(AsyncTaskSpec task);
  void acquire(ThreadId self, const std::string& resource);
  void release(ThreadId self, const std::string& resource);
  void fail(std::string message);
  void record(ThreadId tid, std::string action, std::string detail,
              std::string token = {}, std::uint64_t uid = 0);

  AppProgram app_;
  TestProgram test_;
  RuntimeOptions options_;

  std::vector<Thread> threads_;
  std::deque<Event> queue_;
  std::map<std::string, int> resources_;
  AppState state_;
  Tick now_ = 0;

  EnqueueHook hook_;
  DispatchGate gate_;

  // Testing-thread progress.
  std::size_t stmt_index_ = 0;
  bool stmt_permitted_ = false;
  Tick stmt_cost_ = 0;
  int current_stmt_ = 0;

  std::size_t rr_cursor_ = 0;
  std::uint64_t step_no_ = 0;
  std::uint64_t next_uid_ = 1;
  std::uint64_t intercepted_ = 0;
  std::uint64_t dispatched_ = 0;
  std::optional<ThreadId> running_;

  bool finished_ = false;
  bool terminated_ = false;
  std::optional<FailureInfo> failure_;
  std::vector<AssertionOutcome> outcomes_;
  RunLog log_;
  std::optional<std::mt19937_64> rng_;
};

}  // namespace flakeprobe
