#include "flakeprobe/runtime.hpp"

#include <algorithm>
#include <sstream>

#include "flakeprobe/errors.hpp"
#include "flakeprobe/testkit.hpp"

namespace flakeprobe {

namespace {

std::string event_detail(const Event& e) {
  std::ostringstream os;
  os << "uid=" << e.uid << " stmt=" << e.stmt << " async=" << (e.is_async ? 1 : 0)
     << " sig=" << join_path(e.path);
  return os.str();
}

std::string dispatch_token(const Event& e) {
  return "D:" + join_path(e.path) + (e.is_async ? "!" : "");
}

std::string thread_label(ThreadId tid) {
  if (tid.value < 0) return "-";
  return "T" + std::to_string(tid.value);
}

}  // namespace

std::string_view to_string(ThreadKind kind) {
  switch (kind) {
    case ThreadKind::Main: return "Main";
    case ThreadKind::Testing: return "Testing";
    case ThreadKind::Async: return "Async";
  }
  return "?";
}

std::string_view to_string(ThreadStatus status) {
  switch (status) {
    case ThreadStatus::Runnable: return "Runnable";
    case ThreadStatus::Running: return "Running";
    case ThreadStatus::Waiting: return "Waiting";
    case ThreadStatus::Suspended: return "Suspended";
    case ThreadStatus::Terminated: return "Terminated";
  }
  return "?";
}

std::string RunLog::serialize() const {
  std::ostringstream os;
  for (const auto& r : records_) {
    os << r.step << '\t' << thread_label(r.thread) << '\t' << r.action << '\t' << r.detail
       << '\n';
  }
  return os.str();
}

std::vector<std::string> RunLog::delivery_tokens() const {
  std::vector<std::string> tokens;
  for (const auto& r : records_) {
    if (r.action == "test-end" || r.action == "fail") break;
    if (!r.token.empty()) tokens.push_back(r.token);
  }
  return tokens;
}

class Runtime::Context : public HandlerContext {
 public:
  Context(Runtime& rt, ThreadId self) : rt_(rt), self_(self) {}

  AppState& state() override { return rt_.state_; }
  void post(const HandlerPath& path) override { rt_.post_from(self_, path); }
  void spawn(AsyncTaskSpec task) override { rt_.spawn(std::move(task)); }
  void acquire(const std::string& resource) override { rt_.acquire(self_, resource); }
  void release(const std::string& resource) override { rt_.release(self_, resource); }
  Tick now() const override { return rt_.now_; }

 private:
  Runtime& rt_;
  ThreadId self_;
};

Runtime::Runtime(const AppProgram& app, const TestProgram& test, RuntimeOptions options)
    : app_(app), test_(test), options_(options) {
  validate(app_, test_);
  state_ = app_.initial_state;
  if (options_.delay_seed) rng_.emplace(*options_.delay_seed);

  Thread main;
  main.id = ThreadId{0};
  main.kind = ThreadKind::Main;
  main.name = "main";
  threads_.push_back(std::move(main));

  Thread testing;
  testing.id = ThreadId{1};
  testing.kind = ThreadKind::Testing;
  testing.name = "testing";
  if (options_.statement_breakpoints && !test_.statements.empty()) {
    testing.wait = Wait::Breakpoint;
  }
  threads_.push_back(std::move(testing));
}

Runtime::~Runtime() = default;

Runtime::Thread& Runtime::thread(ThreadId tid) {
  if (tid.value < 0 || static_cast<std::size_t>(tid.value) >= threads_.size()) {
    throw UnknownThread("unknown thread id " + std::to_string(tid.value));
  }
  return threads_[static_cast<std::size_t>(tid.value)];
}

const Runtime::Thread& Runtime::thread(ThreadId tid) const {
  if (tid.value < 0 || static_cast<std::size_t>(tid.value) >= threads_.size()) {
    throw UnknownThread("unknown thread id " + std::to_string(tid.value));
  }
  return threads_[static_cast<std::size_t>(tid.value)];
}

std::vector<ThreadId> Runtime::threads() const {
  std::vector<ThreadId> ids;
  ids.reserve(threads_.size());
  for (const auto& t : threads_) ids.push_back(t.id);
  return ids;
}

ThreadKind Runtime::kind(ThreadId tid) const { return thread(tid).kind; }

const std::string& Runtime::name(ThreadId tid) const { return thread(tid).name; }

bool Runtime::idle_sync_satisfied(const IdleSync& sync) const {
  if (!queue_.empty()) return false;
  return std::all_of(sync.resources.begin(), sync.resources.end(),
                     [this](const std::string& r) { return resource_count(r) == 0; });
}

bool Runtime::can_step(const Thread& t) const {
  if (t.terminated || t.suspended) return false;
  switch (t.kind) {
    case ThreadKind::Main:
      return !queue_.empty();
    case ThreadKind::Testing:
      switch (t.wait) {
        case Wait::None: return true;
        case Wait::Breakpoint: return false;
        case Wait::Drain: return queue_.empty();
        case Wait::IdleSync:
          return idle_sync_satisfied(std::get<IdleSync>(test_.statements[stmt_index_].action));
        case Wait::Timed:
        case Wait::Busy:
        case Wait::Sleep: return now_ >= t.wake;
      }
      return false;
    case ThreadKind::Async:
      if (t.wait == Wait::Sleep) return now_ >= t.wake;
      return t.pc < t.ops.size();
  }
  return false;
}

ThreadStatus Runtime::thread_status(ThreadId tid) const {
  const Thread& t = thread(tid);
  if (t.terminated) return ThreadStatus::Terminated;
  if (t.suspended || t.wait == Wait::Breakpoint) return ThreadStatus::Suspended;
  if (running_ == tid) return ThreadStatus::Running;
  if (t.kind == ThreadKind::Main) {
    return queue_.empty() ? ThreadStatus::Waiting : ThreadStatus::Runnable;
  }
  if (can_step(t)) return ThreadStatus::Runnable;
  // A testing thread busy performing its action is executing, not waiting.
  return t.wait == Wait::Busy ? ThreadStatus::Running : ThreadStatus::Waiting;
}

TestWait Runtime::testing_wait() const {
  const Thread& t = thread(testing_thread());
  if (t.terminated || t.suspended || can_step(t)) return TestWait::None;
  switch (t.wait) {
    case Wait::Drain: return TestWait::Drain;
    case Wait::IdleSync: return TestWait::IdleSync;
    case Wait::Timed: return TestWait::Timed;
    case Wait::Busy: return TestWait::Busy;
    default: return TestWait::None;
  }
}

bool Runtime::testing_at_breakpoint() const {
  const Thread& t = thread(testing_thread());
  return !t.terminated && t.wait == Wait::Breakpoint;
}

int Runtime::resource_count(const std::string& resource) const {
  auto it = resources_.find(resource);
  return it == resources_.end() ? 0 : it->second;
}

void Runtime::check_live() const {
  if (terminated_) throw NoOpError("runtime has been terminated");
}

void Runtime::arm_enqueue_hook(EnqueueHook hook) {
  check_live();
  hook_ = std::move(hook);
}

void Runtime::set_dispatch_gate(DispatchGate gate) {
  check_live();
  gate_ = std::move(gate);
}

void Runtime::suspend_thread(ThreadId tid) {
  Thread& t = thread(tid);
  if (t.terminated) throw AlreadyTerminated("thread " + t.name + " has terminated");
  if (t.suspended) return;
  t.suspended = true;
  record(tid, "suspend", t.name);
}

void Runtime::resume_thread(ThreadId tid, QueuePosition position) {
  Thread& t = thread(tid);
  if (t.terminated) throw AlreadyTerminated("thread " + t.name + " has terminated");
  if (!t.suspended) return;
  t.suspended = false;
  record(tid, "resume", t.name);
  if (t.held) {
    Event e = std::move(*t.held);
    t.held.reset();
    ++t.pc;
    record(tid, "release", event_detail(e), {}, e.uid);
    enqueue(std::move(e), position);
    Thread& again = thread(tid);
    if (again.pc >= again.ops.size()) {
      again.terminated = true;
      record(tid, "exit", again.name);
    }
  }
}

std::vector<Event> Runtime::held_events() const {
  std::vector<Event> held;
  for (const auto& t : threads_) {
    if (t.held) held.push_back(*t.held);
  }
  std::sort(held.begin(), held.end(), [](const Event& a, const Event& b) {
    return a.enqueue_index < b.enqueue_index;
  });
  return held;
}

void Runtime::release_held(std::uint64_t uid, QueuePosition position) {
  for (const auto& t : threads_) {
    if (t.held && t.held->uid == uid) {
      resume_thread(t.id, position);
      return;
    }
  }
  throw Error("no held event with uid " + std::to_string(uid));
}

bool Runtime::step() {
  if (terminated_ || failure_) return false;
  if (step_no_ >= options_.step_limit) throw Error("step limit exceeded");
  const std::size_t n = threads_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = (rr_cursor_ + i) % n;
    if (!can_step(threads_[idx])) continue;
    rr_cursor_ = (idx + 1) % n;
    const ThreadId tid = threads_[idx].id;
    ++step_no_;
    running_ = tid;
    switch (threads_[idx].kind) {
      case ThreadKind::Main: step_main(threads_[idx]); break;
      case ThreadKind::Testing: step_testing(threads_[idx]); break;
      case ThreadKind::Async: step_async(threads_[idx]); break;
    }
    running_.reset();
    return true;
  }
  return false;
}

void Runtime::run_until_stalled() {
  while (step()) {
  }
}

bool Runtime::advance_clock() {
  if (terminated_ || failure_) return false;
  std::optional<Tick> next;
  for (const auto& t : threads_) {
    if (t.terminated || t.suspended) continue;
    if (t.wait != Wait::Timed && t.wait != Wait::Busy && t.wait != Wait::Sleep) continue;
    if (t.wake <= now_) continue;
    if (!next || t.wake < *next) next = t.wake;
  }
  if (!next) return false;
  record(ThreadId{-1}, "clock", std::to_string(now_) + "->" + std::to_string(*next));
  now_ = *next;
  return true;
}

void Runtime::step_to_idle() {
  check_live();
  while (true) {
    run_until_stalled();
    if (failure_ || terminated_) return;
    if (!advance_clock()) break;
  }
  const Thread& t = thread(testing_thread());
  if (t.terminated || t.suspended || t.wait == Wait::Breakpoint) return;
  if (!can_step(t) && (t.wait == Wait::Drain || t.wait == Wait::IdleSync)) {
    const Statement& s = test_.statements[stmt_index_];
    throw DeadlockError("testing thread blocked in statement " + std::to_string(s.ordinal) +
                        " (" + s.describe() + ") and no thread can make progress");
  }
}

void Runtime::continue_statement() {
  check_live();
  Thread& t = thread(testing_thread());
  if (t.terminated || t.wait != Wait::Breakpoint) {
    throw Error("testing thread is not parked at a statement breakpoint");
  }
  t.wait = Wait::None;
  stmt_permitted_ = true;
}

void Runtime::terminate() {
  if (terminated_) return;
  terminated_ = true;
  record(ThreadId{-1}, "terminate", "");
}

void Runtime::step_main(Thread& t) {
  const ThreadId tid = t.id;
  if (gate_) gate_(*this);
  if (failure_ || terminated_ || queue_.empty()) return;
  Event e = std::move(queue_.front());
  queue_.pop_front();
  ++dispatched_;
  record(tid, "dispatch", event_detail(e), dispatch_token(e), e.uid);
  invoke(tid, e.path);
}

void Runtime::step_testing(Thread& t) {
  switch (t.wait) {
    case Wait::None:
      begin_statement(t);
      return;
    case Wait::Drain:
      if (stmt_cost_ > 0) {
        t.wait = Wait::Busy;
        t.wake = now_ + stmt_cost_;
        record(t.id, "busy", std::to_string(stmt_cost_));
        return;
      }
      complete_statement(t);
      return;
    case Wait::Busy:
    case Wait::Timed:
    case Wait::IdleSync:
      complete_statement(t);
      return;
    case Wait::Breakpoint:
    case Wait::Sleep:
      return;
  }
}

void Runtime::begin_statement(Thread& t) {
  const ThreadId tid = t.id;
  if (stmt_index_ >= test_.statements.size()) {
    finished_ = true;
    t.terminated = true;
    record(tid, "test-end", "");
    return;
  }
  const Statement& s = test_.statements[stmt_index_];
  stmt_permitted_ = false;
  stmt_cost_ = 0;
  current_stmt_ = s.ordinal;
  record(tid, "stmt-begin", std::to_string(s.ordinal) + " " + s.describe(),
         "S" + std::to_string(s.ordinal));

  if (const auto* launch = std::get_if<LaunchActivity>(&s.action)) {
    stmt_cost_ = launch->cost;
    post_from(tid, launch->path);
    thread(tid).wait = Wait::Drain;
  } else if (const auto* ui = std::get_if<UiInteraction>(&s.action)) {
    stmt_cost_ = ui->cost;
    for (const auto& path : app_.find_view(ui->target, ui->gesture)->events) {
      post_from(tid, path);
    }
    thread(tid).wait = Wait::Drain;
  } else if (const auto* sync = std::get_if<IdleSync>(&s.action)) {
    if (idle_sync_satisfied(*sync)) {
      complete_statement(thread(tid));
    } else {
      thread(tid).wait = Wait::IdleSync;
      record(tid, "wait", "idle-sync");
    }
  } else if (const auto* timed = std::get_if<TimedWait>(&s.action)) {
    if (timed->ticks <= 0) {
      complete_statement(thread(tid));
    } else {
      Thread& self = thread(tid);
      self.wait = Wait::Timed;
      self.wake = now_ + timed->ticks;
      record(tid, "wait", "timed " + std::to_string(timed->ticks));
    }
  } else if (const auto* check = std::get_if<Assert>(&s.action)) {
    if (check->predicate(state_)) {
      outcomes_.push_back({s.ordinal, true, check->message});
      complete_statement(thread(tid));
    } else {
      fail(check->message);
    }
  } else if (const auto* custom = std::get_if<Custom>(&s.action)) {
    invoke(tid, custom->path);
    if (!failure_) complete_statement(thread(tid));
  }
}

void Runtime::complete_statement(Thread& t) {
  const Statement& s = test_.statements[stmt_index_];
  record(t.id, "stmt-end", std::to_string(s.ordinal));
  ++stmt_index_;
  t.wait = (options_.statement_breakpoints && stmt_index_ < test_.statements.size())
               ? Wait::Breakpoint
               : Wait::None;
}

void Runtime::step_async(Thread& t) {
  const ThreadId tid = t.id;
  if (t.wait == Wait::Sleep) {
    t.wait = Wait::None;
    ++t.pc;
  } else {
    const AsyncOp& op = t.ops[t.pc];
    switch (op.kind) {
      case AsyncOp::Kind::Sleep: {
        Tick duration = op.ticks;
        if (rng_ && op.noise) {
          const auto [lo, hi] = *op.noise;
          const auto span = static_cast<std::uint64_t>(hi - lo + 1);
          duration = lo + static_cast<Tick>((*rng_)() % span);
        }
        record(tid, "sleep", std::to_string(duration));
        if (duration <= 0) {
          ++t.pc;
        } else {
          t.wait = Wait::Sleep;
          t.wake = now_ + duration;
        }
        break;
      }
      case AsyncOp::Kind::Post: {
        Event e = make_event(tid, op.path);
        const HookDecision decision = hook_ ? hook_(e) : HookDecision::Pass;
        Thread& self = thread(tid);
        if (decision == HookDecision::Hold) {
          record(tid, "hold", event_detail(e), {}, e.uid);
          self.held = std::move(e);
          self.suspended = true;
          return;
        }
        ++self.pc;
        enqueue(std::move(e), QueuePosition::Back);
        break;
      }
      case AsyncOp::Kind::Acquire:
        acquire(tid, op.key);
        ++t.pc;
        break;
      case AsyncOp::Kind::Release:
        release(tid, op.key);
        ++t.pc;
        break;
      case AsyncOp::Kind::Set:
        state_.set(op.key, op.value);
        record(tid, "set", op.key + "=" + std::to_string(op.value));
        ++t.pc;
        break;
    }
  }
  Thread& self = thread(tid);
  if (self.wait == Wait::None && self.pc >= self.ops.size()) {
    self.terminated = true;
    record(tid, "exit", self.name);
  }
}

Event Runtime::make_event(ThreadId poster, const HandlerPath& path) {
  Event e;
  e.uid = next_uid_++;
  e.path = path;
  e.poster = poster;
  e.enqueue_index = intercepted_++;
  e.is_async = thread(poster).kind == ThreadKind::Async;
  e.stmt = current_stmt_;
  return e;
}

void Runtime::post_from(ThreadId poster, const HandlerPath& path) {
  Event e = make_event(poster, path);
  if (hook_ && hook_(e) == HookDecision::Hold) {
    throw Error("only events posted by async threads can be held");
  }
  enqueue(std::move(e), QueuePosition::Back);
}

void Runtime::enqueue(Event event, QueuePosition position) {
  record(event.poster, "post", event_detail(event), {}, event.uid);
  if (position == QueuePosition::Front) {
    queue_.push_front(std::move(event));
  } else {
    queue_.push_back(std::move(event));
  }
}

void Runtime::invoke(ThreadId self, const HandlerPath& path) {
  const HandlerDef* handler = app_.find_handler(path);
  if (handler == nullptr) {
    fail("no handler registered for " + join_path(path));
    return;
  }
  Context ctx(*this, self);
  try {
    handler->body(ctx);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    fail(ex.what());
  }
}

ThreadId Runtime::spawn(AsyncTaskSpec task) {
  Thread t;
  t.id = ThreadId{static_cast<int>(threads_.size())};
  t.kind = ThreadKind::Async;
  t.name = std::move(task.name);
  t.ops = std::move(task.ops);
  t.terminated = t.ops.empty();
  const ThreadId tid = t.id;
  const std::string label = thread_label(tid) + " " + t.name;
  threads_.push_back(std::move(t));
  record(running_.value_or(main_thread()), "spawn", label);
  return tid;
}

void Runtime::acquire(ThreadId self, const std::string& resource) {
  const int count = ++resources_[resource];
  record(self, "res-acquire", resource + "=" + std::to_string(count));
}

void Runtime::release(ThreadId self, const std::string& resource) {
  int& count = resources_[resource];
  if (count <= 0) throw Error("resource " + resource + " released while idle");
  --count;
  record(self, "res-release", resource + "=" + std::to_string(count));
}

void Runtime::fail(std::string message) {
  if (finished_) {
    record(running_.value_or(main_thread()), "post-test-crash", message);
    return;
  }
  failure_ = FailureInfo{current_stmt_, message};
  outcomes_.push_back({current_stmt_, false, message});
  thread(testing_thread()).terminated = true;
  record(running_.value_or(testing_thread()), "fail", message);
}

void Runtime::record(ThreadId tid, std::string action, std::string detail, std::string token,
                     std::uint64_t uid) {
  log_.append({step_no_, tid, std::move(action), std::move(detail), std::move(token), uid});
}

}  // namespace flakeprobe
