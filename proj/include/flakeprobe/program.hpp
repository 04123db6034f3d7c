#pragma once

// Programmatic model of an app under test and the GUI test that drives it.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace flakeprobe {

using Tick = std::int64_t;

/// Ordered method-name path the looper invokes to process an event. Doubles
/// as the event's signature when identifying it across runs.
using HandlerPath = std::vector<std::string>;

std::string join_path(const HandlerPath& path);

/// Key/value store holding the observable app state. A missing key reads as
/// null.
class AppState {
 public:
  std::optional<std::int64_t> get(const std::string& key) const;
  std::int64_t value_or(const std::string& key, std::int64_t fallback) const;
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::int64_t value) { values_[key] = value; }
  void erase(const std::string& key) { values_.erase(key); }
  const std::map<std::string, std::int64_t>& entries() const { return values_; }

  bool operator==(const AppState&) const = default;

 private:
  std::map<std::string, std::int64_t> values_;
};

/// One instruction of an async thread's task body.
struct AsyncOp {
  enum class Kind { Sleep, Post, Acquire, Release, Set };

  Kind kind = Kind::Sleep;
  Tick ticks = 0;
  // Delay range used instead of `ticks` when the runtime randomizes timing.
  std::optional<std::pair<Tick, Tick>> noise;
  HandlerPath path;
  std::string key;
  std::int64_t value = 0;

  static AsyncOp sleep(Tick ticks);
  static AsyncOp jittered_sleep(Tick ticks, Tick lo, Tick hi);
  static AsyncOp post(HandlerPath path);
  static AsyncOp acquire(std::string resource);
  static AsyncOp release(std::string resource);
  static AsyncOp set(std::string key, std::int64_t value);
};

struct AsyncTaskSpec {
  std::string name;
  std::vector<AsyncOp> ops;
};

/// What a handler body may do while it runs on some logical thread.
class HandlerContext {
 public:
  virtual ~HandlerContext() = default;

  virtual AppState& state() = 0;
  virtual void post(const HandlerPath& path) = 0;
  virtual void spawn(AsyncTaskSpec task) = 0;
  virtual void acquire(const std::string& resource) = 0;
  virtual void release(const std::string& resource) = 0;
  virtual Tick now() const = 0;

  [[noreturn]] void fail(const std::string& message);
};

using HandlerBody = std::function<void(HandlerContext&)>;

struct HandlerDef {
  HandlerPath path;
  HandlerBody body;
};

/// Events a gesture on a view injects, in injection order.
struct ViewBinding {
  std::string target;
  std::string gesture;
  std::vector<HandlerPath> events;
};

struct AppProgram {
  std::string name;
  std::vector<HandlerDef> handlers;
  std::vector<ViewBinding> views;
  AppState initial_state;

  const HandlerDef* find_handler(const HandlerPath& path) const;
  const ViewBinding* find_view(const std::string& target,
                               const std::string& gesture) const;
};

// Statement actions. Injecting actions (launch, UI interaction) wait for the
// main queue to drain and then stay busy for `cost` ticks.

struct UiInteraction {
  std::string target;
  std::string gesture = "click";
  Tick cost = 0;
};

/// Blocks until the main queue is empty and every named resource is idle.
struct IdleSync {
  std::vector<std::string> resources;
};

struct TimedWait {
  Tick ticks = 0;
};

struct Assert {
  std::function<bool(const AppState&)> predicate;
  std::string message;
};

struct LaunchActivity {
  HandlerPath path;
  Tick cost = 0;
};

/// Invokes an app-provided hook directly on the testing thread.
struct Custom {
  HandlerPath path;
};

using Action =
    std::variant<UiInteraction, IdleSync, TimedWait, Assert, LaunchActivity, Custom>;

struct Statement {
  int ordinal = 0;
  Action action;

  std::string describe() const;
  bool is_sync_op() const;
};

struct TestProgram {
  std::string name;
  std::vector<Statement> statements;

  int size() const { return static_cast<int>(statements.size()); }
};

struct AssertionOutcome {
  int stmt = 0;
  bool passed = true;
  std::string message;

  bool operator==(const AssertionOutcome&) const = default;
};

}  // namespace flakeprobe
