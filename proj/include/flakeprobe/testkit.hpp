#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flakeprobe/program.hpp"
#include "flakeprobe/runtime.hpp"

namespace flakeprobe {

/// Throws ValidationError describing the first structural problem found.
void validate(const AppProgram& app, const TestProgram& test);

class AppBuilder {
 public:
  explicit AppBuilder(std::string name);

  AppBuilder& handler(HandlerPath path, HandlerBody body);
  AppBuilder& view(std::string target, std::string gesture, std::vector<HandlerPath> events);
  AppBuilder& initial(std::string key, std::int64_t value);

  AppProgram build() const { return app_; }

 private:
  AppProgram app_;
};

/// Appends statements with contiguous ordinals starting at 1.
class TestBuilder {
 public:
  explicit TestBuilder(std::string name);

  TestBuilder& launch(HandlerPath path, Tick cost = 0);
  TestBuilder& click(std::string target, Tick cost = 0);
  TestBuilder& interact(std::string target, std::string gesture, Tick cost = 0);
  TestBuilder& idle_sync(std::vector<std::string> resources = {});
  TestBuilder& timed_wait(Tick ticks);
  TestBuilder& check(std::function<bool(const AppState&)> predicate, std::string message);
  TestBuilder& custom(HandlerPath path);

  TestProgram build() const { return test_; }

 private:
  TestBuilder& add(Action action);

  TestProgram test_;
};

struct PlainRun {
  std::vector<AssertionOutcome> outcomes;
  std::optional<FailureInfo> failure;
  RunLog log;
  Tick ticks = 0;
  std::uint64_t events = 0;
  AppState final_state;

  bool passed() const { return !failure.has_value(); }
};

/// Runs the test once under the default round-robin schedule with no
/// interception. A seed randomizes the duration of jittered async sleeps.
PlainRun run_plain(const AppProgram& app, const TestProgram& test,
                   std::optional<std::uint64_t> delay_seed = std::nullopt);

/// Number of IdleSync and TimedWait statements.
int sync_op_count(const TestProgram& test);

}  // namespace flakeprobe
