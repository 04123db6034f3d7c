#include "flakeprobe/testkit.hpp"

#include <set>

#include "flakeprobe/errors.hpp"

namespace flakeprobe {

namespace {

void require_handler(const AppProgram& app, const HandlerPath& path, const std::string& where) {
  if (app.find_handler(path) == nullptr) {
    throw ValidationError(where + " references unknown handler " + join_path(path));
  }
}

}  // namespace

void validate(const AppProgram& app, const TestProgram& test) {
  std::set<HandlerPath> paths;
  for (const auto& h : app.handlers) {
    if (h.path.empty()) throw ValidationError("handler with empty method path");
    if (!h.body) throw ValidationError("handler " + join_path(h.path) + " has no body");
    if (!paths.insert(h.path).second) {
      throw ValidationError("duplicate handler path " + join_path(h.path));
    }
  }
  std::set<std::pair<std::string, std::string>> views;
  for (const auto& v : app.views) {
    if (!views.insert({v.target, v.gesture}).second) {
      throw ValidationError("duplicate view binding " + v.target + " " + v.gesture);
    }
    for (const auto& e : v.events) require_handler(app, e, "view " + v.target);
  }

  for (std::size_t i = 0; i < test.statements.size(); ++i) {
    const Statement& s = test.statements[i];
    const std::string where = "statement " + std::to_string(s.ordinal);
    if (s.ordinal != static_cast<int>(i) + 1) {
      throw ValidationError(where + " is out of sequence; expected " + std::to_string(i + 1));
    }
    if (const auto* ui = std::get_if<UiInteraction>(&s.action)) {
      if (app.find_view(ui->target, ui->gesture) == nullptr) {
        throw ValidationError(where + " references unknown view " + ui->target + " " +
                              ui->gesture);
      }
      if (ui->cost < 0) throw ValidationError(where + " has negative cost");
    } else if (const auto* launch = std::get_if<LaunchActivity>(&s.action)) {
      require_handler(app, launch->path, where);
      if (launch->cost < 0) throw ValidationError(where + " has negative cost");
    } else if (const auto* timed = std::get_if<TimedWait>(&s.action)) {
      if (timed->ticks < 0) throw ValidationError(where + " waits a negative tick count");
    } else if (const auto* check = std::get_if<Assert>(&s.action)) {
      if (!check->predicate) throw ValidationError(where + " has no predicate");
    } else if (const auto* custom = std::get_if<Custom>(&s.action)) {
      require_handler(app, custom->path, where);
    }
  }
}

AppBuilder::AppBuilder(std::string name) { app_.name = std::move(name); }

AppBuilder& AppBuilder::handler(HandlerPath path, HandlerBody body) {
  app_.handlers.push_back({std::move(path), std::move(body)});
  return *this;
}

AppBuilder& AppBuilder::view(std::string target, std::string gesture,
                             std::vector<HandlerPath> events) {
  app_.views.push_back({std::move(target), std::move(gesture), std::move(events)});
  return *this;
}

AppBuilder& AppBuilder::initial(std::string key, std::int64_t value) {
  app_.initial_state.set(key, value);
  return *this;
}

TestBuilder::TestBuilder(std::string name) { test_.name = std::move(name); }

TestBuilder& TestBuilder::add(Action action) {
  test_.statements.push_back({test_.size() + 1, std::move(action)});
  return *this;
}

TestBuilder& TestBuilder::launch(HandlerPath path, Tick cost) {
  return add(LaunchActivity{std::move(path), cost});
}

TestBuilder& TestBuilder::click(std::string target, Tick cost) {
  return add(UiInteraction{std::move(target), "click", cost});
}

TestBuilder& TestBuilder::interact(std::string target, std::string gesture, Tick cost) {
  return add(UiInteraction{std::move(target), std::move(gesture), cost});
}

TestBuilder& TestBuilder::idle_sync(std::vector<std::string> resources) {
  return add(IdleSync{std::move(resources)});
}

TestBuilder& TestBuilder::timed_wait(Tick ticks) { return add(TimedWait{ticks}); }

TestBuilder& TestBuilder::check(std::function<bool(const AppState&)> predicate,
                                std::string message) {
  return add(Assert{std::move(predicate), std::move(message)});
}

TestBuilder& TestBuilder::custom(HandlerPath path) { return add(Custom{std::move(path)}); }

PlainRun run_plain(const AppProgram& app, const TestProgram& test,
                   std::optional<std::uint64_t> delay_seed) {
  RuntimeOptions options;
  options.delay_seed = delay_seed;
  Runtime rt(app, test, options);
  rt.step_to_idle();
  PlainRun run;
  run.outcomes = rt.outcomes();
  run.failure = rt.failure();
  run.log = rt.log();
  run.ticks = rt.now();
  run.events = rt.intercepted_count();
  run.final_state = rt.state();
  return run;
}

int sync_op_count(const TestProgram& test) {
  int count = 0;
  for (const auto& s : test.statements) count += s.is_sync_op() ? 1 : 0;
  return count;
}

}  // namespace flakeprobe
