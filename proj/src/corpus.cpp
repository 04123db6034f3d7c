#include "flakeprobe/corpus.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "flakeprobe/errors.hpp"
#include "flakeprobe/testkit.hpp"

namespace flakeprobe {

std::string_view to_string(Expectation e) {
  switch (e) {
    case Expectation::FlakyDetectable: return "FlakyDetectable";
    case Expectation::FlakyButReductionMiss: return "FlakyButReductionMiss";
    case Expectation::FlakyButSleepGuarded: return "FlakyButSleepGuarded";
    case Expectation::Clean: return "Clean";
  }
  return "?";
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::C1: return "C1";
    case Category::C2: return "C2";
    case Category::C3: return "C3";
  }
  return "?";
}

namespace {

HandlerPath launch_path(const std::string& activity) {
  return {"ActivityThread$H.handleMessage", "ActivityThread.handleLaunchActivity",
          activity + ".onCreate"};
}

HandlerPath click_path(const std::string& method) {
  return {"ViewRootImpl.dispatchInputEvent", "View.performClick", method};
}

HandlerPath message_path(const std::string& via, const std::string& method) {
  return {"Handler.dispatchMessage", via, method};
}

bool is_set(const AppState& s, const std::string& key) { return s.value_or(key, 0) != 0; }

AsyncOp delay_op(const Params& p, const std::string& prefix) {
  const Tick base = p.at(prefix + "delay");
  const Tick lo = p.at(prefix + "delay_lo");
  const Tick hi = p.at(prefix + "delay_hi");
  if (lo < 0 || lo > hi) throw ValidationError("invalid delay range for " + prefix + "delay");
  return AsyncOp::jittered_sleep(base, lo, hi);
}

// Location capture: a worker posts the fix while the test checks the
// captured result right after launch.
Scenario capture(const std::string& name, const Params& p) {
  const HandlerPath create = launch_path("CaptureLocationActivity");
  const HandlerPath result =
      message_path("Zaau.zza", "CaptureLocationActivity$1.onLocationResult");
  const HandlerPath capture = click_path("CaptureLocationActivity.onCaptureClick");
  Scenario s;
  s.app = AppBuilder(name)
              .handler(create,
                       [result, op = delay_op(p, "")](HandlerContext& ctx) {
                         ctx.spawn({"Zaau", {op, AsyncOp::post(result)}});
                       })
              .handler(result, [](HandlerContext& ctx) { ctx.state().set("location", 1); })
              .handler(capture,
                       [](HandlerContext& ctx) {
                         if (auto loc = ctx.state().get("location")) {
                           ctx.state().set("result", *loc);
                         }
                       })
              .view("capture", "click", {capture})
              .build();
  s.test = TestBuilder("CaptureLocationTest")
               .launch(create, p.at("launch_cost"))
               .idle_sync()
               .click("capture")
               .check([](const AppState& st) { return st.has("result"); }, "result is null")
               .build();
  s.expected = Expectation::FlakyDetectable;
  s.category = Category::C3;
  return s;
}

Scenario search_engine(const Params& p) {
  const HandlerPath create = launch_path("SearchEngineActivity");
  const HandlerPath loaded =
      message_path("SearchEngineManager$LoadTask.onPostExecute", "SearchEngineManager.onLoadFinished");
  const HandlerPath get_default = {"SearchEngineManager.getDefaultSearchEngine"};
  const HandlerPath select = click_path("SwitchSearchEngineFragment.onEngineSelected");
  Scenario s;
  s.app = AppBuilder("search_engine")
              .handler(create,
                       [loaded, delay = p.at("load_delay")](HandlerContext& ctx) {
                         ctx.spawn({"SearchEngineLoader",
                                    {AsyncOp::sleep(delay), AsyncOp::post(loaded)}});
                       })
              .handler(loaded, [](HandlerContext& ctx) { ctx.state().set("engines", 1); })
              .handler(get_default,
                       [](HandlerContext& ctx) {
                         if (!is_set(ctx.state(), "engines")) {
                           ctx.fail(
                               "java.lang.IllegalStateException: Attempting to retrieve search "
                               "engines without a corresponding init()");
                         }
                         ctx.state().set("engine", 1);
                       })
              .handler(select, [](HandlerContext& ctx) { ctx.state().set("engine", 2); })
              .view("engine_b", "click", {select})
              .build();
  s.test = TestBuilder("SwitchSearchEngineTest")
               .launch(create, p.at("launch_cost"))
               .idle_sync()
               .custom(get_default)
               .click("engine_b")
               .check([](const AppState& st) { return st.value_or("engine", 0) == 2; },
                      "default engine not switched")
               .build();
  s.expected = Expectation::FlakyDetectable;
  s.category = Category::C3;
  return s;
}

// Metadata fetched by a worker; the test only sleeps before checking it.
Scenario timeout_c1(const Params& p) {
  const HandlerPath create = launch_path("PodcastActivity");
  const HandlerPath loaded = message_path("FeedFetcher$1.run", "PodcastActivity.onMetadataLoaded");
  Scenario s;
  s.app = AppBuilder("timeout_c1")
              .handler(create,
                       [loaded, op = delay_op(p, "")](HandlerContext& ctx) {
                         ctx.spawn({"FeedFetcher", {op, AsyncOp::post(loaded)}});
                       })
              .handler(loaded, [](HandlerContext& ctx) { ctx.state().set("metadata", 1); })
              .build();
  s.test = TestBuilder("FeedMetadataTest")
               .launch(create)
               .timed_wait(p.at("wait_ticks"))
               .check([](const AppState& st) { return is_set(st, "metadata"); },
                      "metadata not loaded")
               .build();
  s.expected = Expectation::FlakyButSleepGuarded;
  s.category = Category::C1;
  return s;
}

// Binding to a playback service. The binder goes idle before the connection
// callback reaches the main thread unless release_before_post is 0.
Scenario service_c1(const Params& p) {
  const HandlerPath create = launch_path("PlayerActivity");
  const HandlerPath connected =
      message_path("ServiceConnection.onServiceConnected", "PlayerActivity.onServiceConnected");
  const HandlerPath play = click_path("PlayerActivity.onPlayClick");
  const bool early = p.at("release_before_post") != 0;
  std::vector<AsyncOp> ops = {AsyncOp::sleep(p.at("connect_delay"))};
  if (early) ops.push_back(AsyncOp::release("binder"));
  ops.push_back(AsyncOp::post(connected));

  Scenario s;
  s.app = AppBuilder("service_c1")
              .handler(create,
                       [ops](HandlerContext& ctx) {
                         ctx.acquire("binder");
                         ctx.spawn({"ServiceBinder", ops});
                       })
              .handler(connected,
                       [early](HandlerContext& ctx) {
                         ctx.state().set("bound", 1);
                         if (!early) ctx.release("binder");
                       })
              .handler(play,
                       [](HandlerContext& ctx) {
                         if (!is_set(ctx.state(), "bound")) {
                           ctx.fail("java.util.concurrent.TimeoutException: Service not bound");
                         }
                         ctx.state().set("playing", 1);
                       })
              .view("play", "click", {play})
              .build();
  s.test = TestBuilder("PlaybackServiceTest")
               .launch(create)
               .idle_sync({"binder"})
               .click("play")
               .check([](const AppState& st) { return is_set(st, "playing"); }, "not playing")
               .build();
  s.expected = Expectation::FlakyDetectable;
  s.category = Category::C1;
  return s;
}

// The keyboard and the theme arrive from two workers. A late theme
// recreates the editor and drops edit mode before the key press.
Scenario order_c2(const Params& p) {
  const HandlerPath create = launch_path("NoteEditorActivity");
  const HandlerPath ime = message_path("InputMethodManager$H.handleMessage",
                                       "NoteEditorActivity.onImeShown");
  const HandlerPath theme =
      message_path("SharedPreferencesImpl$2.run", "NoteEditorActivity.onThemeApplied");
  const HandlerPath edit = click_path("NoteEditorActivity.onEditClick");
  const HandlerPath key = {"ViewRootImpl.dispatchInputEvent", "View.dispatchKeyEvent",
                           "NoteEditorActivity.onKey"};
  Scenario s;
  s.app = AppBuilder("order_c2")
              .handler(create,
                       [ime, theme, a = p.at("ime_delay"), b = p.at("prefs_delay")](
                           HandlerContext& ctx) {
                         ctx.acquire("ime");
                         ctx.acquire("prefs");
                         ctx.spawn({"InputMethod", {AsyncOp::sleep(a), AsyncOp::post(ime)}});
                         ctx.spawn({"PrefsLoader", {AsyncOp::sleep(b), AsyncOp::post(theme)}});
                       })
              .handler(ime,
                       [](HandlerContext& ctx) {
                         ctx.state().set("keyboard", 1);
                         ctx.release("ime");
                       })
              .handler(theme,
                       [](HandlerContext& ctx) {
                         ctx.state().set("mode", 0);
                         ctx.release("prefs");
                       })
              .handler(edit, [](HandlerContext& ctx) { ctx.state().set("mode", 1); })
              .handler(key,
                       [](HandlerContext& ctx) {
                         if (ctx.state().value_or("mode", 0) == 1) ctx.state().set("typed", 1);
                       })
              .view("edit", "click", {edit})
              .view("editor", "type", {key})
              .build();
  s.test = TestBuilder("EditNoteTest")
               .launch(create)
               .idle_sync({"ime"})
               .click("edit")
               .interact("editor", "type")
               .idle_sync({"prefs"})
               .check([](const AppState& st) { return is_set(st, "typed"); }, "text not typed")
               .build();
  s.expected = Expectation::FlakyDetectable;
  s.category = Category::C2;
  return s;
}

// The refresh clears touch state; it only hurts between press and release.
Scenario intra_statement_miss(const Params& p) {
  const HandlerPath create = launch_path("ToggleActivity");
  const HandlerPath refresh =
      message_path("SessionRefresher$1.run", "ToggleActivity.onSessionRefreshed");
  const HandlerPath down = {"ViewRootImpl.dispatchInputEvent", "View.onTouchEvent",
                            "ToggleActivity.onPressed"};
  const HandlerPath up = {"ViewRootImpl.dispatchInputEvent", "View.onTouchEvent",
                          "ToggleActivity.onReleased"};
  Scenario s;
  s.app = AppBuilder("intra_statement_miss")
              .handler(create,
                       [refresh, delay = p.at("refresh_delay")](HandlerContext& ctx) {
                         ctx.spawn({"SessionRefresher",
                                    {AsyncOp::sleep(delay), AsyncOp::post(refresh)}});
                       })
              .handler(refresh, [](HandlerContext& ctx) { ctx.state().set("pressed", 0); })
              .handler(down, [](HandlerContext& ctx) { ctx.state().set("pressed", 1); })
              .handler(up,
                       [](HandlerContext& ctx) {
                         if (is_set(ctx.state(), "pressed")) ctx.state().set("toggled", 1);
                       })
              .view("toggle", "click", {down, up})
              .build();
  s.test = TestBuilder("ToggleTest")
               .launch(create)
               .click("toggle")
               .check([](const AppState& st) { return is_set(st, "toggled"); }, "toggle lost")
               .build();
  s.expected = Expectation::FlakyButReductionMiss;
  return s;
}

Scenario clean_counter(const Params&) {
  const HandlerPath create = launch_path("CounterActivity");
  const HandlerPath inc = click_path("CounterActivity.onIncrement");
  Scenario s;
  s.app = AppBuilder("clean_counter")
              .handler(create, [](HandlerContext& ctx) { ctx.state().set("count", 0); })
              .handler(inc,
                       [](HandlerContext& ctx) {
                         ctx.state().set("count", ctx.state().value_or("count", 0) + 1);
                       })
              .view("inc", "click", {inc})
              .build();
  s.test = TestBuilder("CounterTest")
               .launch(create)
               .click("inc")
               .click("inc")
               .check([](const AppState& st) { return st.value_or("count", 0) == 2; },
                      "count != 2")
               .build();
  return s;
}

Scenario clean_sync(const Params& p) {
  const HandlerPath create = launch_path("FeedActivity");
  const HandlerPath loaded = message_path("FeedLoader$1.run", "FeedActivity.onFeedLoaded");
  const HandlerPath open = click_path("FeedActivity.onOpenClick");
  Scenario s;
  s.app = AppBuilder("clean_sync")
              .handler(create,
                       [loaded, delay = p.at("load_delay")](HandlerContext& ctx) {
                         ctx.acquire("feed");
                         ctx.spawn({"FeedLoader", {AsyncOp::sleep(delay), AsyncOp::post(loaded)}});
                       })
              .handler(loaded,
                       [](HandlerContext& ctx) {
                         ctx.state().set("items", 3);
                         ctx.release("feed");
                       })
              .handler(open,
                       [](HandlerContext& ctx) {
                         ctx.state().set("opened", ctx.state().value_or("items", 0) > 0 ? 1 : 0);
                       })
              .view("first_item", "click", {open})
              .build();
  s.test = TestBuilder("FeedTest")
               .launch(create)
               .idle_sync({"feed"})
               .click("first_item")
               .check([](const AppState& st) { return is_set(st, "opened"); }, "item not opened")
               .build();
  return s;
}

Scenario three_async_distinct(const Params& p) {
  const HandlerPath create = launch_path("DashboardActivity");
  AppBuilder app("three_async_distinct");
  TestBuilder test("DashboardTest");
  test.launch(create);
  std::vector<std::pair<std::string, HandlerPath>> parts;
  for (const std::string part : {"a", "b", "c"}) {
    const HandlerPath done = message_path("Loader" + part + "$1.run",
                                          "DashboardActivity.onPanelLoaded_" + part);
    parts.emplace_back(part, done);
    app.handler(done, [part](HandlerContext& ctx) {
      ctx.state().set("panel_" + part, 1);
      ctx.release(part);
    });
    test.idle_sync({part}).check(
        [part](const AppState& st) { return is_set(st, "panel_" + part); },
        "panel " + part + " missing");
  }
  const Tick step = p.at("stagger");
  app.handler(create, [parts, step](HandlerContext& ctx) {
    Tick delay = step;
    for (const auto& [part, done] : parts) {
      ctx.acquire(part);
      ctx.spawn({"Loader" + part, {AsyncOp::sleep(delay), AsyncOp::post(done)}});
      delay += step;
    }
  });
  Scenario s;
  s.app = app.build();
  s.test = test.build();
  return s;
}

Scenario two_async_shared(const Params& p) {
  const HandlerPath create = launch_path("SyncActivity");
  const HandlerPath first = message_path("ContactsSync$1.run", "SyncActivity.onContactsSynced");
  const HandlerPath second = message_path("CalendarSync$1.run", "SyncActivity.onCalendarSynced");
  Scenario s;
  s.app = AppBuilder("two_async_shared")
              .handler(create,
                       [first, second, step = p.at("stagger")](HandlerContext& ctx) {
                         ctx.acquire("sync");
                         ctx.acquire("sync");
                         ctx.spawn({"ContactsSync", {AsyncOp::sleep(step), AsyncOp::post(first)}});
                         ctx.spawn(
                             {"CalendarSync", {AsyncOp::sleep(2 * step), AsyncOp::post(second)}});
                       })
              .handler(first,
                       [](HandlerContext& ctx) {
                         ctx.state().set("contacts", 1);
                         ctx.release("sync");
                       })
              .handler(second,
                       [](HandlerContext& ctx) {
                         ctx.state().set("calendar", 1);
                         ctx.release("sync");
                       })
              .build();
  s.test = TestBuilder("SyncAllTest")
               .launch(create)
               .idle_sync({"sync"})
               .check([](const AppState& st) { return is_set(st, "contacts") && is_set(st, "calendar"); },
                      "sync incomplete")
               .build();
  return s;
}

struct Entry {
  const char* name;
  Params defaults;
  std::function<Scenario(const Params&)> build;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"capture_c3",
       {{"delay", 5}, {"delay_lo", 0}, {"delay_hi", 1009}, {"launch_cost", 1000}},
       [](const Params& p) { return capture("capture_c3", p); }},
      {"often_fails",
       {{"delay", 5}, {"delay_lo", 0}, {"delay_hi", 1999}, {"launch_cost", 1000}},
       [](const Params& p) { return capture("often_fails", p); }},
      {"search_engine", {{"load_delay", 20}, {"launch_cost", 500}}, search_engine},
      {"timeout_c1", {{"delay", 3}, {"delay_lo", 0}, {"delay_hi", 20}, {"wait_ticks", 10}},
       timeout_c1},
      {"service_c1", {{"connect_delay", 8}, {"release_before_post", 1}}, service_c1},
      {"order_c2", {{"ime_delay", 2}, {"prefs_delay", 3}}, order_c2},
      {"intra_statement_miss", {{"refresh_delay", 2}}, intra_statement_miss},
      {"clean_counter", {}, clean_counter},
      {"clean_sync", {{"load_delay", 4}}, clean_sync},
      {"three_async_distinct", {{"stagger", 1}}, three_async_distinct},
      {"two_async_shared", {{"stagger", 1}}, two_async_shared},
  };
  return table;
}

const Entry& find_entry(const std::string& name) {
  for (const auto& e : entries()) {
    if (name == e.name) return e;
  }
  throw UnknownName("no scenario named " + name);
}

}  // namespace

std::vector<std::string> scenario_names() {
  std::vector<std::string> names;
  for (const auto& e : entries()) names.emplace_back(e.name);
  return names;
}

Params default_params(const std::string& name) { return find_entry(name).defaults; }

Scenario make_scenario(const std::string& name, const Params& params) {
  const Entry& entry = find_entry(name);
  Params merged = entry.defaults;
  for (const auto& [key, value] : params) {
    if (merged.count(key) == 0) {
      throw ValidationError("scenario " + name + " has no parameter " + key);
    }
    merged[key] = value;
  }
  Scenario s = entry.build(merged);
  s.name = name;
  s.app.name = name;
  s.params = std::move(merged);
  validate(s.app, s.test);
  return s;
}

std::vector<Scenario> catalogue() {
  std::vector<Scenario> out;
  for (const auto& name : scenario_names()) out.push_back(make_scenario(name));
  return out;
}

AppProgram register_corpus_app(const std::string& name) { return make_scenario(name).app; }

TestProgram register_corpus_test(const std::string& name) { return make_scenario(name).test; }

ScenarioFile parse_scenario_file(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("scenario file is not JSON: ") + ex.what());
  }
  if (!j.is_object() || !j.contains("app") || !j["app"].is_string()) {
    throw ValidationError("scenario file needs a string \"app\"");
  }
  ScenarioFile file;
  file.app = j["app"].get<std::string>();
  file.test = j.value("test", file.app);
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw ValidationError("\"params\" must be an object");
    for (const auto& [key, value] : j["params"].items()) {
      if (!value.is_number_integer()) {
        throw ValidationError("parameter " + key + " must be an integer");
      }
      file.params[key] = value.get<std::int64_t>();
    }
  }
  return file;
}

ScenarioFile load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_file(buf.str());
}

Scenario make_scenario(const ScenarioFile& file) {
  if (file.test != file.app) {
    throw ValidationError("test " + file.test + " does not belong to app " + file.app);
  }
  return make_scenario(file.app, file.params);
}

std::vector<CatalogueCheck> check_scenarios(const std::vector<Scenario>& scenarios) {
  std::vector<CatalogueCheck> out;
  for (const auto& s : scenarios) {
    CatalogueCheck c;
    c.scenario = s.name;
    c.expected = s.expected;
    c.oracle = enumerate_feasible_orders(s.app, s.test);
    const bool has_failure = c.oracle.failing_orders > 0;
    c.ok = (s.expected == Expectation::Clean) ? !has_failure : has_failure;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CatalogueCheck> validate_scenarios(const std::vector<Scenario>& scenarios) {
  std::vector<CatalogueCheck> checks = check_scenarios(scenarios);
  std::string bad;
  for (const auto& c : checks) {
    if (c.ok) continue;
    if (!bad.empty()) bad += ", ";
    bad += c.scenario + " (expected " + std::string(to_string(c.expected)) + ", oracle found " +
           std::to_string(c.oracle.failing_orders) + " failing orders)";
  }
  if (!bad.empty()) throw CatalogueInvalid("catalogue mismatch: " + bad);
  return checks;
}

std::vector<CatalogueCheck> validate_catalogue() { return validate_scenarios(catalogue()); }

}  // namespace flakeprobe
