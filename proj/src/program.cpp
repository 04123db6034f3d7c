#include "flakeprobe/program.hpp"

#include <sstream>

#include "flakeprobe/errors.hpp"

namespace flakeprobe {

std::string join_path(const HandlerPath& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i != 0) out += '/';
    out += path[i];
  }
  return out;
}

std::optional<std::int64_t> AppState::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::int64_t AppState::value_or(const std::string& key, std::int64_t fallback) const {
  return get(key).value_or(fallback);
}

AsyncOp AsyncOp::sleep(Tick ticks) {
  AsyncOp op;
  op.kind = Kind::Sleep;
  op.ticks = ticks;
  return op;
}

AsyncOp AsyncOp::jittered_sleep(Tick ticks, Tick lo, Tick hi) {
  AsyncOp op = sleep(ticks);
  op.noise = std::make_pair(lo, hi);
  return op;
}

AsyncOp AsyncOp::post(HandlerPath path) {
  AsyncOp op;
  op.kind = Kind::Post;
  op.path = std::move(path);
  return op;
}

AsyncOp AsyncOp::acquire(std::string resource) {
  AsyncOp op;
  op.kind = Kind::Acquire;
  op.key = std::move(resource);
  return op;
}

AsyncOp AsyncOp::release(std::string resource) {
  AsyncOp op;
  op.kind = Kind::Release;
  op.key = std::move(resource);
  return op;
}

AsyncOp AsyncOp::set(std::string key, std::int64_t value) {
  AsyncOp op;
  op.kind = Kind::Set;
  op.key = std::move(key);
  op.value = value;
  return op;
}

void HandlerContext::fail(const std::string& message) { throw AppFailure(message); }

const HandlerDef* AppProgram::find_handler(const HandlerPath& path) const {
  for (const auto& h : handlers) {
    if (h.path == path) return &h;
  }
  return nullptr;
}

const ViewBinding* AppProgram::find_view(const std::string& target,
                                         const std::string& gesture) const {
  for (const auto& v : views) {
    if (v.target == target && v.gesture == gesture) return &v;
  }
  return nullptr;
}

namespace {

struct Describe {
  std::string operator()(const UiInteraction& a) const {
    return "UiInteraction " + a.target + " " + a.gesture;
  }
  std::string operator()(const IdleSync& a) const {
    std::string out = "IdleSync";
    for (const auto& r : a.resources) out += " " + r;
    return out;
  }
  std::string operator()(const TimedWait& a) const {
    return "TimedWait " + std::to_string(a.ticks);
  }
  std::string operator()(const Assert& a) const { return "Assert " + a.message; }
  std::string operator()(const LaunchActivity& a) const {
    return "LaunchActivity " + join_path(a.path);
  }
  std::string operator()(const Custom& a) const { return "Custom " + join_path(a.path); }
};

}  // namespace

std::string Statement::describe() const { return std::visit(Describe{}, action); }

bool Statement::is_sync_op() const {
  return std::holds_alternative<IdleSync>(action) || std::holds_alternative<TimedWait>(action);
}

}  // namespace flakeprobe
