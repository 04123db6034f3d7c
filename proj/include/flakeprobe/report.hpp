#pragma once

// JSON persistence of every intermediate artifact, and detection reports.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flakeprobe/corpus.hpp"
#include "flakeprobe/explorer.hpp"
#include "flakeprobe/oracle.hpp"

namespace flakeprobe {

using Json = nlohmann::ordered_json;

Json to_json(const TraceMap& tm);
TraceMap trace_from_json(const Json& j);

Json to_json(const BoundsReport& report);
BoundsReport bounds_from_json(const Json& j);

Json to_json(const OracleResult& result);
Json to_json(const RerunResult& result);

Json verdict_json(const std::string& test, const Verdict& v,
                  std::optional<Category> category = std::nullopt);

struct DetectionReport {
  std::string scenario;
  std::string test;
  Expectation expected = Expectation::Clean;
  std::optional<Category> category;
  Verdict verdict;
  int sync_op_count = 0;
  double wall_seconds = 0;
  std::optional<RerunResult> rerun;
  std::optional<OracleResult> oracle;
};

Json to_json(const DetectionReport& report, bool timing);

/// Fixed-width table, one row per report.
std::string render_table(const std::vector<DetectionReport>& reports, bool timing);

/// Throws ValidationError when the text is not JSON.
Json parse_json(const std::string& text);

}  // namespace flakeprobe
