#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "otmask/losses.hpp"
#include "otmask/metrics.hpp"
#include "otmask/pseudomask.hpp"

namespace otmask {

using Json = nlohmann::json;

/// Round to `digits` significant decimal digits (non-finite values pass through).
double round_significant(double value, int digits = 9);

Json to_json(const PipelineConfig& config);
Json to_json(const LossConfig& config);
Json to_json(const PanopticScore& score);
Json to_json(const PipelineDiagnostics& diagnostics);

/// Provenance block written alongside every report.
struct RunManifest {
  std::string command;
  Json config = Json::object();
  std::map<std::string, std::string> inputs;
  std::optional<std::uint64_t> seed;
  std::string version = OTMASK_VERSION;
  /// Seconds per stage. Only serialized when include_timings is set, since wall
  /// clock readings would break byte-identical reruns.
  std::map<std::string, double> timings;
  bool include_timings = false;

  Json to_json() const;
};

/// {"manifest": ..., "results": ...} with sorted keys, every float rounded to 9
/// significant digits, two-space indentation and a trailing newline.
std::string render_report(const RunManifest& manifest, const Json& results);

/// Throws ValidationError when the file cannot be written.
void write_report(const RunManifest& manifest, const Json& results,
                  const std::filesystem::path& path);

}  // namespace otmask
