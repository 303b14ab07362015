#include "otmask/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "otmask/errors.hpp"

namespace otmask {

namespace {

Json rounded(const Json& value) {
  if (value.is_number_float()) {
    const double v = value.get<double>();
    if (!std::isfinite(v)) return nullptr;
    return round_significant(v);
  }
  if (value.is_object()) {
    Json out = Json::object();
    for (const auto& [key, item] : value.items()) out[key] = rounded(item);
    return out;
  }
  if (value.is_array()) {
    Json out = Json::array();
    for (const auto& item : value) out.push_back(rounded(item));
    return out;
  }
  return value;
}

}  // namespace

double round_significant(double value, int digits) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*g", digits, value);
  return std::strtod(buffer, nullptr);
}

Json to_json(const PipelineConfig& config) {
  return {
      {"beta", config.beta},
      {"lambda", config.lambda},
      {"sinkhorn_iterations", config.sinkhorn_iterations},
      {"supply_scheme", std::string(to_string(config.supply_scheme))},
      {"centroid_iterations", config.centroid_iterations},
      {"boundary_combine", std::string(to_string(config.boundary_combine))},
      {"cost_from_centroids", config.cost_from_centroids},
      {"log_domain", config.log_domain},
      {"normalize_cost", config.normalize_cost},
      {"edge_floor", config.edge_floor},
  };
}

Json to_json(const LossConfig& config) {
  return {{"alpha1", config.alpha1}, {"alpha2", config.alpha2}, {"tau", config.tau},
          {"theta1", config.theta1}, {"theta2", config.theta2}};
}

Json to_json(const PanopticScore& score) {
  Json per_class = Json::object();
  for (const auto& [cls, s] : score.per_class) {
    per_class[std::to_string(cls)] = {
        {"kind", std::string(to_string(s.kind))},
        {"pq", s.pq},
        {"sq", s.sq},
        {"rq", s.rq},
        {"tp", s.true_positives},
        {"fp", s.false_positives},
        {"fn", s.false_negatives},
    };
  }
  Json out = {{"pq", score.pq}, {"sq", score.sq}, {"rq", score.rq}, {"per_class", per_class}};
  out["pq_thing"] = score.pq_thing ? Json(*score.pq_thing) : Json(nullptr);
  out["pq_stuff"] = score.pq_stuff ? Json(*score.pq_stuff) : Json(nullptr);
  return out;
}

Json to_json(const PipelineDiagnostics& diagnostics) {
  Json targets = Json::array();
  for (const auto& t : diagnostics.targets) {
    targets.push_back({
        {"target_id", t.target_id},
        {"class_id", t.class_id},
        {"kind", std::string(to_string(t.kind))},
        {"supply", t.supply},
        {"pixels", t.pixels},
    });
  }
  return {{"marginal_error", diagnostics.marginal_error},
          {"transport_cost", diagnostics.transport_cost},
          {"targets", targets}};
}

Json RunManifest::to_json() const {
  Json out = {{"command", command}, {"config", config}, {"version", version}};
  out["inputs"] = Json::object();
  for (const auto& [name, path] : inputs) out["inputs"][name] = path;
  out["seed"] = seed ? Json(*seed) : Json(nullptr);
  if (include_timings) out["timings"] = timings;
  return out;
}

std::string render_report(const RunManifest& manifest, const Json& results) {
  const Json doc = {{"manifest", rounded(manifest.to_json())}, {"results", rounded(results)}};
  return doc.dump(2) + "\n";
}

void write_report(const RunManifest& manifest, const Json& results,
                  const std::filesystem::path& path) {
  const std::string text = render_report(manifest, results);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write report " + path.string());
  out << text;
  if (!out.flush()) throw ValidationError("failed writing report " + path.string());
}

}  // namespace otmask
