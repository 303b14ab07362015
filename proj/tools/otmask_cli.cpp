// otmask: pseudo-mask generation from point annotations and its evaluation tools.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "otmask/errors.hpp"
#include "otmask/io.hpp"
#include "otmask/losses.hpp"
#include "otmask/metrics.hpp"
#include "otmask/pseudomask.hpp"
#include "otmask/report.hpp"
#include "otmask/synth.hpp"

namespace fs = std::filesystem;
using namespace otmask;

namespace {

struct SceneSource {
  std::string name;
  fs::path semantic;
  fs::path boundary_high;
  std::optional<fs::path> boundary_low;
  std::optional<fs::path> image;
  fs::path points;
  std::optional<fs::path> ground_truth;
};

struct LoadedScene {
  SemanticMap semantic;
  BoundaryMap boundary_high;
  BoundaryMap boundary_low;
  std::optional<RgbImage> image;
  PointSet points;
  std::optional<PseudoMask> ground_truth;
  std::map<std::string, std::string> inputs;
};

struct InputFlags {
  std::vector<std::string> scene_dirs;
  std::string semantic;
  std::string boundary_high;
  std::string boundary_low;
  std::string image;
  std::string points;
  std::string ground_truth;
};

void add_input_flags(CLI::App* cmd, InputFlags& in, bool with_gt) {
  cmd->add_option("scenes", in.scene_dirs, "Scene directories (fixture layout written by synth)");
  cmd->add_option("--semantic", in.semantic, "Semantic probability map (PFM)");
  cmd->add_option("--boundary-high", in.boundary_high, "High-level boundary map (PFM)");
  cmd->add_option("--boundary-low", in.boundary_low,
                  "Low-level boundary map (PFM); derived from --image when absent");
  cmd->add_option("--image", in.image, "RGB image (PPM)");
  cmd->add_option("--points", in.points, "Point annotations (text)");
  if (with_gt) cmd->add_option("--gt", in.ground_truth, "Ground-truth mask (PGM)");
}

std::optional<fs::path> existing(const fs::path& p) {
  if (fs::exists(p)) return p;
  return std::nullopt;
}

std::vector<SceneSource> resolve_scenes(const InputFlags& in) {
  const bool explicit_files = !in.semantic.empty() || !in.boundary_high.empty() ||
                              !in.boundary_low.empty() || !in.image.empty() ||
                              !in.points.empty();
  std::vector<SceneSource> out;
  if (!in.scene_dirs.empty()) {
    if (explicit_files) {
      throw ValidationError("give either scene directories or explicit map files, not both");
    }
    std::set<std::string> names;
    for (const auto& dir : in.scene_dirs) {
      if (!fs::is_directory(dir)) throw ValidationError("not a scene directory: " + dir);
      const SceneFiles files = SceneFiles::in(dir);
      SceneSource s;
      s.name = fs::path(dir).lexically_normal().filename().string();
      if (s.name.empty() || s.name == ".") {
        s.name = fs::absolute(dir).lexically_normal().parent_path().filename().string();
      }
      if (!names.insert(s.name).second) {
        throw ValidationError("two scene directories share the name '" + s.name + "'");
      }
      s.semantic = files.semantic;
      s.boundary_high = files.boundary_high;
      s.boundary_low = existing(files.boundary_low);
      s.image = existing(files.image);
      s.points = files.points;
      s.ground_truth = in.ground_truth.empty() ? existing(files.ground_truth)
                                               : std::optional<fs::path>(in.ground_truth);
      out.push_back(std::move(s));
    }
    return out;
  }
  if (in.semantic.empty() || in.boundary_high.empty() || in.points.empty()) {
    throw ValidationError(
        "no scene directory given; --semantic, --boundary-high and --points are required");
  }
  SceneSource s;
  s.name = "scene";
  s.semantic = in.semantic;
  s.boundary_high = in.boundary_high;
  if (!in.boundary_low.empty()) s.boundary_low = in.boundary_low;
  if (!in.image.empty()) s.image = in.image;
  s.points = in.points;
  if (!in.ground_truth.empty()) s.ground_truth = in.ground_truth;
  out.push_back(std::move(s));
  return out;
}

LoadedScene load_scene(const SceneSource& src, bool need_image) {
  LoadedScene scene;
  scene.semantic = read_semantic_map(src.semantic);
  scene.inputs["semantic"] = src.semantic.string();
  scene.boundary_high = read_boundary_map(src.boundary_high);
  scene.inputs["boundary_high"] = src.boundary_high.string();
  if (src.image) {
    scene.image = read_image(*src.image);
    scene.inputs["image"] = src.image->string();
  } else if (need_image) {
    throw ValidationError("scene '" + src.name + "' has no image");
  }
  if (src.boundary_low) {
    scene.boundary_low = read_boundary_map(*src.boundary_low);
    scene.inputs["boundary_low"] = src.boundary_low->string();
  } else if (scene.image) {
    scene.boundary_low = low_level_boundary(*scene.image);
  } else {
    throw ValidationError("scene '" + src.name + "' needs --boundary-low or --image");
  }
  scene.points = read_points(src.points, scene.semantic.height, scene.semantic.width);
  scene.inputs["points"] = src.points.string();
  if (src.ground_truth) {
    scene.ground_truth = read_mask(*src.ground_truth);
    scene.inputs["ground_truth"] = src.ground_truth->string();
  }
  return scene;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Runs work(i) for every scene index on up to `jobs` threads. Failures are rethrown
// after all workers finish, lowest scene index first, so the outcome never depends
// on scheduling.
template <typename Work>
void for_each_scene(std::size_t count, int jobs, Work work) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(jobs, 1), count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create " + dir.string() + ": " + ec.message());
}

fs::path scene_out_dir(const fs::path& out, const SceneSource& src, std::size_t scene_count,
                       bool from_dirs) {
  return from_dirs || scene_count > 1 ? out / src.name : out;
}

void add_pipeline_flags(CLI::App* cmd, PipelineConfig& cfg, std::string& scheme,
                        std::string& combine) {
  cmd->add_option("--beta", cfg.beta, "Boundary weight in the edge length")->capture_default_str();
  cmd->add_option("--lambda", cfg.lambda, "Entropic regularization")->capture_default_str();
  cmd->add_option("--sinkhorn-iters", cfg.sinkhorn_iterations, "Sinkhorn iterations")
      ->capture_default_str();
  cmd->add_option("--scheme", scheme, "equal_division | nearest_gt | nearest_centroid")
      ->capture_default_str();
  cmd->add_option("--centroid-iters", cfg.centroid_iterations, "Centroid refinement rounds")
      ->capture_default_str();
  cmd->add_option("--boundary-combine", combine, "max | high_only | low_only")
      ->capture_default_str();
  cmd->add_flag("--cost-from-centroids", cfg.cost_from_centroids,
                "Use refined centroids as OT cost sources");
  cmd->add_flag("--log-domain", cfg.log_domain, "Log-domain Sinkhorn updates");
  cmd->add_option("--edge-floor", cfg.edge_floor, "Constant added to every edge length")
      ->capture_default_str();
}

void add_loss_flags(CLI::App* cmd, LossConfig& cfg) {
  cmd->add_option("--alpha1", cfg.alpha1, "Weight of the LAB affinity term")->capture_default_str();
  cmd->add_option("--alpha2", cfg.alpha2, "Weight of the RGB tree term")->capture_default_str();
  cmd->add_option("--tau", cfg.tau, "LAB similarity threshold")->capture_default_str();
  cmd->add_option("--theta1", cfg.theta1, "LAB kernel scale")->capture_default_str();
  cmd->add_option("--theta2", cfg.theta2, "RGB tree similarity scale")->capture_default_str();
}

void add_common_flags(CLI::App* cmd, int& jobs, bool& timings) {
  cmd->add_option("--jobs", jobs, "Scenes processed in parallel")
      ->envname("OTMASK_JOBS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--timings", timings, "Record per-stage wall-clock seconds in the manifest");
}

void add_config_option(CLI::App* cmd, std::string& path) {
  cmd->add_option("--config", path, "Config file with key = value lines (flags take precedence)")
      ->check(CLI::ExistingFile);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Fills options of `cmd` that were not given on the command line from a config file.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::Option* opt = key == "config" ? nullptr : cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

int run_generate(const InputFlags& in, const PipelineConfig& cfg, const fs::path& out, int jobs,
                 bool timings) {
  const auto scenes = resolve_scenes(in);
  const bool from_dirs = !in.scene_dirs.empty();
  std::vector<std::string> lines(scenes.size());
  for_each_scene(scenes.size(), jobs, [&](std::size_t i) {
    const SceneSource& src = scenes[i];
    auto t0 = std::chrono::steady_clock::now();
    const LoadedScene scene = load_scene(src, false);
    RunManifest manifest;
    manifest.command = "generate";
    manifest.config = to_json(cfg);
    manifest.inputs = scene.inputs;
    manifest.include_timings = timings;
    manifest.timings["load"] = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const PipelineResult result = generate_pseudo_mask(scene.semantic, scene.boundary_high,
                                                       scene.boundary_low, scene.points, cfg);
    manifest.timings["pipeline"] = seconds_since(t0);

    const fs::path dir = scene_out_dir(out, src, scenes.size(), from_dirs);
    ensure_dir(dir);
    write_mask(result.mask, dir / "mask.pgm");
    Json results = {{"scene", src.name},
                    {"mask", "mask.pgm"},
                    {"height", result.mask.height},
                    {"width", result.mask.width},
                    {"diagnostics", to_json(result.diagnostics)}};
    if (scene.ground_truth) {
      results["mean_iou"] = mean_target_iou(result.mask, *scene.ground_truth);
      results["panoptic"] = to_json(panoptic_quality(result.mask, *scene.ground_truth));
    }
    write_report(manifest, results, dir / "diagnostics.json");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: %zu targets, marginal error %.3g, cost %.6g",
                  src.name.c_str(), scene.points.size(), result.diagnostics.marginal_error,
                  result.diagnostics.transport_cost);
    lines[i] = buf;
  });
  for (const auto& l : lines) std::cout << l << '\n';
  return 0;
}

int run_compare(const InputFlags& in, const PipelineConfig& cfg, const fs::path& out, int jobs,
                bool timings) {
  const auto scenes = resolve_scenes(in);
  const bool from_dirs = !in.scene_dirs.empty();
  std::vector<Json> per_scene(scenes.size());
  std::vector<std::optional<std::pair<double, double>>> ious(scenes.size());
  for_each_scene(scenes.size(), jobs, [&](std::size_t i) {
    const SceneSource& src = scenes[i];
    auto t0 = std::chrono::steady_clock::now();
    const LoadedScene scene = load_scene(src, false);
    RunManifest manifest;
    manifest.command = "compare";
    manifest.config = to_json(cfg);
    manifest.inputs = scene.inputs;
    manifest.include_timings = timings;
    manifest.timings["load"] = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const TransportSetup setup = prepare_transport(scene.semantic, scene.boundary_high,
                                                   scene.boundary_low, scene.points, cfg);
    const TransportPlan plan = sinkhorn_solve(setup.problem, cfg.sinkhorn());
    const int h = scene.semantic.height;
    const int w = scene.semantic.width;
    const PseudoMask ot = decode_plan(plan, scene.points, h, w);
    const PseudoMask mc = minimum_cost_baseline(setup.gt_costs, scene.points, h, w);
    manifest.timings["pipeline"] = seconds_since(t0);

    const fs::path dir = scene_out_dir(out, src, scenes.size(), from_dirs);
    ensure_dir(dir);
    write_mask(ot, dir / "ot_mask.pgm");
    write_mask(mc, dir / "mc_mask.pgm");

    Json targets = Json::array();
    const auto ot_counts = target_pixel_counts(ot, scene.points);
    const auto mc_counts = target_pixel_counts(mc, scene.points);
    std::vector<std::int64_t> gt_counts;
    if (scene.ground_truth) gt_counts = target_pixel_counts(*scene.ground_truth, scene.points);
    for (std::size_t t = 0; t < scene.points.size(); ++t) {
      Json row = {{"target_id", scene.points[t].target_id},
                  {"supply", setup.supply.counts[t]},
                  {"ot_pixels", ot_counts[t]},
                  {"mc_pixels", mc_counts[t]}};
      if (!gt_counts.empty()) row["gt_pixels"] = gt_counts[t];
      targets.push_back(row);
    }
    Json results = {{"scene", src.name},
                    {"ot_mask", "ot_mask.pgm"},
                    {"mc_mask", "mc_mask.pgm"},
                    {"marginal_error", plan.marginal_error},
                    {"targets", targets}};
    if (scene.ground_truth) {
      const double iou_ot = mean_target_iou(ot, *scene.ground_truth);
      const double iou_mc = mean_target_iou(mc, *scene.ground_truth);
      const PanopticScore pq_ot = panoptic_quality(ot, *scene.ground_truth);
      const PanopticScore pq_mc = panoptic_quality(mc, *scene.ground_truth);
      results["ot"] = {{"mean_iou", iou_ot}, {"panoptic", to_json(pq_ot)}};
      results["mc"] = {{"mean_iou", iou_mc}, {"panoptic", to_json(pq_mc)}};
      results["delta"] = {{"mean_iou", iou_ot - iou_mc}, {"pq", pq_ot.pq - pq_mc.pq}};
      ious[i] = std::pair{iou_ot, iou_mc};
    }
    write_report(manifest, results, dir / "compare.json");
    per_scene[i] = {{"scene", src.name},
                    {"ot_mean_iou", ious[i] ? Json(ious[i]->first) : Json(nullptr)},
                    {"mc_mean_iou", ious[i] ? Json(ious[i]->second) : Json(nullptr)}};
  });

  std::size_t scored = 0;
  std::size_t wins = 0;
  double sum_ot = 0.0;
  double sum_mc = 0.0;
  for (const auto& v : ious) {
    if (!v) continue;
    ++scored;
    sum_ot += v->first;
    sum_mc += v->second;
    if (v->first > v->second) ++wins;
  }
  RunManifest manifest;
  manifest.command = "compare";
  manifest.config = to_json(cfg);
  for (const auto& s : scenes) manifest.inputs["scene:" + s.name] = s.semantic.parent_path().string();
  Json summary = {{"scenes", per_scene}, {"scored_scenes", scored}};
  if (scored > 0) {
    summary["ot_mean_iou"] = sum_ot / scored;
    summary["mc_mean_iou"] = sum_mc / scored;
    summary["delta_mean_iou"] = (sum_ot - sum_mc) / scored;
    summary["ot_wins"] = wins;
    summary["ot_win_rate"] = static_cast<double>(wins) / scored;
  }
  ensure_dir(out);
  write_report(manifest, summary, out / "summary.json");
  if (scored > 0) {
    std::printf("%zu scenes: mIoU OT %.4f, MC %.4f, OT wins %zu\n", scored, sum_ot / scored,
                sum_mc / scored, wins);
  } else {
    std::printf("%zu scenes compared (no ground truth, no scores)\n", scenes.size());
  }
  return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& gt_path,
                 const std::string& out) {
  const PseudoMask pred = read_mask(pred_path);
  const PseudoMask gt = read_mask(gt_path);
  const PanopticScore score = panoptic_quality(pred, gt);
  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.inputs = {{"pred", pred_path}, {"gt", gt_path}};
  Json results = to_json(score);
  results["mean_iou"] = mean_target_iou(pred, gt);
  if (out.empty()) {
    std::cout << render_report(manifest, results);
  } else {
    write_report(manifest, results, out);
    std::printf("PQ %.4f SQ %.4f RQ %.4f\n", score.pq, score.sq, score.rq);
  }
  return 0;
}

int run_synth(const std::string& spec_path, std::uint64_t seed, const std::string& out) {
  const SceneSpec spec = read_scene_spec(spec_path);
  const Scene scene = synth_scene(spec, seed);
  write_scene(scene, out);
  RunManifest manifest;
  manifest.command = "synth";
  manifest.inputs = {{"spec", spec_path}};
  manifest.seed = seed;
  Json results = {{"height", spec.height},
                  {"width", spec.width},
                  {"classes", spec.classes},
                  {"targets", scene.points.size()}};
  write_report(manifest, results, fs::path(out) / "scene.json");
  std::printf("wrote %zu-target scene to %s\n", scene.points.size(), out.c_str());
  return 0;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

std::vector<std::size_t> sample_coordinates(std::size_t size, std::size_t samples,
                                            std::mt19937_64& rng) {
  std::vector<std::size_t> all(size);
  for (std::size_t i = 0; i < size; ++i) all[i] = i;
  if (samples == 0 || samples >= size) return all;
  // Partial Fisher-Yates with a portable bounded draw.
  for (std::size_t i = 0; i < samples; ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const std::size_t j = i + static_cast<std::size_t>(u * static_cast<double>(size - i));
    std::swap(all[i], all[std::min(j, size - 1)]);
  }
  all.resize(samples);
  std::sort(all.begin(), all.end());
  return all;
}

Json check_json(double value, double fd_error, std::size_t coords) {
  return {{"value", value}, {"fd_max_relative_error", fd_error}, {"fd_coordinates", coords}};
}

int run_losses(const InputFlags& in, const std::string& mask_path, const LossConfig& cfg,
               std::size_t fd_samples, double fd_step, std::uint64_t seed, const std::string& out) {
  const auto scenes = resolve_scenes(in);
  if (scenes.size() != 1) throw ValidationError("losses takes exactly one scene");
  SceneSource src = scenes.front();
  if (!mask_path.empty()) src.ground_truth = fs::path(mask_path);
  if (!src.ground_truth) throw ValidationError("losses needs --mask (or a scene with gt_mask.pgm)");
  const LoadedScene scene = load_scene(src, true);
  const RgbImage& image = *scene.image;
  const PseudoMask& mask = *scene.ground_truth;
  if (image.height != scene.semantic.height || image.width != scene.semantic.width) {
    throw ShapeError("image and semantic map have different shapes");
  }

  const SpanningTree tree = build_mst(image);
  const SemanticLossTerms terms =
      semantic_loss_terms(scene.semantic, image, scene.points, tree, cfg);
  const LossValue boundary = boundary_affinity_loss(scene.boundary_high, mask);

  std::mt19937_64 rng(seed);
  auto semantic_eval = [&](auto loss) {
    return [&, loss](std::span<const double> x) {
      SemanticMap probe = scene.semantic;
      probe.values.assign(x.begin(), x.end());
      return loss(probe);
    };
  };
  const auto sem_coords = sample_coordinates(scene.semantic.values.size(), fd_samples, rng);
  const double fd_partial = finite_difference_check(
      semantic_eval([&](const SemanticMap& s) { return partial_cross_entropy(s, scene.points); }),
      scene.semantic.values, fd_step, sem_coords);
  const double fd_lab = finite_difference_check(
      semantic_eval([&](const SemanticMap& s) { return lab_affinity_loss(s, image, cfg); }),
      scene.semantic.values, fd_step, sem_coords);
  const double fd_rgb = finite_difference_check(
      semantic_eval([&](const SemanticMap& s) { return rgb_tree_loss(s, tree, cfg); }),
      scene.semantic.values, fd_step, sem_coords);
  const auto bnd_coords = sample_coordinates(scene.boundary_high.values.size(), fd_samples, rng);
  const double fd_boundary = finite_difference_check(
      [&](std::span<const double> x) {
        BoundaryMap probe = scene.boundary_high;
        probe.values.assign(x.begin(), x.end());
        return boundary_affinity_loss(probe, mask);
      },
      scene.boundary_high.values, fd_step, bnd_coords);

  RunManifest manifest;
  manifest.command = "losses";
  manifest.config = to_json(cfg);
  manifest.config["fd_samples"] = fd_samples;
  manifest.config["fd_step"] = fd_step;
  manifest.inputs = scene.inputs;
  manifest.inputs["mask"] = src.ground_truth->string();
  manifest.seed = seed;
  Json results = {
      {"partial_cross_entropy", check_json(terms.partial, fd_partial, sem_coords.size())},
      {"lab_affinity", check_json(terms.lab, fd_lab, sem_coords.size())},
      {"rgb_tree", check_json(terms.rgb, fd_rgb, sem_coords.size())},
      {"boundary_affinity", check_json(boundary.value, fd_boundary, bnd_coords.size())},
      {"semantic_total", terms.total},
      {"mst_total_weight", tree.total_weight()},
  };
  if (out.empty()) {
    std::cout << render_report(manifest, results);
  } else {
    write_report(manifest, results, out);
    std::printf("partial %.6g lab %.6g rgb %.6g total %.6g boundary %.6g\n", terms.partial,
                terms.lab, terms.rgb, terms.total, boundary.value);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-mask generation from point annotations by optimal transport"};
  app.set_version_flag("--version", OTMASK_VERSION);
  app.require_subcommand(1);

  PipelineConfig pipeline;
  std::string scheme{to_string(pipeline.supply_scheme)};
  std::string combine{to_string(pipeline.boundary_combine)};
  LossConfig loss;
  InputFlags inputs;
  std::string out;
  int jobs = 1;
  bool timings = false;
  std::string config_path;

  auto* generate = app.add_subcommand("generate", "Maps + points to a pseudo-mask and diagnostics");
  add_input_flags(generate, inputs, true);
  add_pipeline_flags(generate, pipeline, scheme, combine);
  add_common_flags(generate, jobs, timings);
  generate->add_option("--out", out, "Output directory")->required();
  add_config_option(generate, config_path);

  auto* compare = app.add_subcommand("compare", "OT against the per-pixel minimum-cost baseline");
  add_input_flags(compare, inputs, true);
  add_pipeline_flags(compare, pipeline, scheme, combine);
  add_common_flags(compare, jobs, timings);
  compare->add_option("--out", out, "Output directory")->required();
  add_config_option(compare, config_path);

  std::string pred_path;
  std::string gt_path;
  auto* evaluate = app.add_subcommand("evaluate", "Panoptic quality of a mask against ground truth");
  evaluate->add_option("--pred", pred_path, "Predicted mask (PGM)")->required();
  evaluate->add_option("--gt", gt_path, "Ground-truth mask (PGM)")->required();
  evaluate->add_option("--out", out, "Report path (stdout when absent)");

  std::string spec_path;
  std::uint64_t seed = 0;
  auto* synth = app.add_subcommand("synth", "Synthesize a fixture scene from a text spec");
  synth->add_option("--spec", spec_path, "Scene spec file")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "Random seed")->capture_default_str();
  synth->add_option("--out", out, "Output directory")->required();

  std::string mask_path;
  std::size_t fd_samples = 64;
  double fd_step = 1e-6;
  auto* losses = app.add_subcommand("losses", "Loss values and finite-difference gradient checks");
  add_input_flags(losses, inputs, false);
  add_loss_flags(losses, loss);
  losses->add_option("--mask", mask_path, "Pseudo-mask for the boundary term (PGM)");
  losses->add_option("--fd-samples", fd_samples,
                     "Coordinates checked per term (0 checks all)")->capture_default_str();
  losses->add_option("--fd-step", fd_step, "Central-difference step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  losses->add_option("--seed", seed, "Seed for coordinate sampling")->capture_default_str();
  losses->add_option("--out", out, "Report path (stdout when absent)");
  add_config_option(losses, config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    if (status == 0) return 0;
    std::cerr << app.help();
    return 1;
  }

  try {
    for (CLI::App* cmd : {generate, compare, losses}) {
      if (cmd->parsed()) apply_config_file(cmd, config_path);
    }
    pipeline.supply_scheme = parse_supply_scheme(scheme);
    pipeline.boundary_combine = parse_boundary_combine(combine);
    pipeline.validate();
    if (generate->parsed()) return run_generate(inputs, pipeline, out, jobs, timings);
    if (compare->parsed()) return run_compare(inputs, pipeline, out, jobs, timings);
    if (evaluate->parsed()) return run_evaluate(pred_path, gt_path, out);
    if (synth->parsed()) return run_synth(spec_path, seed, out);
    if (losses->parsed()) {
      return run_losses(inputs, mask_path, loss, fd_samples, fd_step, seed, out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvariantViolation& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
