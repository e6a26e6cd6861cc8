// Copyright 2026 The MeshForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "meshforge/io.hpp"
#include "meshforge/mesher.hpp"

namespace meshforge {

// ---------------------------------------------------------------------------
// Configuration

/// Meshing settings as written in a config; the box and gradient step fall
/// back to the field bounds and 1e-3 cell diagonals.
struct MeshingSpec {
  std::array<int, 3> resolution{64, 64, 64};
  std::optional<Aabb> bbox;
  double iso = 0.0;
  std::optional<double> gradient_step;

  MeshingConfig Resolve(const Aabb& field_bounds) const {
    MeshingConfig c;
    c.resolution = resolution;
    c.bbox = bbox ? *bbox : field_bounds;
    c.iso = iso;
    c.gradient_step = 1.0;
    c.gradient_step = gradient_step ? *gradient_step : 1e-3 * c.cell_diagonal();
    c.Validate();
    return c;
  }
};

enum class ColorKind { kOppositeNormal, kCameraDirection };

enum class EvalTarget { kFragment, kScaled, kMerged };

struct EvalSpec {
  int frame_sample = 20;
  uint64_t seed = 0;
  MaskMode mask_mode = MaskMode::kCovered;
  double min_coverage = 0.001;
  EvalTarget target = EvalTarget::kMerged;
  std::string bundle;  // empty = first bundle
  Rgb background = Rgb::Zero();
};

struct BundleConfig {
  std::string id;
  fs::path intrinsics;
  fs::path poses;
  fs::path markers;
  std::optional<Json> analytic;  // inline analytic field description
  fs::path field_file;           // analytic JSON (.json) or grid (.vgrd)
  fs::path frames_dir;           // optional reference frames frame_<id>.ppm
};

struct CorrespondenceRef {
  std::string source;
  std::string target;
  fs::path path;  // empty = output_dir/correspondences/<source>__<target>.json
};

struct PipelineConfig {
  fs::path config_path;
  fs::path base_dir;
  std::string config_hash;
  fs::path output_dir;
  std::vector<BundleConfig> bundles;
  MeshingSpec meshing;
  std::optional<MeshingSpec> merge_meshing;
  ColorKind color = ColorKind::kOppositeNormal;
  IcpParams icp;
  std::optional<double> decimate_cell;
  std::vector<CorrespondenceRef> correspondences;
  EvalSpec eval;
  int threads = 1;

  const BundleConfig& Bundle(const std::string& id) const {
    for (const auto& b : bundles)
      if (b.id == id) return b;
    throw Error(Errc::kConfig, "unknown bundle '" + id + "'");
  }
  bool HasBundle(const std::string& id) const {
    for (const auto& b : bundles)
      if (b.id == id) return true;
    return false;
  }

  fs::path Output(const fs::path& rel) const { return output_dir / rel; }

  fs::path CorrespondencePath(const std::string& source, const std::string& target) const {
    for (const auto& c : correspondences)
      if (c.source == source && c.target == target && !c.path.empty()) return c.path;
    return Output(fs::path("correspondences") / (source + "__" + target + ".json"));
  }
};

namespace detail {

inline std::array<int, 3> ParseResolution(const Json& j) {
  if (j.is_number_integer()) {
    int r = j.get<int>();
    return {r, r, r};
  }
  if (j.is_array() && j.size() == 3) return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
  throw Error(Errc::kConfig, "resolution must be an integer or [nx, ny, nz]");
}

inline MeshingSpec ParseMeshing(const Json& j, MeshingSpec base = {}) {
  if (j.contains("resolution")) base.resolution = ParseResolution(j.at("resolution"));
  if (j.contains("bbox")) base.bbox = Aabb(ToVec3(j.at("bbox").at("min")), ToVec3(j.at("bbox").at("max")));
  base.iso = j.value("iso", base.iso);
  if (j.contains("gradient_step")) base.gradient_step = j.at("gradient_step").get<double>();
  for (int r : base.resolution)
    if (r < 2) throw Error(Errc::kConfig, "meshing resolution must be >= 2 per axis");
  if (base.bbox && base.bbox->degenerate()) throw Error(Errc::kConfig, "meshing bbox is degenerate");
  return base;
}

inline void CheckId(const std::string& id) {
  static const std::regex kId("[A-Za-z0-9_-]+");
  if (!std::regex_match(id, kId))
    throw Error(Errc::kConfig, "bundle id '" + id + "' must use only letters, digits, '_' and '-'");
}

}  // namespace detail

/// Parses a pipeline config. Relative paths resolve against the config's
/// directory; `output_override` (if given) replaces output_dir.
inline PipelineConfig ParseConfig(const Json& j, const fs::path& config_path, std::string config_hash,
                                  const std::optional<fs::path>& output_override = std::nullopt) {
  PipelineConfig c;
  c.config_path = config_path;
  c.base_dir = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  c.config_hash = std::move(config_hash);
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : c.base_dir / p; };
  detail::JsonGuard(config_path.string(), [&] {
    c.output_dir = output_override ? *output_override : resolve(j.value("output_dir", std::string("out")));
    if (!j.contains("bundles") || !j.at("bundles").is_array() || j.at("bundles").empty())
      throw Error(Errc::kConfig, "config needs at least one bundle");
    for (const auto& b : j.at("bundles")) {
      BundleConfig bc;
      bc.id = b.at("id").get<std::string>();
      detail::CheckId(bc.id);
      if (c.HasBundle(bc.id)) throw Error(Errc::kConfig, "duplicate bundle id '" + bc.id + "'");
      bc.intrinsics = resolve(b.at("intrinsics").get<std::string>());
      bc.poses = resolve(b.at("poses").get<std::string>());
      if (b.contains("markers")) bc.markers = resolve(b.at("markers").get<std::string>());
      const Json& f = b.at("field");
      if (f.contains("analytic")) {
        bc.analytic = f.at("analytic");
      } else if (f.contains("file")) {
        bc.field_file = resolve(f.at("file").get<std::string>());
      } else if (f.contains("grid")) {
        bc.field_file = resolve(f.at("grid").get<std::string>());
      } else {
        throw Error(Errc::kConfig, "bundle '" + bc.id + "': field needs 'analytic', 'grid' or 'file'");
      }
      if (b.contains("frames_dir")) bc.frames_dir = resolve(b.at("frames_dir").get<std::string>());
      c.bundles.push_back(std::move(bc));
    }
    if (j.contains("meshing")) c.meshing = detail::ParseMeshing(j.at("meshing"));
    if (j.contains("merge_meshing")) c.merge_meshing = detail::ParseMeshing(j.at("merge_meshing"), c.meshing);
    const std::string color = j.value("colorize", std::string("opposite_normal"));
    if (color == "opposite_normal")
      c.color = ColorKind::kOppositeNormal;
    else if (color == "camera_direction")
      c.color = ColorKind::kCameraDirection;
    else
      throw Error(Errc::kConfig, "colorize must be opposite_normal or camera_direction");
    if (j.contains("icp")) {
      const Json& i = j.at("icp");
      c.icp.max_iterations = i.value("max_iterations", c.icp.max_iterations);
      c.icp.max_correspondence_distance = i.value("max_correspondence_distance", c.icp.max_correspondence_distance);
      c.icp.rel_rmse_tolerance = i.value("rel_rmse_tolerance", c.icp.rel_rmse_tolerance);
      c.icp.sample_count = i.value("sample_count", c.icp.sample_count);
      c.icp.reciprocal = i.value("reciprocal", c.icp.reciprocal);
    }
    c.icp.Validate();
    if (j.contains("decimate_cell") && !j.at("decimate_cell").is_null()) {
      c.decimate_cell = j.at("decimate_cell").get<double>();
      if (!(*c.decimate_cell > 0.0)) throw Error(Errc::kConfig, "decimate_cell must be positive");
    }
    if (j.contains("correspondences")) {
      for (const auto& e : j.at("correspondences")) {
        CorrespondenceRef r;
        r.source = e.at("source").get<std::string>();
        r.target = e.at("target").get<std::string>();
        if (!c.HasBundle(r.source) || !c.HasBundle(r.target))
          throw Error(Errc::kConfig, "correspondences reference unknown bundle in pair (" + r.source + ", " +
                                         r.target + ")");
        if (r.source == r.target) throw Error(Errc::kConfig, "correspondence pair with itself: " + r.source);
        if (e.contains("path")) r.path = resolve(e.at("path").get<std::string>());
        c.correspondences.push_back(std::move(r));
      }
    }
    if (j.contains("eval")) {
      const Json& e = j.at("eval");
      c.eval.frame_sample = e.value("frame_sample", c.eval.frame_sample);
      c.eval.seed = e.value("seed", c.eval.seed);
      const std::string mask = e.value("mask_mode", std::string("covered"));
      if (mask == "covered")
        c.eval.mask_mode = MaskMode::kCovered;
      else if (mask == "full")
        c.eval.mask_mode = MaskMode::kFull;
      else
        throw Error(Errc::kConfig, "mask_mode must be covered or full");
      c.eval.min_coverage = e.value("min_coverage", c.eval.min_coverage);
      const std::string target = e.value("target", std::string("merged"));
      if (target == "fragment")
        c.eval.target = EvalTarget::kFragment;
      else if (target == "scaled")
        c.eval.target = EvalTarget::kScaled;
      else if (target == "merged")
        c.eval.target = EvalTarget::kMerged;
      else
        throw Error(Errc::kConfig, "eval target must be fragment, scaled or merged");
      c.eval.bundle = e.value("bundle", std::string());
      if (!c.eval.bundle.empty()) c.Bundle(c.eval.bundle);
      if (e.contains("background")) c.eval.background = detail::ToVec3(e.at("background"));
      if (c.eval.frame_sample < 1) throw Error(Errc::kConfig, "frame_sample must be >= 1");
    }
    return 0;
  });
  return c;
}

inline PipelineConfig LoadConfig(const fs::path& path, const std::optional<fs::path>& output_override = std::nullopt) {
  std::string text = ReadFileBytes(path);
  return ParseConfig(ParseJson(text, path.string()), path, Sha256Hex(text), output_override);
}

// ---------------------------------------------------------------------------
// Stage plumbing

/// Tracks the files one stage reads so their hashes land in the manifest.
/// Names are relative to the config directory (inputs) or the output
/// directory (intermediates, prefixed "out/"), so manifests do not depend on
/// where a project lives.
class StageContext {
 public:
  StageContext(const PipelineConfig& cfg, std::string stage) : cfg_(cfg) {
    manifest_.config_hash = cfg.config_hash;
    manifest_.notes["stage"] = std::move(stage);
  }

  std::string Read(const fs::path& path) {
    std::string bytes;
    try {
      bytes = ReadFileBytes(path);
    } catch (const Error&) {
      throw Error(Errc::kIo, "missing input " + path.string());
    }
    manifest_.AddInput(Name(path), bytes);
    return bytes;
  }

  /// Reads an intermediate produced by an earlier stage.
  std::string ReadIntermediate(const fs::path& rel, const std::string& producer) {
    const fs::path p = cfg_.Output(rel);
    if (!fs::exists(p))
      throw Error(Errc::kIo, "missing intermediate " + p.string() + " (produced by the '" + producer + "' stage)");
    return Read(p);
  }

  Manifest& manifest() { return manifest_; }
  const PipelineConfig& config() const { return cfg_; }

  std::string Name(const fs::path& path) const {
    const fs::path out_rel = path.lexically_relative(cfg_.output_dir);
    if (!out_rel.empty() && *out_rel.begin() != "..") return "out/" + out_rel.generic_string();
    const fs::path in_rel = path.lexically_relative(cfg_.base_dir);
    if (!in_rel.empty() && *in_rel.begin() != "..") return in_rel.generic_string();
    return path.generic_string();
  }

  std::vector<std::string> PlyComments() const { return {"manifest " + manifest_.ToJson().dump()}; }

  void WritePly(const fs::path& rel, const TriangleMesh& m) const {
    WriteFileBytes(cfg_.Output(rel), EncodePly(m, PlyComments()));
  }
  void WriteJson(const fs::path& rel, Json j) const {
    j["manifest"] = manifest_.ToJson();
    WriteFileBytes(cfg_.Output(rel), j.dump(2) + "\n");
  }

 private:
  const PipelineConfig& cfg_;
  Manifest manifest_;
};

struct LoadedBundle {
  CameraIntrinsics intrinsics;
  FramePoses poses;
  FieldPtr field;
  /// The field without view dependence; reference frames are rendered from it.
  FieldPtr ground_truth;

  const Pose& PoseOf(int frame, const std::string& bundle) const {
    for (const auto& [id, p] : poses)
      if (id == frame) return p;
    throw Error(Errc::kConfig, "bundle '" + bundle + "' has no pose for frame " + std::to_string(frame));
  }
};

inline LoadedBundle LoadBundle(const BundleConfig& b, StageContext& ctx) {
  LoadedBundle out;
  out.intrinsics = IntrinsicsFromJson(ParseJson(ctx.Read(b.intrinsics), b.intrinsics.string()), b.intrinsics.string());
  out.poses = PosesFromJson(ParseJson(ctx.Read(b.poses), b.poses.string()), b.poses.string());
  if (out.poses.empty()) throw Error(Errc::kConfig, "bundle '" + b.id + "' has no poses");
  auto analytic = [&](const Json& j, const std::string& name) {
    auto f = std::make_shared<AnalyticField>(AnalyticFieldFromJson(j, name));
    out.field = f;
    out.ground_truth = std::make_shared<AnalyticField>(f->Diffuse());
  };
  if (b.analytic) {
    analytic(*b.analytic, "bundle '" + b.id + "' field");
  } else {
    std::string bytes = ctx.Read(b.field_file);
    if (bytes.substr(0, 4) == "VGRD") {
      out.field = std::make_shared<GridField>(DecodeGrid(bytes, b.field_file.string()));
      out.ground_truth = out.field;
    } else {
      analytic(ParseJson(bytes, b.field_file.string()), b.field_file.string());
    }
  }
  return out;
}

inline ColorMode ColorModeFor(ColorKind kind, const Pose& first_camera) {
  return kind == ColorKind::kOppositeNormal ? ColorMode::OppositeNormal() : ColorMode::CameraDirection(first_camera);
}

/// Camera-to-world pose after uniformly scaling the world by `s`.
inline Pose ScaledPose(const Pose& p, double s) { return {p.r, s * p.t}; }

/// Extract, shade normals and colorize one field.
inline TriangleMesh ExtractColoredMesh(const VolumeField& f, const MeshingConfig& mc, const ColorMode& mode,
                                       int threads) {
  TriangleMesh m = MarchingCubes(f, mc, threads);
  m = VertexNormals(std::move(m), f, mc.gradient_step, threads);
  return Colorize(std::move(m), f, mode, threads);
}

// ---------------------------------------------------------------------------
// Stages

inline fs::path FragmentPath(const std::string& id) { return fs::path("fragments") / (id + ".ply"); }
inline fs::path ScaledPath(const std::string& id) { return fs::path("scaled") / (id + ".ply"); }
inline fs::path ScaleReportPath(const std::string& id) { return fs::path("scale") / (id + ".json"); }
inline fs::path RegistrationPath(const std::string& src, const std::string& dst) {
  return fs::path("registration") / (src + "__" + dst + ".json");
}
inline fs::path MergedPath(const std::string& id = "final") { return fs::path("merged") / (id + ".ply"); }
inline fs::path MergeReportPath() { return fs::path("merged") / "merge.json"; }

/// Per-fragment extraction: marching cubes, normals, colors. Writes
/// fragments/<id>.ply.
inline TriangleMesh RunMesh(const PipelineConfig& cfg, const std::string& id) {
  StageContext ctx(cfg, "mesh");
  const BundleConfig& b = cfg.Bundle(id);
  LoadedBundle lb = LoadBundle(b, ctx);
  const MeshingConfig mc = cfg.meshing.Resolve(lb.field->Bounds());
  TriangleMesh m = ExtractColoredMesh(*lb.field, mc, ColorModeFor(cfg.color, lb.poses.front().second), cfg.threads);
  ctx.manifest().notes["bundle"] = id;
  ctx.WritePly(FragmentPath(id), m);
  return m;
}

/// Marker-based metric scale for one bundle. Writes scale/<id>.json and the
/// rescaled fragment scaled/<id>.ply.
inline ScaleEstimate RunScale(const PipelineConfig& cfg, const std::string& id) {
  StageContext ctx(cfg, "scale");
  const BundleConfig& b = cfg.Bundle(id);
  if (b.markers.empty()) throw Error(Errc::kConfig, "bundle '" + id + "' declares no marker observations");
  LoadedBundle lb = LoadBundle(b, ctx);
  const auto obs = MarkersFromJson(ParseJson(ctx.Read(b.markers), b.markers.string()), b.markers.string());
  if (obs.empty()) throw Error(Errc::kConfig, "bundle '" + id + "' has no marker observations");
  const std::string fragment = ctx.ReadIntermediate(FragmentPath(id), "mesh");

  std::vector<ScalePair> pairs;
  Json frames = Json::array();
  for (const auto& o : obs) {
    MetricMarkerPoint metric = SolveMetricMarkerPoint(o, lb.intrinsics);
    ScalePair p = MeasureFrame(o, lb.intrinsics, *lb.field, lb.PoseOf(o.frame_id, id));
    pairs.push_back(p);
    frames.push_back({{"frame", o.frame_id},
                      {"metric_point", detail::FromVec3(p.metric)},
                      {"recon_point", detail::FromVec3(p.recon)},
                      {"rms_reprojection_px", metric.rms_reprojection_px}});
  }
  ScaleEstimate est = EstimateScale(pairs);
  for (size_t i = 0; i < est.per_frame.size(); ++i) frames[i]["scale"] = est.per_frame[i].second;

  TriangleMesh scaled = ApplyScale(DecodePly(fragment, FragmentPath(id).string()).mesh, est.mean_scale);
  ctx.manifest().notes["bundle"] = id;
  ctx.WriteJson(ScaleReportPath(id), {{"bundle", id}, {"mean_scale", est.mean_scale}, {"frames", frames}});
  ctx.WritePly(ScaledPath(id), scaled);
  return est;
}

inline double ReadMeanScale(StageContext& ctx, const std::string& id) {
  const fs::path rel = ScaleReportPath(id);
  Json j = ParseJson(ctx.ReadIntermediate(rel, "scale"), rel.string());
  return detail::JsonGuard(rel.string(), [&] { return j.at("mean_scale").get<double>(); });
}

inline Json RegistrationToJson(const std::string& src, const std::string& dst, const RegistrationResult& r) {
  return Json{{"source_id", src},
              {"target_id", dst},
              {"transform", PoseToJson(r.pose)},
              {"coarse_transform", PoseToJson(r.coarse)},
              {"rmse", r.icp.rmse},
              {"iterations", r.icp.iterations},
              {"converged", r.icp.converged},
              {"rmse_trace", r.icp.rmse_trace},
              {"matched", r.icp.matched},
              {"condition", r.icp.condition},
              {"low_conditioned", r.icp.low_conditioned},
              {"coarse_only", r.coarse_only},
              {"diagnostics", r.diagnostics}};
}

/// Coarse + ICP registration of one scaled fragment pair. Writes
/// registration/<src>__<dst>.json.
inline RegistrationResult RegisterPair(const PipelineConfig& cfg, const std::string& src, const std::string& dst) {
  StageContext ctx(cfg, "register");
  cfg.Bundle(src);
  cfg.Bundle(dst);
  const fs::path cpath = cfg.CorrespondencePath(src, dst);
  if (!fs::exists(cpath))
    throw Error(Errc::kConfig, "no correspondence file for pair (" + src + ", " + dst + "): " + cpath.string());
  CorrespondenceSet c = CorrespondencesFromJson(ParseJson(ctx.Read(cpath), cpath.string()), cpath.string());
  if (c.source_id != src || c.target_id != dst)
    throw Error(Errc::kConfig, cpath.string() + " holds pair (" + c.source_id + ", " + c.target_id +
                                   "), expected (" + src + ", " + dst + ")");
  TriangleMesh ms = DecodePly(ctx.ReadIntermediate(ScaledPath(src), "scale"), ScaledPath(src).string()).mesh;
  TriangleMesh md = DecodePly(ctx.ReadIntermediate(ScaledPath(dst), "scale"), ScaledPath(dst).string()).mesh;
  RegistrationResult r = RegisterFragments(ms, md, c, cfg.icp);
  ctx.WriteJson(RegistrationPath(src, dst), RegistrationToJson(src, dst, r));
  return r;
}

/// Registers every declared pair in config order.
inline void RunRegister(const PipelineConfig& cfg) {
  for (const auto& c : cfg.correspondences) RegisterPair(cfg, c.source, c.target);
}

struct MergeResult {
  TriangleMesh mesh;
  /// bundle id -> (pose into the first bundle's frame, metric scale)
  std::vector<std::tuple<std::string, Pose, double>> placements;
};

/// Rigid placement of every bundle's scaled frame in the first bundle's
/// frame, chained through the registered pairs.
inline std::map<std::string, Pose> ChainPlacements(const PipelineConfig& cfg, StageContext& ctx) {
  std::map<std::string, Pose> placed{{cfg.bundles.front().id, Pose::Identity()}};
  std::map<std::string, Pose> edges;  // "src__dst" -> src -> dst
  auto edge = [&](const CorrespondenceRef& c) -> const Pose& {
    const std::string key = c.source + "__" + c.target;
    if (auto it = edges.find(key); it != edges.end()) return it->second;
    const fs::path rel = RegistrationPath(c.source, c.target);
    Json j = ParseJson(ctx.ReadIntermediate(rel, "register"), rel.string());
    return edges[key] = detail::JsonGuard(rel.string(), [&] { return PoseFromJson(j.at("transform")); });
  };
  for (bool progress = true; progress && placed.size() < cfg.bundles.size();) {
    progress = false;
    for (const auto& c : cfg.correspondences) {
      const bool has_s = placed.count(c.source) > 0, has_t = placed.count(c.target) > 0;
      if (has_s == has_t) continue;
      if (has_t)
        placed[c.source] = Compose(placed[c.target], edge(c));
      else
        placed[c.target] = Compose(placed[c.source], Invert(edge(c)));
      progress = true;
    }
  }
  for (const auto& b : cfg.bundles)
    if (!placed.count(b.id))
      throw Error(Errc::kConfig, "bundle '" + b.id + "' is not linked to '" + cfg.bundles.front().id +
                                     "' by any correspondences pair; declare one, e.g. (" + b.id + ", " +
                                     cfg.bundles.front().id + ")");
  return placed;
}

/// Joint-field merge: place every scaled field in the first bundle's frame,
/// take their union, then extract, shade and colorize once more. Writes
/// merged/final.ply and merged/merge.json.
inline MergeResult RunMerge(const PipelineConfig& cfg) {
  StageContext ctx(cfg, "merge");
  std::map<std::string, Pose> placed = ChainPlacements(cfg, ctx);
  std::vector<PosedScaledField> parts;
  MergeResult out;
  Pose first_camera;
  Json bundles = Json::array();
  for (const auto& b : cfg.bundles) {
    LoadedBundle lb = LoadBundle(b, ctx);
    const double s = ReadMeanScale(ctx, b.id);
    const Pose& pose = placed.at(b.id);
    parts.emplace_back(lb.field, pose, s);
    out.placements.emplace_back(b.id, pose, s);
    if (parts.size() == 1) first_camera = ScaledPose(lb.poses.front().second, s);
    bundles.push_back({{"id", b.id}, {"scale", s}, {"transform", PoseToJson(pose)}});
  }
  auto field = MakeUnionField(parts);
  const MeshingSpec& spec = cfg.merge_meshing ? *cfg.merge_meshing : cfg.meshing;
  const MeshingConfig mc = spec.Resolve(field->Bounds());
  out.mesh = ExtractColoredMesh(*field, mc, ColorModeFor(cfg.color, first_camera), cfg.threads);
  if (cfg.decimate_cell) out.mesh = Decimate(out.mesh, *cfg.decimate_cell);
  ctx.manifest().notes["frame"] = cfg.bundles.front().id;
  ctx.WritePly(MergedPath(), out.mesh);
  ctx.WriteJson(MergeReportPath(), {{"frame", cfg.bundles.front().id},
                                    {"bundles", bundles},
                                    {"vertices", out.mesh.vertices.size()},
                                    {"faces", out.mesh.faces.size()}});
  return out;
}

inline std::string EvalReportName(const PipelineConfig& cfg, const std::string& bundle) {
  const char* t = cfg.eval.target == EvalTarget::kFragment ? "fragment"
                  : cfg.eval.target == EvalTarget::kScaled ? "scaled"
                                                           : "merged";
  return bundle + "_" + t + ".csv";
}

/// Rerendering evaluation of the configured target mesh against one bundle's
/// frames. References come from frames_dir when given, otherwise they are
/// ray-cast from the bundle's ground-truth field. Writes eval/<bundle>_<target>.csv.
inline EvalReport RunEval(const PipelineConfig& cfg) {
  StageContext ctx(cfg, "eval");
  const std::string id = cfg.eval.bundle.empty() ? cfg.bundles.front().id : cfg.eval.bundle;
  const BundleConfig& b = cfg.Bundle(id);
  LoadedBundle lb = LoadBundle(b, ctx);

  // Similarity taking the bundle's reconstruction frame into the mesh frame.
  Pose place = Pose::Identity();
  double scale = 1.0;
  fs::path mesh_rel;
  switch (cfg.eval.target) {
    case EvalTarget::kFragment:
      mesh_rel = FragmentPath(id);
      break;
    case EvalTarget::kScaled:
      mesh_rel = ScaledPath(id);
      scale = ReadMeanScale(ctx, id);
      break;
    case EvalTarget::kMerged: {
      mesh_rel = MergedPath();
      Json j = ParseJson(ctx.ReadIntermediate(MergeReportPath(), "merge"), MergeReportPath().string());
      detail::JsonGuard(MergeReportPath().string(), [&] {
        for (const auto& e : j.at("bundles"))
          if (e.at("id").get<std::string>() == id) {
            place = PoseFromJson(e.at("transform"));
            scale = e.at("scale").get<double>();
            return 0;
          }
        throw Error(Errc::kConfig, "merge report has no bundle '" + id + "'");
      });
      break;
    }
  }
  const TriangleMesh mesh = DecodePly(ctx.ReadIntermediate(mesh_rel, "earlier"), mesh_rel.string()).mesh;

  std::vector<EvalFrame> frames;
  for (size_t i : SampleIndices(lb.poses.size(), static_cast<size_t>(cfg.eval.frame_sample), cfg.eval.seed)) {
    const auto& [frame, pose] = lb.poses[i];
    EvalFrame ef;
    ef.frame_id = frame;
    ef.pose = Compose(place, ScaledPose(pose, scale));
    if (!b.frames_dir.empty()) {
      const fs::path p = b.frames_dir / ("frame_" + std::to_string(frame) + ".ppm");
      ef.image = DecodePpm(ctx.Read(p), p.string());
      if (ef.image.width != lb.intrinsics.width || ef.image.height != lb.intrinsics.height)
        throw Error(Errc::kDimensionMismatch, p.string() + " does not match the intrinsics image size");
    } else {
      ef.image = RayCastImage(*lb.ground_truth, lb.intrinsics, pose, cfg.eval.background, cfg.threads);
    }
    frames.push_back(std::move(ef));
  }
  EvalOptions opt;
  opt.frame_sample = static_cast<int>(frames.size());
  opt.seed = cfg.eval.seed;
  opt.mask_mode = cfg.eval.mask_mode;
  opt.min_coverage = cfg.eval.min_coverage;
  opt.background = cfg.eval.background;
  opt.threads = cfg.threads;
  EvalReport report = EvaluateAgainstFrames(mesh, frames, lb.intrinsics, opt);
  ctx.manifest().notes["bundle"] = id;
  WriteFileBytes(cfg.Output(fs::path("eval") / EvalReportName(cfg, id)),
                 EncodeMetricsCsv(report, ctx.manifest().ToJson().dump()));
  return report;
}

}  // namespace meshforge
