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

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "meshforge/camera.hpp"
#include "meshforge/error.hpp"
#include "meshforge/field.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/registration.hpp"
#include "meshforge/render.hpp"
#include "meshforge/scale.hpp"

namespace meshforge {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr std::string_view kToolVersion = "meshforge 0.1.0";

// ---------------------------------------------------------------------------
// Files and hashing

inline std::string ReadFileBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void WriteFileBytes(const fs::path& path, std::string_view data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::kIo, "short write to " + path.string());
}

inline std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::kIo, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 15]);
  }
  return out;
}

/// Provenance stamped into every pipeline output: tool version, hash of the
/// configuration and of every input file read. Contains nothing
/// time-dependent, so reruns reproduce it exactly.
struct Manifest {
  std::string config_hash;
  std::map<std::string, std::string> inputs;  // name -> sha256
  std::map<std::string, std::string> notes;

  Json ToJson() const {
    return Json{{"tool", std::string(kToolVersion)}, {"config_hash", config_hash}, {"inputs", inputs}, {"notes", notes}};
  }
  void AddInput(const std::string& name, std::string_view bytes) { inputs[name] = Sha256Hex(bytes); }
};

inline Json ParseJson(std::string_view text, const std::string& name) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(Errc::kParse, name + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

template <class F>
auto JsonGuard(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(Errc::kParse, name + ": " + e.what());
  }
}

inline Vec3 ToVec3(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::kParse, "expected [x, y, z], got " + j.dump());
  Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!IsFinite(v)) throw Error(Errc::kParse, "non-finite vector " + j.dump());
  return v;
}

inline Json FromVec3(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

inline Json PoseToJson(const Pose& p) {
  Mat4 m = p.Matrix();
  Json a = Json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) a.push_back(m(r, c));
  return a;
}

inline Pose PoseFromJson(const Json& j) {
  if (!j.is_array() || j.size() != 16) throw Error(Errc::kParse, "pose must be 16 row-major reals");
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j[r * 4 + c].get<double>();
  if (!m.allFinite()) throw Error(Errc::kParse, "pose has non-finite entries");
  if (std::abs(m(3, 0)) > 1e-9 || std::abs(m(3, 1)) > 1e-9 || std::abs(m(3, 2)) > 1e-9 || std::abs(m(3, 3) - 1.0) > 1e-9)
    throw Error(Errc::kParse, "pose bottom row must be [0, 0, 0, 1]");
  Mat3 r = m.topLeftCorner<3, 3>();
  if (OrthonormalityDrift(r) > 1e-6 || r.determinant() < 0.0)
    throw Error(Errc::kParse, "pose rotation block is not a rotation");
  return PoseFromMatrix(m);
}

// ---------------------------------------------------------------------------
// Intrinsics: {width, height, fx, fy, cx, cy, k1, k2, k3, p1, p2}

inline Json IntrinsicsToJson(const CameraIntrinsics& c) {
  return Json{{"width", c.width}, {"height", c.height}, {"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
              {"k1", c.k1},       {"k2", c.k2},         {"k3", c.k3}, {"p1", c.p1}, {"p2", c.p2}};
}

inline CameraIntrinsics IntrinsicsFromJson(const Json& j, const std::string& name = "intrinsics") {
  CameraIntrinsics c = detail::JsonGuard(name, [&] {
    CameraIntrinsics c;
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.k1 = j.value("k1", 0.0);
    c.k2 = j.value("k2", 0.0);
    c.k3 = j.value("k3", 0.0);
    c.p1 = j.value("p1", 0.0);
    c.p2 = j.value("p2", 0.0);
    return c;
  });
  c.Validate();
  return c;
}

// ---------------------------------------------------------------------------
// Poses: [{frame, t_cam_to_world: 16 reals row-major}]

using FramePoses = std::vector<std::pair<int, Pose>>;

inline Json PosesToJson(const FramePoses& poses) {
  Json a = Json::array();
  for (const auto& [frame, pose] : poses) a.push_back({{"frame", frame}, {"t_cam_to_world", PoseToJson(pose)}});
  return a;
}

inline FramePoses PosesFromJson(const Json& j, const std::string& name = "poses") {
  return detail::JsonGuard(name, [&] {
    FramePoses out;
    std::map<int, bool> seen;
    for (const auto& e : j) {
      int frame = e.at("frame").get<int>();
      if (!seen.emplace(frame, true).second)
        throw Error(Errc::kParse, name + ": duplicate frame " + std::to_string(frame));
      out.emplace_back(frame, PoseFromJson(e.at("t_cam_to_world")));
    }
    return out;
  });
}

// ---------------------------------------------------------------------------
// Correspondences: {source_id, target_id, pairs: [{src: [x,y,z], dst: [x,y,z]}]}

inline Json CorrespondencesToJson(const CorrespondenceSet& c) {
  Json pairs = Json::array();
  for (const auto& [s, d] : c.pairs) pairs.push_back({{"src", detail::FromVec3(s)}, {"dst", detail::FromVec3(d)}});
  return Json{{"source_id", c.source_id}, {"target_id", c.target_id}, {"pairs", pairs}};
}

inline CorrespondenceSet CorrespondencesFromJson(const Json& j, const std::string& name = "correspondences") {
  return detail::JsonGuard(name, [&] {
    CorrespondenceSet c;
    c.source_id = j.at("source_id").get<std::string>();
    c.target_id = j.at("target_id").get<std::string>();
    for (const auto& p : j.at("pairs")) c.pairs.emplace_back(detail::ToVec3(p.at("src")), detail::ToVec3(p.at("dst")));
    return c;
  });
}

// ---------------------------------------------------------------------------
// Marker observations:
// {spec: {rows, cols, square_size, anchor_index}, frames: [{frame, corners2d: [[u, v], ...]}]}

inline Json MarkersToJson(const std::vector<MarkerObservation>& obs) {
  if (obs.empty()) throw Error(Errc::kInvalidArgument, "no marker observations");
  const MarkerSpec& s = obs.front().spec;
  Json frames = Json::array();
  for (const auto& o : obs) {
    Json corners = Json::array();
    for (const auto& px : o.corners2d) corners.push_back({px.x(), px.y()});
    Json f{{"frame", o.frame_id}, {"corners2d", corners}};
    if (o.anchor_pixel) f["anchor_pixel"] = {o.anchor_pixel->x(), o.anchor_pixel->y()};
    frames.push_back(std::move(f));
  }
  return Json{{"spec", {{"rows", s.rows}, {"cols", s.cols}, {"square_size", s.square_size}, {"anchor_index", s.anchor_index}}},
              {"frames", frames}};
}

inline std::vector<MarkerObservation> MarkersFromJson(const Json& j, const std::string& name = "markers") {
  return detail::JsonGuard(name, [&] {
    MarkerSpec spec;
    const Json& s = j.at("spec");
    spec.rows = s.at("rows").get<int>();
    spec.cols = s.at("cols").get<int>();
    spec.square_size = s.at("square_size").get<double>();
    spec.anchor_index = s.value("anchor_index", 0);
    spec.Validate();
    std::vector<MarkerObservation> out;
    for (const auto& f : j.at("frames")) {
      MarkerObservation o;
      o.frame_id = f.at("frame").get<int>();
      o.spec = spec;
      for (const auto& c : f.at("corners2d")) {
        if (!c.is_array() || c.size() != 2) throw Error(Errc::kParse, name + ": corner must be [u, v]");
        o.corners2d.emplace_back(c[0].get<double>(), c[1].get<double>());
      }
      if (f.contains("anchor_pixel")) {
        const Json& a = f.at("anchor_pixel");
        if (!a.is_array() || a.size() != 2) throw Error(Errc::kParse, name + ": anchor_pixel must be [u, v]");
        o.anchor_pixel = Pixel(a[0].get<double>(), a[1].get<double>());
      }
      if (static_cast<int>(o.corners2d.size()) != spec.corner_count())
        throw Error(Errc::kParse, name + ": frame " + std::to_string(o.frame_id) + " has " +
                                      std::to_string(o.corners2d.size()) + " corners, expected " +
                                      std::to_string(spec.corner_count()));
      out.push_back(std::move(o));
    }
    return out;
  });
}

// ---------------------------------------------------------------------------
// Analytic field description

inline Json ShapeToJson(const Shape& s) {
  return std::visit(
      detail::Overloaded{
          [](const SpherePrim& p) {
            return Json{{"sphere", {{"center", detail::FromVec3(p.center)}, {"radius", p.radius}}}};
          },
          [](const BoxPrim& p) {
            return Json{{"box", {{"center", detail::FromVec3(p.center)}, {"half_extents", detail::FromVec3(p.half_extents)}}}};
          },
          [](const CylinderPrim& p) {
            return Json{{"cylinder",
                         {{"center", detail::FromVec3(p.center)},
                          {"axis", detail::FromVec3(p.axis)},
                          {"radius", p.radius},
                          {"half_height", p.half_height}}}};
          },
          [](const TorusPrim& p) {
            return Json{{"torus", {{"center", detail::FromVec3(p.center)}, {"major", p.major}, {"minor", p.minor}}}};
          },
          [](const CsgNode& n) {
            const char* op = n.op == CsgOp::kUnion ? "union" : n.op == CsgOp::kIntersection ? "intersection" : "difference";
            return Json{{op, Json::array({ShapeToJson(n.a), ShapeToJson(n.b)})}};
          }},
      s.node().v);
}

inline Shape ShapeFromJson(const Json& j) {
  if (!j.is_object() || j.size() != 1) throw Error(Errc::kParse, "shape must be a single-key object: " + j.dump());
  const auto& [key, v] = *j.items().begin();
  if (key == "sphere") return Shape::Sphere(detail::ToVec3(v.at("center")), v.at("radius").get<double>());
  if (key == "box") return Shape::Box(detail::ToVec3(v.at("center")), detail::ToVec3(v.at("half_extents")));
  if (key == "cylinder")
    return Shape::Cylinder(detail::ToVec3(v.at("center")), detail::ToVec3(v.at("axis")), v.at("radius").get<double>(),
                           v.at("half_height").get<double>());
  if (key == "torus")
    return Shape::Torus(detail::ToVec3(v.at("center")), v.at("major").get<double>(), v.at("minor").get<double>());
  CsgOp op;
  if (key == "union")
    op = CsgOp::kUnion;
  else if (key == "intersection")
    op = CsgOp::kIntersection;
  else if (key == "difference")
    op = CsgOp::kDifference;
  else
    throw Error(Errc::kParse, "unknown shape '" + key + "'");
  if (!v.is_array() || v.size() < 2) throw Error(Errc::kParse, key + " needs at least two operands");
  Shape acc = ShapeFromJson(v[0]);
  for (size_t i = 1; i < v.size(); ++i) acc = Shape::Combine(op, acc, ShapeFromJson(v[i]));
  return acc;
}

inline Json TextureToJson(const Texture& t) {
  return std::visit(detail::Overloaded{
                        [](const ConstantTexture& c) { return Json{{"constant", {{"color", detail::FromVec3(c.color)}}}}; },
                        [](const CheckerTexture& c) {
                          return Json{{"checker", {{"a", detail::FromVec3(c.a)}, {"b", detail::FromVec3(c.b)}, {"period", c.period}}}};
                        },
                        [](const GradientTexture& g) {
                          return Json{{"gradient", {{"a", detail::FromVec3(g.a)}, {"b", detail::FromVec3(g.b)}, {"axis", detail::FromVec3(g.axis)}}}};
                        }},
                    t);
}

inline Texture TextureFromJson(const Json& j) {
  if (!j.is_object() || j.size() != 1) throw Error(Errc::kParse, "texture must be a single-key object");
  const auto& [key, v] = *j.items().begin();
  if (key == "constant") return ConstantTexture{detail::ToVec3(v.at("color"))};
  if (key == "checker") return CheckerTexture{detail::ToVec3(v.at("a")), detail::ToVec3(v.at("b")), v.at("period").get<double>()};
  if (key == "gradient") return GradientTexture{detail::ToVec3(v.at("a")), detail::ToVec3(v.at("b")), detail::ToVec3(v.at("axis"))};
  throw Error(Errc::kParse, "unknown texture '" + key + "'");
}

inline Json AnalyticFieldToJson(const AnalyticField& f) {
  return Json{{"shape", ShapeToJson(f.shape())}, {"texture", TextureToJson(f.texture())}, {"view_gain", f.view_gain()}};
}

inline AnalyticField AnalyticFieldFromJson(const Json& j, const std::string& name = "analytic field") {
  return detail::JsonGuard(name, [&] {
    Texture tex = j.contains("texture") ? TextureFromJson(j.at("texture")) : Texture{ConstantTexture{}};
    return AnalyticField(ShapeFromJson(j.at("shape")), tex, j.value("view_gain", 0.0));
  });
}

// ---------------------------------------------------------------------------
// Grid field: "VGRD", u32 version = 1, u32 nx, ny, nz, 6 x f64 bbox
// (min xyz, max xyz), nx*ny*nz f32 scalars (x fastest), same-order rgb u8.

inline constexpr uint32_t kGridVersion = 1;

namespace detail {

inline uint8_t ToByte(double v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string name) : data_(data), name_(std::move(name)) {}

  template <class T>
  T Read(const char* what) {
    Need(sizeof(T), what);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void Need(size_t n, const char* what) const {
    if (data_.size() - pos_ < n)
      throw Error(Errc::kParse, name_ + ": truncated at byte offset " + std::to_string(data_.size()) + " reading " +
                                    what + " (needs " + std::to_string(n) + " bytes from offset " +
                                    std::to_string(pos_) + ")");
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  const std::string& name() const { return name_; }

 private:
  std::string_view data_;
  std::string name_;
  size_t pos_ = 0;
};

template <class T>
void Put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace detail

inline std::string EncodeGrid(const GridField& g) {
  std::string out = "VGRD";
  detail::Put<uint32_t>(out, kGridVersion);
  for (int d : g.dims()) detail::Put<uint32_t>(out, static_cast<uint32_t>(d));
  const Aabb b = g.Bounds();
  for (int a = 0; a < 3; ++a) detail::Put<double>(out, b.min[a]);
  for (int a = 0; a < 3; ++a) detail::Put<double>(out, b.max[a]);
  for (double s : g.scalars()) detail::Put<float>(out, static_cast<float>(s));
  for (const Rgb& c : g.colors())
    for (int k = 0; k < 3; ++k) out.push_back(static_cast<char>(detail::ToByte(c[k])));
  return out;
}

inline GridField DecodeGrid(std::string_view data, const std::string& name = "grid") {
  detail::ByteReader r(data, name);
  r.Need(4, "magic");
  if (data.substr(0, 4) != "VGRD") throw Error(Errc::kParse, name + ": bad magic at byte offset 0");
  r.Read<uint32_t>("magic");
  const uint32_t version = r.Read<uint32_t>("version");
  if (version != kGridVersion)
    throw Error(Errc::kParse, name + ": unsupported version " + std::to_string(version) + " at byte offset 4");
  std::array<int, 3> dims;
  for (auto& d : dims) {
    uint32_t v = r.Read<uint32_t>("dims");
    if (v < 2 || v > (1u << 16)) throw Error(Errc::kParse, name + ": bad grid dimension " + std::to_string(v));
    d = static_cast<int>(v);
  }
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) lo[a] = r.Read<double>("bbox");
  for (int a = 0; a < 3; ++a) hi[a] = r.Read<double>("bbox");
  const size_t n = static_cast<size_t>(dims[0]) * dims[1] * dims[2];
  r.Need(n * sizeof(float), "scalars");
  std::vector<double> scalars(n);
  for (size_t i = 0; i < n; ++i) scalars[i] = r.Read<float>("scalars");
  r.Need(n * 3, "colors");
  std::vector<Rgb> colors(n);
  for (size_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) colors[i][k] = r.Read<uint8_t>("colors") / 255.0;
  if (r.remaining() != 0)
    throw Error(Errc::kParse, name + ": " + std::to_string(r.remaining()) + " trailing bytes at byte offset " +
                                  std::to_string(r.pos()));
  return GridField(dims, Aabb(lo, hi), std::move(scalars), std::move(colors));
}

// ---------------------------------------------------------------------------
// Mesh: binary little-endian PLY with float x/y/z, float nx/ny/nz, uchar
// red/green/blue (normals and colors only when present) and uint triangle
// index lists. Manifest lines ride along as PLY comments.

inline std::string EncodePly(const TriangleMesh& m, const std::vector<std::string>& comments = {}) {
  const bool normals = m.has_normals(), colors = m.has_colors();
  std::string out = "ply\nformat binary_little_endian 1.0\n";
  for (const auto& c : comments) {
    if (c.find('\n') != std::string::npos) throw Error(Errc::kInvalidArgument, "PLY comment contains a newline");
    out += "comment " + c + "\n";
  }
  out += "element vertex " + std::to_string(m.vertices.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  if (normals) out += "property float nx\nproperty float ny\nproperty float nz\n";
  if (colors) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "element face " + std::to_string(m.faces.size()) + "\n";
  out += "property list uchar uint vertex_indices\nend_header\n";
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) detail::Put<float>(out, static_cast<float>(m.vertices[i][k]));
    if (normals)
      for (int k = 0; k < 3; ++k) detail::Put<float>(out, static_cast<float>(m.normals[i][k]));
    if (colors)
      for (int k = 0; k < 3; ++k) out.push_back(static_cast<char>(detail::ToByte(m.colors[i][k])));
  }
  for (const auto& f : m.faces) {
    out.push_back(3);
    for (uint32_t v : f) detail::Put<uint32_t>(out, v);
  }
  return out;
}

struct PlyFile {
  TriangleMesh mesh;
  std::vector<std::string> comments;
};

namespace detail {

enum class PlyType { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

inline PlyType ParsePlyType(const std::string& t, const std::string& name) {
  if (t == "char" || t == "int8") return PlyType::kI8;
  if (t == "uchar" || t == "uint8") return PlyType::kU8;
  if (t == "short" || t == "int16") return PlyType::kI16;
  if (t == "ushort" || t == "uint16") return PlyType::kU16;
  if (t == "int" || t == "int32") return PlyType::kI32;
  if (t == "uint" || t == "uint32") return PlyType::kU32;
  if (t == "float" || t == "float32") return PlyType::kF32;
  if (t == "double" || t == "float64") return PlyType::kF64;
  throw Error(Errc::kParse, name + ": unknown PLY type '" + t + "'");
}

inline double ReadPly(ByteReader& r, PlyType t) {
  switch (t) {
    case PlyType::kI8: return r.Read<int8_t>("vertex data");
    case PlyType::kU8: return r.Read<uint8_t>("vertex data");
    case PlyType::kI16: return r.Read<int16_t>("vertex data");
    case PlyType::kU16: return r.Read<uint16_t>("vertex data");
    case PlyType::kI32: return r.Read<int32_t>("vertex data");
    case PlyType::kU32: return r.Read<uint32_t>("vertex data");
    case PlyType::kF32: return r.Read<float>("vertex data");
    case PlyType::kF64: return r.Read<double>("vertex data");
  }
  return 0.0;
}

}  // namespace detail

inline PlyFile DecodePly(std::string_view data, const std::string& name = "mesh") {
  const size_t header_end = data.find("end_header\n");
  if (data.substr(0, 4) != "ply\n" || header_end == std::string_view::npos)
    throw Error(Errc::kParse, name + ": not a PLY file");
  std::istringstream header(std::string(data.substr(0, header_end)));
  PlyFile out;
  size_t vertex_count = 0, face_count = 0;
  std::vector<std::pair<std::string, detail::PlyType>> vprops;
  detail::PlyType list_count = detail::PlyType::kU8, list_index = detail::PlyType::kU32;
  std::string line, current;
  std::vector<std::string> element_order;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "ply" || kw.empty()) continue;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw Error(Errc::kParse, name + ": only binary_little_endian PLY is supported");
    } else if (kw == "comment") {
      out.comments.push_back(line.size() > 8 ? line.substr(8) : "");
    } else if (kw == "element") {
      size_t count;
      ls >> current >> count;
      element_order.push_back(current);
      if (current == "vertex") vertex_count = count;
      else if (current == "face") face_count = count;
      else throw Error(Errc::kParse, name + ": unsupported element '" + current + "'");
    } else if (kw == "property") {
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it, pname;
        ls >> ct >> it >> pname;
        if (current != "face") throw Error(Errc::kParse, name + ": list property outside face element");
        list_count = detail::ParsePlyType(ct, name);
        list_index = detail::ParsePlyType(it, name);
      } else {
        std::string pname;
        ls >> pname;
        if (current != "vertex") throw Error(Errc::kParse, name + ": scalar property '" + pname + "' on face element");
        vprops.emplace_back(pname, detail::ParsePlyType(type, name));
      }
    } else {
      throw Error(Errc::kParse, name + ": unexpected header line '" + line + "'");
    }
  }
  if (element_order.size() == 2 && element_order[0] != "vertex")
    throw Error(Errc::kParse, name + ": vertex element must precede faces");

  detail::ByteReader r(data.substr(header_end + 11), name + " (payload)");
  auto slot = [&](const char* p) {
    for (size_t i = 0; i < vprops.size(); ++i)
      if (vprops[i].first == p) return static_cast<int>(i);
    return -1;
  };
  const int ix = slot("x"), iy = slot("y"), iz = slot("z");
  const int inx = slot("nx"), iny = slot("ny"), inz = slot("nz");
  const int ir = slot("red"), ig = slot("green"), ib = slot("blue");
  if (ix < 0 || iy < 0 || iz < 0) throw Error(Errc::kParse, name + ": vertex element lacks x/y/z");
  const bool normals = inx >= 0 && iny >= 0 && inz >= 0;
  const bool colors = ir >= 0 && ig >= 0 && ib >= 0;
  std::vector<double> vals(vprops.size());
  TriangleMesh& m = out.mesh;
  m.vertices.reserve(vertex_count);
  bool any_normal = false;
  for (size_t i = 0; i < vertex_count; ++i) {
    for (size_t k = 0; k < vprops.size(); ++k) vals[k] = detail::ReadPly(r, vprops[k].second);
    m.vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
    if (normals) {
      Vec3 n(vals[inx], vals[iny], vals[inz]);
      double len = n.norm();
      any_normal = any_normal || len > 0.0;
      m.normals.push_back(len > 0.0 ? Vec3(n / len) : n);
    }
    if (colors) m.colors.emplace_back(vals[ir] / 255.0, vals[ig] / 255.0, vals[ib] / 255.0);
  }
  if (normals && !any_normal) m.normals.clear();
  m.faces.reserve(face_count);
  for (size_t i = 0; i < face_count; ++i) {
    const double count = detail::ReadPly(r, list_count);
    if (count != 3.0) throw Error(Errc::kParse, name + ": face " + std::to_string(i) + " is not a triangle");
    Face f;
    for (auto& v : f) {
      double idx = detail::ReadPly(r, list_index);
      if (idx < 0 || idx >= static_cast<double>(vertex_count))
        throw Error(Errc::kParse, name + ": face " + std::to_string(i) + " index out of range");
      v = static_cast<uint32_t>(idx);
    }
    m.faces.push_back(f);
  }
  if (r.remaining() != 0) throw Error(Errc::kParse, name + ": trailing bytes after faces");
  return out;
}

// ---------------------------------------------------------------------------
// Images: binary PPM (P6), 8 bits per channel.

inline std::string EncodePpm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.size() * 3);
  for (const Rgb& p : img.pixels)
    for (int k = 0; k < 3; ++k) out.push_back(static_cast<char>(detail::ToByte(p[k])));
  return out;
}

inline Image DecodePpm(std::string_view data, const std::string& name = "image") {
  size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
      if (pos < data.size() && data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return std::string(data.substr(start, pos - start));
  };
  if (token() != "P6") throw Error(Errc::kParse, name + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw Error(Errc::kParse, name + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(Errc::kParse, name + ": unsupported PPM geometry or depth");
  ++pos;  // single whitespace after maxval
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (data.size() < pos + need)
    throw Error(Errc::kParse, name + ": truncated at byte offset " + std::to_string(data.size()));
  Image img(w, h);
  for (size_t i = 0; i < img.size(); ++i)
    for (int k = 0; k < 3; ++k) img.pixels[i][k] = static_cast<uint8_t>(data[pos + 3 * i + k]) / 255.0;
  return img;
}

// ---------------------------------------------------------------------------
// Metrics report: header row, one row per frame, an aggregate row.

inline std::string FormatReal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string EncodeMetricsCsv(const EvalReport& r, const std::string& manifest_json = "") {
  std::string out;
  if (!manifest_json.empty()) out += "# manifest " + manifest_json + "\n";
  if (!r.excluded.empty()) {
    out += "# excluded";
    for (int f : r.excluded) out += " " + std::to_string(f);
    out += "\n";
  }
  out += "frame_id,mae,rmse,psnr\n";
  for (const auto& f : r.per_frame)
    out += std::to_string(f.frame_id) + "," + FormatReal(f.metrics.mae) + "," + FormatReal(f.metrics.rmse) + "," +
           FormatReal(f.metrics.psnr) + "\n";
  out += "aggregate," + FormatReal(r.aggregate.mae) + "," + FormatReal(r.aggregate.rmse) + "," +
         FormatReal(r.aggregate.psnr) + "\n";
  return out;
}

}  // namespace meshforge
