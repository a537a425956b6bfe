/*
 * Copyright 2026 The dfc Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dfc/manifest.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dfc/error.h"

namespace dfc {

using nlohmann::json;
using nlohmann::ordered_json;

bool ObjectRecord::has_function(const std::string& function) const {
  return std::find(functions.begin(), functions.end(), function) != functions.end();
}

std::size_t Manifest::object_index(const std::string& object_id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].object_id == object_id) return i;
  }
  fail(ErrorCode::kNotFound, "unknown object_id '" + object_id + "'");
}

const ObjectRecord& Manifest::object(const std::string& object_id) const {
  return objects[object_index(object_id)];
}

namespace {

ordered_json transform_to_json(const RigidTransform& t) { return t.to_row_major(); }

RigidTransform transform_from_json(const json& j) {
  require(j.is_array() && j.size() == 16, ErrorCode::kInvalidArgument,
          "transform must be 16 numbers in row-major order");
  return RigidTransform::from_row_major(j.get<std::array<double, 16>>());
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& context) {
  require(j.contains(key), ErrorCode::kInvalidArgument,
          context + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, context + ": field '" + key + "': " + e.what());
  }
}

bool is_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  return in.read(magic, 4) && std::equal(magic, magic + 4, "DFTC");
}

void check_path(const Manifest& m, const std::string& rel, const std::string& object_id,
                const std::string& what) {
  require(!rel.empty(), ErrorCode::kNotFound,
          "object_id '" + object_id + "': empty path for " + what);
  const auto full = m.resolve(rel);
  require(is_tensor_file(full), ErrorCode::kNotFound,
          "object_id '" + object_id + "': dangling path for " + what + ": " + full.string());
}

}  // namespace

ordered_json obb_to_json(const Obb& obb) {
  ordered_json j;
  j["center"] = {obb.center.x(), obb.center.y(), obb.center.z()};
  j["half_extents"] = {obb.half_extents.x(), obb.half_extents.y(), obb.half_extents.z()};
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(obb.rotation(r, c));
  j["rotation"] = rot;
  return j;
}

Obb obb_from_json(const json& j) {
  const auto center = get_field<std::array<double, 3>>(j, "center", "obb");
  const auto half = get_field<std::array<double, 3>>(j, "half_extents", "obb");
  const auto rot = get_field<std::array<double, 9>>(j, "rotation", "obb");
  Obb obb;
  obb.center = Vec3(center[0], center[1], center[2]);
  obb.half_extents = Vec3(half[0], half[1], half[2]);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) obb.rotation(r, c) = rot[r * 3 + c];
  obb.validate();
  return obb;
}

ordered_json camera_to_json(const Camera& camera) {
  ordered_json j;
  j["fx"] = camera.fx;
  j["fy"] = camera.fy;
  j["cx"] = camera.cx;
  j["cy"] = camera.cy;
  j["width"] = camera.width;
  j["height"] = camera.height;
  j["world_to_cam"] = transform_to_json(camera.world_to_cam);
  return j;
}

Camera camera_from_json(const json& j) {
  Camera cam;
  cam.fx = get_field<double>(j, "fx", "camera");
  cam.fy = get_field<double>(j, "fy", "camera");
  cam.cx = get_field<double>(j, "cx", "camera");
  cam.cy = get_field<double>(j, "cy", "camera");
  cam.width = get_field<int>(j, "width", "camera");
  cam.height = get_field<int>(j, "height", "camera");
  require(j.contains("world_to_cam"), ErrorCode::kInvalidArgument, "camera: missing world_to_cam");
  cam.world_to_cam = transform_from_json(j["world_to_cam"]);
  cam.validate();
  return cam;
}

ordered_json manifest_to_json(const Manifest& m) {
  ordered_json j;
  j["version"] = m.version;
  j["image_size"] = {m.image_height, m.image_width};
  j["stride"] = m.stride;
  ordered_json fns = ordered_json::object();
  for (const auto& [name, path] : m.function_embeddings) fns[name] = path;
  j["function_embeddings"] = fns;
  ordered_json objects = ordered_json::array();
  for (const auto& o : m.objects) {
    ordered_json jo;
    jo["object_id"] = o.object_id;
    jo["category"] = o.category;
    if (!o.kind.empty()) jo["kind"] = o.kind;
    jo["functions"] = o.functions;
    jo["object_to_world"] = transform_to_json(o.object_to_world);
    if (o.mesh) jo["mesh"] = {{"vertices", o.mesh->vertices}, {"faces", o.mesh->faces}};
    ordered_json parts = ordered_json::object();
    for (const auto& [fn, obb] : o.parts) parts[fn] = obb_to_json(obb);
    jo["parts"] = parts;
    ordered_json views = ordered_json::array();
    for (const auto& v : o.views) {
      ordered_json jv;
      if (!v.image.empty()) jv["image"] = v.image;
      jv["depth"] = v.depth;
      jv["object_mask"] = v.object_mask;
      ordered_json pm = ordered_json::object();
      for (const auto& [fn, path] : v.part_masks) pm[fn] = path;
      jv["part_masks"] = pm;
      jv["features"] = v.features;
      jv["camera"] = camera_to_json(v.camera);
      views.push_back(std::move(jv));
    }
    jo["views"] = std::move(views);
    objects.push_back(std::move(jo));
  }
  j["objects"] = std::move(objects);
  ordered_json aligns = ordered_json::array();
  for (const auto& a : m.alignments) {
    ordered_json ja;
    ja["object_id_a"] = a.object_id_a;
    ja["object_id_b"] = a.object_id_b;
    ja["function"] = a.function;
    ja["transform"] = transform_to_json(a.transform);
    ja["obb_a"] = obb_to_json(a.obb_a);
    ja["obb_b"] = obb_to_json(a.obb_b);
    aligns.push_back(std::move(ja));
  }
  j["alignments"] = std::move(aligns);
  return j;
}

Manifest manifest_from_json(const json& j, const std::filesystem::path& base_dir) {
  require(j.is_object(), ErrorCode::kInvalidArgument, "manifest must be a JSON object");
  Manifest m;
  m.base_dir = base_dir;
  m.version = get_field<int>(j, "version", "manifest");
  require(m.version == kManifestVersion, ErrorCode::kUnsupportedVersion,
          "unsupported manifest version " + std::to_string(m.version));
  const auto size = get_field<std::array<int, 2>>(j, "image_size", "manifest");
  m.image_height = size[0];
  m.image_width = size[1];
  m.stride = get_field<int>(j, "stride", "manifest");
  if (j.contains("function_embeddings")) {
    m.function_embeddings =
        get_field<std::map<std::string, std::string>>(j, "function_embeddings", "manifest");
  }
  for (const auto& jo : get_field<json>(j, "objects", "manifest")) {
    ObjectRecord o;
    o.object_id = get_field<std::string>(jo, "object_id", "object");
    const std::string ctx = "object_id '" + o.object_id + "'";
    o.category = jo.value("category", std::string());
    o.kind = jo.value("kind", std::string());
    o.functions = get_field<std::vector<std::string>>(jo, "functions", ctx);
    o.object_to_world = jo.contains("object_to_world") ? transform_from_json(jo["object_to_world"])
                                                       : RigidTransform::identity();
    if (jo.contains("mesh")) {
      o.mesh = MeshRecord{get_field<std::string>(jo["mesh"], "vertices", ctx + " mesh"),
                          get_field<std::string>(jo["mesh"], "faces", ctx + " mesh")};
    }
    if (jo.contains("parts")) {
      for (const auto& [fn, jb] : jo["parts"].items()) o.parts[fn] = obb_from_json(jb);
    }
    for (const auto& jv : get_field<json>(jo, "views", ctx)) {
      ViewRecord v;
      v.image = jv.value("image", std::string());
      v.depth = get_field<std::string>(jv, "depth", ctx + " view");
      v.object_mask = get_field<std::string>(jv, "object_mask", ctx + " view");
      if (jv.contains("part_masks")) {
        v.part_masks = jv["part_masks"].get<std::map<std::string, std::string>>();
      }
      v.features = get_field<std::string>(jv, "features", ctx + " view");
      require(jv.contains("camera"), ErrorCode::kInvalidArgument, ctx + ": view without camera");
      v.camera = camera_from_json(jv["camera"]);
      o.views.push_back(std::move(v));
    }
    m.objects.push_back(std::move(o));
  }
  if (j.contains("alignments")) {
    for (const auto& ja : j["alignments"]) {
      AlignmentRecord a;
      a.object_id_a = get_field<std::string>(ja, "object_id_a", "alignment");
      a.object_id_b = get_field<std::string>(ja, "object_id_b", "alignment");
      a.function = get_field<std::string>(ja, "function", "alignment");
      require(ja.contains("transform"), ErrorCode::kInvalidArgument, "alignment: missing transform");
      a.transform = transform_from_json(ja["transform"]);
      a.obb_a = obb_from_json(get_field<json>(ja, "obb_a", "alignment"));
      a.obb_b = obb_from_json(get_field<json>(ja, "obb_b", "alignment"));
      m.alignments.push_back(std::move(a));
    }
  }
  return m;
}

void validate_manifest(const Manifest& m, bool check_files) {
  require(m.image_height > 0 && m.image_width > 0 && m.stride > 0, ErrorCode::kInvalidArgument,
          "manifest image size and stride must be positive");
  require(m.image_height % m.stride == 0 && m.image_width % m.stride == 0,
          ErrorCode::kInvalidArgument, "manifest image size must be a multiple of the stride");
  std::set<std::string> ids;
  for (const auto& o : m.objects) {
    const std::string ctx = "object_id '" + o.object_id + "'";
    require(!o.object_id.empty(), ErrorCode::kInvalidArgument, "object with empty object_id");
    require(ids.insert(o.object_id).second, ErrorCode::kInvalidArgument,
            "duplicate " + ctx);
    for (const auto& [fn, obb] : o.parts) {
      require(o.has_function(fn), ErrorCode::kInvalidArgument,
              ctx + ": part box for undeclared function '" + fn + "'");
    }
    for (std::size_t vi = 0; vi < o.views.size(); ++vi) {
      const auto& v = o.views[vi];
      require(v.camera.width == m.image_width && v.camera.height == m.image_height,
              ErrorCode::kShapeMismatch,
              ctx + ": view " + std::to_string(vi) + " camera size differs from manifest");
      for (const auto& [fn, path] : v.part_masks) {
        require(o.has_function(fn), ErrorCode::kInvalidArgument,
                ctx + ": part mask for undeclared function '" + fn + "'");
      }
      if (!check_files) continue;
      const std::string where = "view " + std::to_string(vi);
      if (!v.image.empty()) {
        require(std::filesystem::is_regular_file(m.resolve(v.image)), ErrorCode::kNotFound,
                ctx + ": dangling path for " + where + " image: " + m.resolve(v.image).string());
      }
      check_path(m, v.depth, o.object_id, where + " depth");
      check_path(m, v.object_mask, o.object_id, where + " object_mask");
      check_path(m, v.features, o.object_id, where + " features");
      for (const auto& [fn, path] : v.part_masks) {
        check_path(m, path, o.object_id, where + " part mask '" + fn + "'");
      }
    }
    if (check_files && o.mesh) {
      check_path(m, o.mesh->vertices, o.object_id, "mesh vertices");
      check_path(m, o.mesh->faces, o.object_id, "mesh faces");
    }
  }
  for (const auto& a : m.alignments) {
    const auto& oa = m.object(a.object_id_a);
    const auto& ob = m.object(a.object_id_b);
    require(oa.has_function(a.function) && ob.has_function(a.function),
            ErrorCode::kInvalidArgument,
            "alignment " + a.object_id_a + "/" + a.object_id_b + " references function '" +
                a.function + "' not shared by both objects");
  }
  if (check_files) {
    for (const auto& [name, path] : m.function_embeddings) {
      require(is_tensor_file(m.resolve(path)), ErrorCode::kNotFound,
              "function embedding '" + name + "': dangling path " + m.resolve(path).string());
    }
  }
}

Manifest read_manifest(const std::filesystem::path& path, bool check_files) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  Manifest m = manifest_from_json(j, path.parent_path());
  validate_manifest(m, check_files);
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  write_text_file(path, manifest_to_json(manifest).dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dfc
