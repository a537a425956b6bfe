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

#ifndef DFC_MANIFEST_H_
#define DFC_MANIFEST_H_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfc/camera.h"
#include "dfc/scenes.h"

namespace dfc {

inline constexpr int kManifestVersion = 1;

// All paths are relative to the directory holding the manifest file.
struct ViewRecord {
  std::string image;  // optional, empty when absent
  std::string depth;
  std::string object_mask;
  std::map<std::string, std::string> part_masks;  // function -> path
  std::string features;
  Camera camera;
};

struct MeshRecord {
  std::string vertices;  // f64 [V, 3]
  std::string faces;     // i64 [F, 3]
};

struct ObjectRecord {
  std::string object_id;
  std::string category;
  std::string kind;  // optional generator kind
  std::vector<std::string> functions;
  RigidTransform object_to_world;
  std::optional<MeshRecord> mesh;
  std::map<std::string, Obb> parts;  // function -> part box, object frame
  std::vector<ViewRecord> views;

  bool has_function(const std::string& function) const;
};

struct AlignmentRecord {
  std::string object_id_a;
  std::string object_id_b;
  std::string function;
  RigidTransform transform;  // object B frame -> object A frame
  Obb obb_a;
  Obb obb_b;
};

struct Manifest {
  int version = kManifestVersion;
  int image_height = 224;
  int image_width = 224;
  int stride = kDefaultPatchStride;
  std::map<std::string, std::string> function_embeddings;  // name -> f32 [T]
  std::vector<ObjectRecord> objects;
  std::vector<AlignmentRecord> alignments;
  std::filesystem::path base_dir;  // not serialized

  const ObjectRecord& object(const std::string& object_id) const;
  std::size_t object_index(const std::string& object_id) const;
  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
};

nlohmann::ordered_json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& json, const std::filesystem::path& base_dir);

// Structural checks plus, when `check_files` is set, that every referenced
// path opens as a tensor file. Errors name the offending object_id.
void validate_manifest(const Manifest& manifest, bool check_files = true);

Manifest read_manifest(const std::filesystem::path& path, bool check_files = true);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

nlohmann::ordered_json obb_to_json(const Obb& obb);
Obb obb_from_json(const nlohmann::json& json);
nlohmann::ordered_json camera_to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& json);

// Writes `text` to `path` creating parent directories; throws kIo on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace dfc

#endif  // DFC_MANIFEST_H_
