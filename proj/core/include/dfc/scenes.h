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

#ifndef DFC_SCENES_H_
#define DFC_SCENES_H_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dfc/camera.h"
#include "dfc/image.h"

namespace dfc {

// Oriented bounding box. Columns of `rotation` are the box axes expressed in
// the object frame.
struct Obb {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
  Mat3 rotation = Mat3::Identity();

  Vec3 to_local(const Vec3& p) const { return rotation.transpose() * (p - center); }
  bool contains(const Vec3& p) const;
  // Transform taking object-frame points into the box frame.
  RigidTransform object_to_local() const;
  void validate() const;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  bool empty() const { return faces.empty(); }
  double face_area(std::size_t f) const;
  void add_box(const Vec3& center, const Vec3& half_extents, const Mat3& rotation = Mat3::Identity());
  // Capped cylinder: 2*segments side triangles plus a fan of `segments`
  // triangles per cap.
  void add_cylinder(const Vec3& base, const Vec3& axis, double radius, double length, int segments);
};

enum class ObjectKind { kBox, kCylinder, kCompositeSpout, kCompositeHandle };

std::string object_kind_name(ObjectKind kind);
ObjectKind object_kind_from_name(const std::string& name);

// Geometry parameters in meters. Ranges are enforced by make_object:
//   sizes, radius, height in [0.01, 2]; part_length, part_radius in [0.005, 1];
//   segments in [3, 256]; part_elevation in [0.1, 0.9]; part_tilt_deg in [0, 80].
struct ObjectParams {
  Vec3 box_size = Vec3(0.2, 0.2, 0.2);
  double radius = 0.08;
  double height = 0.2;
  int segments = 16;
  bool box_body = false;
  double part_length = 0.1;
  double part_radius = 0.015;
  double part_elevation = 0.6;
  double part_tilt_deg = 40.0;
  std::string part_function = "";
};

struct ParametricObject {
  ObjectKind kind = ObjectKind::kBox;
  Mesh mesh;
  std::map<std::string, Obb> part_regions;
  std::uint64_t surface_field_seed = 0;
};

// Deterministic in (kind, params, seed). Composite kinds label their part
// under params.part_function (default "pour-with" for spouts and "lift-with"
// for handles).
ParametricObject make_object(ObjectKind kind, const ObjectParams& params, std::uint64_t seed);

struct RasterOutput {
  DepthMap depth;  // camera-frame z in meters, 0 where empty
  Mask object_mask;
  std::map<std::string, Mask> part_masks;
};

// True when the world-frame point lies inside `obb` (given in object frame).
bool point_in_part(const Vec3& world_point, const Obb& obb, const RigidTransform& object_to_world);

// Scalar z-buffer rasterization at pixel centers without anti-aliasing.
// Triangles with any vertex at or behind the image plane are skipped.
RasterOutput rasterize(const ParametricObject& obj, const Camera& cam,
                       const RigidTransform& object_to_world = RigidTransform::identity());

// Nearest ray/mesh intersection through a sub-pixel location (world frame).
std::optional<Vec3> cast_ray(const Mesh& mesh, const RigidTransform& object_to_world,
                             const Camera& cam, double row, double col);

// Look-at camera positioned at spherical coordinates around `target`, world
// +z up.
Camera orbit_camera(const Vec3& target, double distance, double azimuth_rad,
                    double elevation_rad, double focal, int image_size);

inline constexpr int kNumFeatureBlocks = 3;
inline constexpr int kDefaultPatchStride = 14;

// Stack of three backbone-like feature planes plus the masks of one view.
struct FeatureGrid {
  int grid_h = 0;
  int grid_w = 0;
  int channels = 0;
  int stride = kDefaultPatchStride;
  int image_height = 0;
  int image_width = 0;
  // blocks[b][(r * grid_w + c) * channels + ch]
  std::array<std::vector<float>, kNumFeatureBlocks> blocks;
  Mask object_mask;
  std::map<std::string, Mask> part_masks;

  const float* cell(int block, int r, int c) const {
    return blocks[block].data() + (static_cast<std::size_t>(r) * grid_w + c) * channels;
  }
  void validate() const;
};

// f32 tensor of shape [3, grid_h, grid_w, C].
Tensor feature_planes_to_tensor(const FeatureGrid& grid);
void feature_planes_from_tensor(const Tensor& tensor, FeatureGrid& grid);

// Smooth, seeded sinusoidal fields standing in for backbone features. Each
// block mixes a dataset-wide field evaluated in the functional-part frame
// (shared across objects) with an instance field evaluated in the object
// frame (seeded by ParametricObject::surface_field_seed). Later blocks weight
// the shared field more heavily.
struct FeatureFieldConfig {
  int channels = 32;
  std::uint64_t seed = 0;
  double frequency = 20.0;  // rad/m, mean angular frequency
  int terms = 3;
  std::array<double, kNumFeatureBlocks> shared_weight = {0.3, 0.7, 1.0};
  std::array<double, kNumFeatureBlocks> instance_weight = {1.0, 0.7, 0.4};
};

class FeatureField {
 public:
  FeatureField(const FeatureFieldConfig& config, std::uint64_t instance_seed);

  // Field value for an object-frame surface point. `part_frame` maps the
  // object frame into the canonical functional-part frame.
  std::array<std::vector<float>, kNumFeatureBlocks> evaluate(const Vec3& object_point,
                                                             const RigidTransform& part_frame) const;
  int channels() const { return config_.channels; }

 private:
  struct Wave {
    Vec3 omega;
    double phase;
  };
  // waves_[field][block][channel * terms + t]; field 0 shared, 1 instance
  FeatureFieldConfig config_;
  std::array<std::array<std::vector<Wave>, kNumFeatureBlocks>, 2> waves_;
};

// Canonical frame used by the shared feature component: the box frame of the
// object's first part region, or identity when it has none.
RigidTransform canonical_part_frame(const ParametricObject& obj);

// One feature cell per stride x stride patch; each cell samples the field at
// the surface point seen through the cell center. Background cells get a
// per-image random constant vector drawn from `image_seed`.
FeatureGrid procedural_features(const ParametricObject& obj, const Camera& cam,
                                const RasterOutput& raster, const FeatureFieldConfig& config,
                                std::uint64_t image_seed, int stride = kDefaultPatchStride,
                                const RigidTransform& object_to_world = RigidTransform::identity());

}  // namespace dfc

#endif  // DFC_SCENES_H_
