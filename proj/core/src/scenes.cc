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

#include "dfc/scenes.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dfc/random.h"

namespace dfc {

namespace {

constexpr double kMinTriangleArea = 1e-12;

void check_range(double v, double lo, double hi, const char* name) {
  require(std::isfinite(v) && v >= lo && v <= hi, ErrorCode::kOutOfRange,
          std::string(name) + " = " + std::to_string(v) + " outside [" + std::to_string(lo) +
              ", " + std::to_string(hi) + "]");
}

Mat3 basis_from_axis(const Vec3& axis) {
  const Vec3 a = axis.normalized();
  const Vec3 helper = std::abs(a.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 u = helper.cross(a).normalized();
  const Vec3 v = a.cross(u);
  Mat3 m;
  m.col(0) = u;
  m.col(1) = v;
  m.col(2) = a;
  return m;
}

}  // namespace

bool Obb::contains(const Vec3& p) const {
  const Vec3 local = to_local(p);
  return std::abs(local.x()) <= half_extents.x() && std::abs(local.y()) <= half_extents.y() &&
         std::abs(local.z()) <= half_extents.z();
}

RigidTransform Obb::object_to_local() const {
  const Mat3 rt = rotation.transpose();
  return RigidTransform(rt, -rt * center);
}

void Obb::validate() const {
  require(center.allFinite() && half_extents.allFinite(), ErrorCode::kNonFinite,
          "OBB has non-finite entries");
  require((half_extents.array() > 0.0).all(), ErrorCode::kInvalidArgument,
          "OBB half extents must be > 0");
  RigidTransform(rotation, center);  // validates orthonormality
}

double Mesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

void Mesh::add_box(const Vec3& center, const Vec3& half, const Mat3& rotation) {
  const int base = static_cast<int>(vertices.size());
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner((i & 1) ? half.x() : -half.x(), (i & 2) ? half.y() : -half.y(),
                      (i & 4) ? half.z() : -half.z());
    vertices.push_back(center + rotation * corner);
  }
  static constexpr int kQuads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                       {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : kQuads) {
    faces.push_back({base + q[0], base + q[1], base + q[2]});
    faces.push_back({base + q[0], base + q[2], base + q[3]});
  }
}

void Mesh::add_cylinder(const Vec3& base, const Vec3& axis, double radius, double length,
                        int segments) {
  const Mat3 frame = basis_from_axis(axis);
  const Vec3 a = frame.col(2);
  const int first = static_cast<int>(vertices.size());
  for (int ring = 0; ring < 2; ++ring) {
    for (int s = 0; s < segments; ++s) {
      const double theta = 2.0 * std::numbers::pi * s / segments;
      vertices.push_back(base + ring * length * a +
                         radius * (std::cos(theta) * frame.col(0) + std::sin(theta) * frame.col(1)));
    }
  }
  const int bottom_center = static_cast<int>(vertices.size());
  vertices.push_back(base);
  const int top_center = bottom_center + 1;
  vertices.push_back(base + length * a);
  for (int s = 0; s < segments; ++s) {
    const int s1 = (s + 1) % segments;
    const int b0 = first + s, b1 = first + s1;
    const int t0 = first + segments + s, t1 = first + segments + s1;
    faces.push_back({b0, b1, t1});
    faces.push_back({b0, t1, t0});
    faces.push_back({bottom_center, b1, b0});
    faces.push_back({top_center, t0, t1});
  }
}

std::string object_kind_name(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::kBox: return "box";
    case ObjectKind::kCylinder: return "cylinder";
    case ObjectKind::kCompositeSpout: return "composite_spout";
    case ObjectKind::kCompositeHandle: return "composite_handle";
  }
  return "unknown";
}

ObjectKind object_kind_from_name(const std::string& name) {
  if (name == "box") return ObjectKind::kBox;
  if (name == "cylinder") return ObjectKind::kCylinder;
  if (name == "composite_spout") return ObjectKind::kCompositeSpout;
  if (name == "composite_handle") return ObjectKind::kCompositeHandle;
  fail(ErrorCode::kInvalidArgument, "unknown object kind '" + name + "'");
}

ParametricObject make_object(ObjectKind kind, const ObjectParams& p, std::uint64_t seed) {
  for (int i = 0; i < 3; ++i) check_range(p.box_size[i], 0.01, 2.0, "box_size");
  check_range(p.radius, 0.01, 2.0, "radius");
  check_range(p.height, 0.01, 2.0, "height");
  check_range(p.segments, 3, 256, "segments");
  check_range(p.part_length, 0.005, 1.0, "part_length");
  check_range(p.part_radius, 0.005, 1.0, "part_radius");
  check_range(p.part_elevation, 0.1, 0.9, "part_elevation");
  check_range(p.part_tilt_deg, 0.0, 80.0, "part_tilt_deg");

  ParametricObject obj;
  obj.kind = kind;
  obj.surface_field_seed = splitmix64(seed);

  const auto add_body = [&](Mesh& mesh) -> double {
    if (p.box_body) {
      mesh.add_box(Vec3(0, 0, p.box_size.z() / 2), p.box_size / 2);
      return p.box_size.x() / 2;
    }
    mesh.add_cylinder(Vec3::Zero(), Vec3::UnitZ(), p.radius, p.height, p.segments);
    return p.radius;
  };
  const double body_height = p.box_body ? p.box_size.z() : p.height;

  switch (kind) {
    case ObjectKind::kBox:
      obj.mesh.add_box(Vec3(0, 0, p.box_size.z() / 2), p.box_size / 2);
      break;
    case ObjectKind::kCylinder:
      obj.mesh.add_cylinder(Vec3::Zero(), Vec3::UnitZ(), p.radius, p.height, p.segments);
      break;
    case ObjectKind::kCompositeSpout: {
      const double half_x = add_body(obj.mesh);
      const double tilt = p.part_tilt_deg * std::numbers::pi / 180.0;
      const Vec3 dir(std::cos(tilt), 0.0, std::sin(tilt));
      const Vec3 start(0.6 * half_x, 0.0, p.part_elevation * body_height);
      const double exit_s = 0.4 * half_x / dir.x();
      const double tube_length = exit_s + p.part_length;
      obj.mesh.add_cylinder(start, dir, p.part_radius, tube_length, p.segments);

      Obb obb;
      const double margin = 0.25 * p.part_radius;
      const double s0 = exit_s, s1 = tube_length + margin;
      obb.center = start + dir * (0.5 * (s0 + s1));
      obb.rotation.col(0) = dir;
      obb.rotation.col(1) = Vec3::UnitY();
      obb.rotation.col(2) = dir.cross(Vec3::UnitY());
      obb.half_extents = Vec3(0.5 * (s1 - s0), p.part_radius + margin, p.part_radius + margin);
      obj.part_regions[p.part_function.empty() ? "pour-with" : p.part_function] = obb;
      break;
    }
    case ObjectKind::kCompositeHandle: {
      const double half_x = add_body(obj.mesh);
      const double pr = p.part_radius;
      const double reach = 0.6 * p.part_length;
      const double zc = p.part_elevation * body_height;
      const double z_lo = zc - p.part_length / 2, z_hi = zc + p.part_length / 2;
      const double x_in = -0.8 * half_x, x_out = -(half_x + reach);
      for (double z : {z_lo, z_hi}) {
        obj.mesh.add_box(Vec3(0.5 * (x_in + x_out), 0, z), Vec3(0.5 * (x_in - x_out), pr, pr));
      }
      obj.mesh.add_box(Vec3(x_out, 0, zc), Vec3(pr, pr, 0.5 * (z_hi - z_lo) + pr));

      Obb obb;
      const double margin = 0.25 * pr;
      const double xa = -half_x, xb = x_out - pr - margin;
      obb.center = Vec3(0.5 * (xa + xb), 0, zc);
      obb.half_extents = Vec3(0.5 * (xa - xb), pr + margin, 0.5 * (z_hi - z_lo) + pr + margin);
      obj.part_regions[p.part_function.empty() ? "lift-with" : p.part_function] = obb;
      break;
    }
  }
  for (std::size_t f = 0; f < obj.mesh.faces.size(); ++f) {
    require(obj.mesh.face_area(f) > kMinTriangleArea, ErrorCode::kInvalidArgument,
            "degenerate triangle generated");
  }
  return obj;
}

bool point_in_part(const Vec3& world_point, const Obb& obb, const RigidTransform& object_to_world) {
  const Mat3 r = object_to_world.rotation();
  const Vec3 object_point = r.transpose() * (world_point - object_to_world.translation());
  return obb.contains(object_point);
}

RasterOutput rasterize(const ParametricObject& obj, const Camera& cam,
                       const RigidTransform& object_to_world) {
  cam.validate();
  const int h = cam.height, w = cam.width;
  RasterOutput out;
  out.depth = DepthMap(h, w, 0.0f);
  out.object_mask = Mask(h, w, 0);
  for (const auto& [name, obb] : obj.part_regions) out.part_masks[name] = Mask(h, w, 0);

  std::vector<double> zbuf(static_cast<std::size_t>(h) * w, std::numeric_limits<double>::infinity());
  const RigidTransform to_cam = cam.world_to_cam * object_to_world;
  std::vector<Vec3> cv(obj.mesh.vertices.size());
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = to_cam.apply(obj.mesh.vertices[i]);

  constexpr double kNear = 1e-6;
  for (const auto& tri : obj.mesh.faces) {
    const Vec3& p0 = cv[tri[0]];
    const Vec3& p1 = cv[tri[1]];
    const Vec3& p2 = cv[tri[2]];
    if (p0.z() <= kNear || p1.z() <= kNear || p2.z() <= kNear) continue;
    // Screen coordinates: u = col, v = row.
    const double u0 = cam.fx * p0.x() / p0.z() + cam.cx, v0 = cam.fy * p0.y() / p0.z() + cam.cy;
    const double u1 = cam.fx * p1.x() / p1.z() + cam.cx, v1 = cam.fy * p1.y() / p1.z() + cam.cy;
    const double u2 = cam.fx * p2.x() / p2.z() + cam.cx, v2 = cam.fy * p2.y() / p2.z() + cam.cy;
    const double area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0);
    if (std::abs(area) < 1e-12) continue;
    const int r_lo = std::max(0, static_cast<int>(std::ceil(std::min({v0, v1, v2}))));
    const int r_hi = std::min(h - 1, static_cast<int>(std::floor(std::max({v0, v1, v2}))));
    const int c_lo = std::max(0, static_cast<int>(std::ceil(std::min({u0, u1, u2}))));
    const int c_hi = std::min(w - 1, static_cast<int>(std::floor(std::max({u0, u1, u2}))));
    for (int r = r_lo; r <= r_hi; ++r) {
      for (int c = c_lo; c <= c_hi; ++c) {
        const double b0 = ((u1 - c) * (v2 - r) - (v1 - r) * (u2 - c)) / area;
        const double b1 = ((u2 - c) * (v0 - r) - (v2 - r) * (u0 - c)) / area;
        const double b2 = 1.0 - b0 - b1;
        if (b0 < 0 || b1 < 0 || b2 < 0) continue;
        const double z = 1.0 / (b0 / p0.z() + b1 / p1.z() + b2 / p2.z());
        double& zb = zbuf[static_cast<std::size_t>(r) * w + c];
        if (z < zb) zb = z;
      }
    }
  }

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double z = zbuf[static_cast<std::size_t>(r) * w + c];
      if (!std::isfinite(z)) continue;
      const float zf = static_cast<float>(z);
      out.depth.at(r, c) = zf;
      out.object_mask.at(r, c) = 1;
      if (obj.part_regions.empty()) continue;
      const Vec3 x = backproject(Pixel{r, c}, zf, cam);
      for (const auto& [name, obb] : obj.part_regions) {
        if (point_in_part(x, obb, object_to_world)) out.part_masks[name].at(r, c) = 1;
      }
    }
  }
  return out;
}

std::optional<Vec3> cast_ray(const Mesh& mesh, const RigidTransform& object_to_world,
                             const Camera& cam, double row, double col) {
  const Vec3 origin = cam.world_to_cam.inverse().translation();
  const Vec3 dir = (backproject(row, col, 1.0, cam) - origin).normalized();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.faces) {
    const Vec3 a = object_to_world.apply(mesh.vertices[tri[0]]);
    const Vec3 e1 = object_to_world.apply(mesh.vertices[tri[1]]) - a;
    const Vec3 e2 = object_to_world.apply(mesh.vertices[tri[2]]) - a;
    const Vec3 pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < 1e-15) continue;
    const double inv = 1.0 / det;
    const Vec3 tvec = origin - a;
    const double u = tvec.dot(pvec) * inv;
    if (u < 0 || u > 1) continue;
    const Vec3 qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv;
    if (v < 0 || u + v > 1) continue;
    const double t = e2.dot(qvec) * inv;
    if (t > 1e-9 && t < best) best = t;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return origin + best * dir;
}

Camera orbit_camera(const Vec3& target, double distance, double azimuth, double elevation,
                    double focal, int image_size) {
  const Vec3 eye = target + distance * Vec3(std::cos(elevation) * std::cos(azimuth),
                                            std::cos(elevation) * std::sin(azimuth),
                                            std::sin(elevation));
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = forward;
  Camera cam;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = 0.5 * (image_size - 1);
  cam.width = cam.height = image_size;
  cam.world_to_cam = RigidTransform(r, -r * eye);
  return cam;
}

void FeatureGrid::validate() const {
  require(grid_h > 0 && grid_w > 0 && channels > 0 && stride > 0, ErrorCode::kInvalidArgument,
          "feature grid dims must be > 0");
  require(image_height == grid_h * stride && image_width == grid_w * stride,
          ErrorCode::kShapeMismatch, "grid dims must equal image dims / stride");
  for (const auto& b : blocks) {
    require(b.size() == static_cast<std::size_t>(grid_h) * grid_w * channels,
            ErrorCode::kShapeMismatch, "feature block size mismatch");
  }
  require(object_mask.same_size(image_height, image_width), ErrorCode::kShapeMismatch,
          "object mask does not match image size");
  for (const auto& [name, m] : part_masks) {
    require(m.same_size(image_height, image_width), ErrorCode::kShapeMismatch,
            "part mask '" + name + "' does not match image size");
  }
}

Tensor feature_planes_to_tensor(const FeatureGrid& grid) {
  std::vector<float> all;
  all.reserve(grid.blocks[0].size() * kNumFeatureBlocks);
  for (const auto& b : grid.blocks) all.insert(all.end(), b.begin(), b.end());
  return Tensor::from<float>({kNumFeatureBlocks, static_cast<std::uint64_t>(grid.grid_h),
                              static_cast<std::uint64_t>(grid.grid_w),
                              static_cast<std::uint64_t>(grid.channels)},
                             all);
}

void feature_planes_from_tensor(const Tensor& tensor, FeatureGrid& grid) {
  require(tensor.ndim() == 4 && tensor.shape()[0] == kNumFeatureBlocks, ErrorCode::kShapeMismatch,
          "feature tensor must have shape [3, H, W, C]");
  grid.grid_h = static_cast<int>(tensor.shape()[1]);
  grid.grid_w = static_cast<int>(tensor.shape()[2]);
  grid.channels = static_cast<int>(tensor.shape()[3]);
  const auto all = tensor.values<float>();
  const std::size_t n = all.size() / kNumFeatureBlocks;
  for (int b = 0; b < kNumFeatureBlocks; ++b) {
    grid.blocks[b].assign(all.begin() + b * n, all.begin() + (b + 1) * n);
  }
}

FeatureField::FeatureField(const FeatureFieldConfig& config, std::uint64_t instance_seed)
    : config_(config) {
  require(config.channels >= 4, ErrorCode::kInvalidArgument, "feature channels must be >= 4");
  require(config.terms >= 1, ErrorCode::kInvalidArgument, "feature terms must be >= 1");
  for (int field = 0; field < 2; ++field) {
    const std::uint64_t base = field == 0 ? splitmix64(config.seed ^ 0x5eedULL) : instance_seed;
    for (int b = 0; b < kNumFeatureBlocks; ++b) {
      std::mt19937_64 rng(splitmix64(base + 1000003ULL * (b + 1)));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      auto& waves = waves_[field][b];
      waves.resize(static_cast<std::size_t>(config.channels) * config.terms);
      for (auto& wave : waves) {
        Vec3 dir(normal(rng), normal(rng), normal(rng));
        dir.normalize();
        wave.omega = dir * config.frequency * (0.5 + uniform(rng));
        wave.phase = 2.0 * std::numbers::pi * uniform(rng);
      }
    }
  }
}

std::array<std::vector<float>, kNumFeatureBlocks> FeatureField::evaluate(
    const Vec3& object_point, const RigidTransform& part_frame) const {
  const Vec3 shared_point = part_frame.apply(object_point);
  const double norm = std::sqrt(2.0 / config_.terms);
  std::array<std::vector<float>, kNumFeatureBlocks> out;
  for (int b = 0; b < kNumFeatureBlocks; ++b) {
    out[b].resize(config_.channels);
    for (int ch = 0; ch < config_.channels; ++ch) {
      double shared = 0.0, instance = 0.0;
      for (int t = 0; t < config_.terms; ++t) {
        const auto& ws = waves_[0][b][ch * config_.terms + t];
        const auto& wi = waves_[1][b][ch * config_.terms + t];
        shared += std::sin(ws.omega.dot(shared_point) + ws.phase);
        instance += std::sin(wi.omega.dot(object_point) + wi.phase);
      }
      out[b][ch] = static_cast<float>(norm * (config_.shared_weight[b] * shared +
                                              config_.instance_weight[b] * instance));
    }
  }
  return out;
}

RigidTransform canonical_part_frame(const ParametricObject& obj) {
  if (obj.part_regions.empty()) return RigidTransform::identity();
  return obj.part_regions.begin()->second.object_to_local();
}

FeatureGrid procedural_features(const ParametricObject& obj, const Camera& cam,
                                const RasterOutput& raster, const FeatureFieldConfig& config,
                                std::uint64_t image_seed, int stride,
                                const RigidTransform& object_to_world) {
  cam.validate();
  require(config.channels >= 4, ErrorCode::kInvalidArgument, "feature channels must be >= 4");
  require(stride > 0 && cam.height % stride == 0 && cam.width % stride == 0,
          ErrorCode::kShapeMismatch, "image size must be a multiple of the patch stride");
  require(raster.object_mask.same_size(cam.height, cam.width), ErrorCode::kShapeMismatch,
          "raster does not match camera");

  FeatureGrid grid;
  grid.stride = stride;
  grid.grid_h = cam.height / stride;
  grid.grid_w = cam.width / stride;
  grid.channels = config.channels;
  grid.image_height = cam.height;
  grid.image_width = cam.width;
  grid.object_mask = raster.object_mask;
  grid.part_masks = raster.part_masks;

  const FeatureField field(config, obj.surface_field_seed);
  const RigidTransform part_frame = canonical_part_frame(obj);
  const RigidTransform world_to_object = object_to_world.inverse();

  std::mt19937_64 rng(splitmix64(image_seed ^ 0xbacc0ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<std::vector<float>, kNumFeatureBlocks> background;
  for (auto& b : background) {
    b.resize(config.channels);
    for (auto& v : b) v = static_cast<float>(normal(rng));
  }

  const std::size_t cells = static_cast<std::size_t>(grid.grid_h) * grid.grid_w;
  for (auto& b : grid.blocks) b.assign(cells * config.channels, 0.0f);
  for (int gr = 0; gr < grid.grid_h; ++gr) {
    for (int gc = 0; gc < grid.grid_w; ++gc) {
      const double row = (gr + 0.5) * stride - 0.5;
      const double col = (gc + 0.5) * stride - 0.5;
      const auto hit = cast_ray(obj.mesh, object_to_world, cam, row, col);
      const auto values = hit ? field.evaluate(world_to_object.apply(*hit), part_frame) : background;
      const std::size_t offset = (static_cast<std::size_t>(gr) * grid.grid_w + gc) * config.channels;
      for (int b = 0; b < kNumFeatureBlocks; ++b) {
        std::copy(values[b].begin(), values[b].end(), grid.blocks[b].begin() + offset);
      }
    }
  }
  return grid;
}

}  // namespace dfc
