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

#include "dfc/camera.h"

#include <cmath>
#include <string>

namespace dfc {

namespace {

constexpr double kRigidTolerance = 1e-6;

void validate_rigid(const Mat4& m) {
  require(m.allFinite(), ErrorCode::kNonFinite, "transform has non-finite entries");
  const Mat3 r = m.topLeftCorner<3, 3>();
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  require(ortho < kRigidTolerance, ErrorCode::kInvalidArgument,
          "rotation block is not orthonormal (deviation " + std::to_string(ortho) + ")");
  require(r.determinant() > 0.0, ErrorCode::kInvalidArgument, "rotation has det -1");
  const Eigen::RowVector4d last = m.row(3);
  require((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() < kRigidTolerance,
          ErrorCode::kInvalidArgument, "last row of rigid transform must be (0,0,0,1)");
}

}  // namespace

RigidTransform::RigidTransform(const Mat4& m) : m_(m) { validate_rigid(m_); }

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : m_(Mat4::Identity()) {
  m_.topLeftCorner<3, 3>() = rotation;
  m_.topRightCorner<3, 1>() = translation;
  validate_rigid(m_);
}

RigidTransform RigidTransform::from_row_major(const std::array<double, 16>& values) {
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = values[4 * r + c];
  return RigidTransform(m);
}

std::array<double, 16> RigidTransform::to_row_major() const {
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[4 * r + c] = m_(r, c);
  return out;
}

RigidTransform RigidTransform::inverse() const {
  Mat4 inv = Mat4::Identity();
  const Mat3 rt = rotation().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -rt * translation();
  RigidTransform out;
  out.m_ = inv;
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.m_ = m_ * rhs.m_;
  out.m_.row(3) << 0, 0, 0, 1;
  return out;
}

void Camera::validate() const {
  require(std::isfinite(fx) && std::isfinite(fy) && fx > 0 && fy > 0,
          ErrorCode::kInvalidArgument, "camera focal lengths must be > 0");
  require(std::isfinite(cx) && std::isfinite(cy), ErrorCode::kNonFinite,
          "camera principal point must be finite");
  require(width > 0 && height > 0, ErrorCode::kInvalidArgument,
          "camera image size must be > 0");
}

Vec3 backproject(double row, double col, double depth, const Camera& cam) {
  require(std::isfinite(depth) && depth > 0.0, ErrorCode::kInvalidArgument,
          "back-projection needs positive depth");
  const Vec3 p_cam((col - cam.cx) / cam.fx * depth, (row - cam.cy) / cam.fy * depth, depth);
  const Mat3 r = cam.world_to_cam.rotation();
  return r.transpose() * (p_cam - cam.world_to_cam.translation());
}

Vec3 backproject(Pixel pixel, double depth, const Camera& cam) {
  require(pixel.row >= 0 && pixel.col >= 0 && pixel.row < cam.height && pixel.col < cam.width,
          ErrorCode::kOutOfRange, "pixel outside image");
  return backproject(static_cast<double>(pixel.row), static_cast<double>(pixel.col), depth, cam);
}

Projection project(const Vec3& world_point, const Camera& cam) {
  const Vec3 p = cam.world_to_cam.apply(world_point);
  require(p.z() > 0.0, ErrorCode::kInvalidArgument, "point is behind the camera");
  return {cam.fy * p.y() / p.z() + cam.cy, cam.fx * p.x() / p.z() + cam.cx, p.z()};
}

std::optional<Pixel> round_to_pixel(const Projection& p, const Camera& cam) {
  const double r = std::floor(p.row + 0.5);
  const double c = std::floor(p.col + 0.5);
  if (r < 0 || c < 0 || r >= cam.height || c >= cam.width) return std::nullopt;
  return Pixel{static_cast<int>(r), static_cast<int>(c)};
}

void CameraView::validate() const {
  camera.validate();
  require(depth.same_size(camera.height, camera.width) &&
              object_mask.same_size(camera.height, camera.width),
          ErrorCode::kShapeMismatch, "depth/mask size does not match camera");
}

bool depth_consistent(double projected_depth, double stored_depth, double tol_rel) {
  return stored_depth > 0.0 && std::abs(projected_depth - stored_depth) <= tol_rel * stored_depth;
}

CorrespondenceSet multiview_pairs(const CameraView& a, const CameraView& b, double tol_rel) {
  a.validate();
  b.validate();
  CorrespondenceSet out;
  for (int r = 0; r < a.camera.height; ++r) {
    for (int c = 0; c < a.camera.width; ++c) {
      if (!a.object_mask.at(r, c)) continue;
      const double d = a.depth.at(r, c);
      if (!(d > 0.0)) continue;
      const Vec3 x = backproject(Pixel{r, c}, d, a.camera);
      if (b.camera.world_to_cam.apply(x).z() <= 0.0) continue;
      const Projection p = project(x, b.camera);
      const auto q = round_to_pixel(p, b.camera);
      if (!q || !b.object_mask.at(*q)) continue;
      if (!depth_consistent(p.depth, b.depth.at(*q), tol_rel)) continue;
      out.pairs.push_back({{r, c}, *q});
    }
  }
  return out;
}

}  // namespace dfc
