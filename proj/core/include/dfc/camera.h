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

#ifndef DFC_CAMERA_H_
#define DFC_CAMERA_H_

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dfc/image.h"

namespace dfc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// 4x4 rigid transform. Construction validates orthonormality (1e-6),
// det = +1 and the homogeneous last row.
class RigidTransform {
 public:
  RigidTransform() : m_(Mat4::Identity()) {}
  explicit RigidTransform(const Mat4& m);
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return RigidTransform(); }
  static RigidTransform from_row_major(const std::array<double, 16>& values);

  const Mat4& matrix() const { return m_; }
  Mat3 rotation() const { return m_.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return m_.topRightCorner<3, 1>(); }
  std::array<double, 16> to_row_major() const;

  Vec3 apply(const Vec3& p) const { return rotation() * p + translation(); }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;

 private:
  Mat4 m_;
};

// Pinhole camera. Camera frame: +x along columns, +y along rows, +z forward.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  RigidTransform world_to_cam;

  void validate() const;
};

struct Projection {
  double row = 0.0;
  double col = 0.0;
  double depth = 0.0;
};

// Back-projects a (possibly sub-pixel) image location with camera-frame depth
// into the world frame.
Vec3 backproject(double row, double col, double depth, const Camera& cam);
Vec3 backproject(Pixel pixel, double depth, const Camera& cam);

Projection project(const Vec3& world_point, const Camera& cam);

// Nearest integer pixel, or nullopt when it falls outside the image.
std::optional<Pixel> round_to_pixel(const Projection& p, const Camera& cam);

// A rendered view: camera, per-pixel camera-frame depth (0 off-object),
// and the object mask.
struct CameraView {
  Camera camera;
  DepthMap depth;
  Mask object_mask;

  void validate() const;
};

struct PixelPair {
  Pixel a;
  Pixel b;
  friend auto operator<=>(const PixelPair&, const PixelPair&) = default;
};

struct CorrespondenceSet {
  std::vector<PixelPair> pairs;
  // Empty, or one score in [-1, 1] per pair.
  std::vector<double> scores;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

inline constexpr double kDefaultOcclusionTolerance = 0.01;

// |projected depth - stored depth| <= tol_rel * stored depth.
bool depth_consistent(double projected_depth, double stored_depth, double tol_rel);

// Geometric correspondences from every masked pixel in `a` to `b`, keeping only
// targets that land on b's mask and pass the depth occlusion test.
CorrespondenceSet multiview_pairs(const CameraView& a, const CameraView& b,
                                  double tol_rel = kDefaultOcclusionTolerance);

}  // namespace dfc

#endif  // DFC_CAMERA_H_
