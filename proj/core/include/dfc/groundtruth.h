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

#ifndef DFC_GROUNDTRUTH_H_
#define DFC_GROUNDTRUTH_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dfc/camera.h"
#include "dfc/scenes.h"

namespace dfc {

// Rigid transform taking object B's frame into object A's frame so that the
// two functional parts coincide, plus each object's part box.
struct FunctionalAlignment {
  RigidTransform transform;
  Obb obb_a;
  Obb obb_b;
  std::string function;

  void validate() const;
};

// Greedy farthest-point sampling. Starts at the point farthest from the
// centroid; ties go to the lowest index.
std::vector<std::size_t> fps(std::span<const Vec3> points, std::size_t k);

struct Assignment {
  std::vector<int> row_to_col;
  double total_cost = 0.0;  // sum of cost(i, row_to_col[i]) in row order
};

// Exact minimum-cost perfect matching on a square, finite, non-negative
// cost matrix (shortest augmenting paths with potentials, O(n^3)).
Assignment hungarian(const Eigen::MatrixXd& cost);

struct PartPixels {
  std::vector<Pixel> pixels;          // row-major order
  std::vector<Vec3> object_points;    // back-projections in the object frame
};

PartPixels part_pixels(const CameraView& view, const Obb& obb,
                       const RigidTransform& object_to_world = RigidTransform::identity());

struct GroundTruth {
  CorrespondenceSet correspondences;
  double total_cost = 0.0;
  double residual_mean = 0.0;  // meters
};

struct GroundTruthConfig {
  // When > 0 both part-pixel sets are first reduced to at most this many
  // points by FPS, bounding the O(n^3) assignment.
  std::size_t max_points = 0;
};

GroundTruth derive_gt(const CameraView& view_a, const RigidTransform& object_to_world_a,
                      const CameraView& view_b, const RigidTransform& object_to_world_b,
                      const FunctionalAlignment& alignment, const GroundTruthConfig& config = {});

struct ViewSelectionConfig {
  int top_k = 5;
  int pool = 30;
  int trials = 6;
  std::uint64_t seed = 0;
};

// Part-pixel count per view over the first `pool` views.
std::vector<std::size_t> part_visibility(std::span<const CameraView> views, const Obb& obb,
                                         const RigidTransform& object_to_world, int pool);

// Indices of the `top_k` views with the most part pixels (non-empty only),
// ordered by count descending then index.
std::vector<int> top_views(std::span<const std::size_t> visibility, int top_k);

struct ViewPair {
  int view_a = 0;
  int view_b = 0;
  friend bool operator==(const ViewPair&, const ViewPair&) = default;
};

// Samples `trials` (view_a, view_b) pairs uniformly from each side's top-k
// most part-visible views.
std::vector<ViewPair> select_views(std::span<const CameraView> views_a, const Obb& obb_a,
                                   const RigidTransform& object_to_world_a,
                                   std::span<const CameraView> views_b, const Obb& obb_b,
                                   const RigidTransform& object_to_world_b,
                                   const ViewSelectionConfig& config);

}  // namespace dfc

#endif  // DFC_GROUNDTRUTH_H_
