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

#ifndef DFC_PSEUDOLABEL_H_
#define DFC_PSEUDOLABEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dfc/camera.h"
#include "dfc/scenes.h"

namespace dfc {

// A part bounding box predicted on one view, pixel bounds inclusive.
struct Detection {
  int view = 0;
  int trial = 0;
  int row_min = 0;
  int col_min = 0;
  int row_max = 0;
  int col_max = 0;
  std::string object_id;  // optional when the source has a single object
  std::string function;   // optional when the object has a single function

  bool contains(Pixel p) const {
    return p.row >= row_min && p.row <= row_max && p.col >= col_min && p.col <= col_max;
  }
};

struct ScoredPointCloud {
  std::vector<Vec3> points;  // object frame
  std::vector<double> scores;
};

// Area-weighted uniform samples on the mesh surface (object frame).
std::vector<Vec3> sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

// Counts, for every point, the detections whose box contains the point's
// projection in a view where the point is visible; scores are counts divided
// by the largest count.
ScoredPointCloud accumulate_votes(std::span<const Vec3> points, std::span<const CameraView> views,
                                  std::span<const Detection> detections,
                                  const RigidTransform& object_to_world = RigidTransform::identity(),
                                  double tol_rel = kDefaultOcclusionTolerance);

ScoredPointCloud edge_modulate(const ScoredPointCloud& cloud, std::span<const double> edge_prob);

// Histogram threshold maximizing inter-class variance; returns the winning
// bin edge k / bins (values >= edge form the upper class). Ties resolve to
// the lowest edge.
double otsu_threshold(std::span<const double> values, int bins = 256);

Mask dilate(const Mask& mask);
Mask erode(const Mask& mask);
// `iterations` dilations followed by `iterations` erosions with a 3x3 cross.
Mask morphological_close(const Mask& mask, int iterations);

struct MaskExtractionConfig {
  double threshold = 0.5;
  int splat_radius = 1;
  int close_iterations = 2;
  double tol_rel = kDefaultOcclusionTolerance;
};

// Visible points with score >= threshold splatted as disks, intersected with
// the object mask. This is the mask before closing.
Mask splat_points(const ScoredPointCloud& cloud, const CameraView& view,
                  const MaskExtractionConfig& config,
                  const RigidTransform& object_to_world = RigidTransform::identity());

// splat_points followed by closing, clipped to the object mask.
Mask extract_mask(const ScoredPointCloud& cloud, const CameraView& view,
                  const MaskExtractionConfig& config,
                  const RigidTransform& object_to_world = RigidTransform::identity());

// Detections file: one JSON object per line,
// {"view": int, "trial": int, "bbox": [r0, c0, r1, c1]}, with optional
// "object_id" and "function" keys.
std::vector<Detection> read_detections(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path, std::span<const Detection> detections);

}  // namespace dfc

#endif  // DFC_PSEUDOLABEL_H_
