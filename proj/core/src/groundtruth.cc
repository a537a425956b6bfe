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

#include "dfc/groundtruth.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace dfc {

void FunctionalAlignment::validate() const {
  obb_a.validate();
  obb_b.validate();
  RigidTransform check(transform.matrix());
  (void)check;
}

std::vector<std::size_t> fps(std::span<const Vec3> points, std::size_t k) {
  require(k >= 1 && k <= points.size(), ErrorCode::kOutOfRange,
          "fps: k=" + std::to_string(k) + " outside [1, " + std::to_string(points.size()) + "]");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  std::size_t start = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - centroid).squaredNorm();
    if (d > best) {
      best = d;
      start = i;
    }
  }
  std::vector<std::size_t> selected{start};
  selected.reserve(k);
  std::vector<double> min_dist(points.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(points.size(), false);
  taken[start] = true;
  std::size_t last = start;
  while (selected.size() < k) {
    std::size_t next = points.size();
    double next_dist = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (taken[i]) continue;
      min_dist[i] = std::min(min_dist[i], (points[i] - points[last]).squaredNorm());
      if (min_dist[i] > next_dist) {
        next_dist = min_dist[i];
        next = i;
      }
    }
    taken[next] = true;
    selected.push_back(next);
    last = next;
  }
  return selected;
}

Assignment hungarian(const Eigen::MatrixXd& cost) {
  require(cost.rows() == cost.cols(), ErrorCode::kShapeMismatch,
          "hungarian requires a square cost matrix");
  require(cost.allFinite(), ErrorCode::kNonFinite, "hungarian cost matrix has non-finite entries");
  require(cost.size() == 0 || cost.minCoeff() >= 0.0, ErrorCode::kInvalidArgument,
          "hungarian costs must be non-negative");
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual column holding the row being
  // inserted.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match_col(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> min_v(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match_col[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < min_v[j]) {
          min_v[j] = cur;
          way[j] = j0;
        }
        if (min_v[j] < delta) {
          delta = min_v[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          min_v[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0);
  }
  Assignment out;
  out.row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.row_to_col[match_col[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) out.total_cost += cost(i, out.row_to_col[i]);
  return out;
}

PartPixels part_pixels(const CameraView& view, const Obb& obb,
                       const RigidTransform& object_to_world) {
  view.validate();
  const RigidTransform world_to_object = object_to_world.inverse();
  PartPixels out;
  for (int r = 0; r < view.camera.height; ++r) {
    for (int c = 0; c < view.camera.width; ++c) {
      if (!view.object_mask.at(r, c)) continue;
      const double d = view.depth.at(r, c);
      if (!(d > 0.0)) continue;
      const Vec3 x = backproject(Pixel{r, c}, d, view.camera);
      if (!point_in_part(x, obb, object_to_world)) continue;
      out.pixels.push_back({r, c});
      out.object_points.push_back(world_to_object.apply(x));
    }
  }
  return out;
}

namespace {

PartPixels subsample(const PartPixels& in, std::size_t k) {
  if (k >= in.pixels.size()) return in;
  auto idx = fps(in.object_points, k);
  std::sort(idx.begin(), idx.end());
  PartPixels out;
  for (auto i : idx) {
    out.pixels.push_back(in.pixels[i]);
    out.object_points.push_back(in.object_points[i]);
  }
  return out;
}

}  // namespace

GroundTruth derive_gt(const CameraView& view_a, const RigidTransform& object_to_world_a,
                      const CameraView& view_b, const RigidTransform& object_to_world_b,
                      const FunctionalAlignment& alignment, const GroundTruthConfig& config) {
  alignment.validate();
  PartPixels pa = part_pixels(view_a, alignment.obb_a, object_to_world_a);
  PartPixels pb = part_pixels(view_b, alignment.obb_b, object_to_world_b);
  require(!pa.pixels.empty(), ErrorCode::kEmpty, "no part pixels in view A");
  require(!pb.pixels.empty(), ErrorCode::kEmpty, "no part pixels in view B");
  if (config.max_points > 0) {
    pa = subsample(pa, config.max_points);
    pb = subsample(pb, config.max_points);
  }
  const std::size_t n = std::min(pa.pixels.size(), pb.pixels.size());
  pa = subsample(pa, n);
  pb = subsample(pb, n);

  std::vector<Vec3> aligned_b(n);
  for (std::size_t j = 0; j < n; ++j) aligned_b[j] = alignment.transform.apply(pb.object_points[j]);
  Eigen::MatrixXd cost(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = (pa.object_points[i] - aligned_b[j]).norm();

  const Assignment assignment = hungarian(cost);
  GroundTruth out;
  out.correspondences.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.correspondences.pairs.push_back({pa.pixels[i], pb.pixels[assignment.row_to_col[i]]});
  }
  out.total_cost = assignment.total_cost;
  out.residual_mean = assignment.total_cost / static_cast<double>(n);
  return out;
}

std::vector<std::size_t> part_visibility(std::span<const CameraView> views, const Obb& obb,
                                         const RigidTransform& object_to_world, int pool) {
  require(pool >= 1 && static_cast<std::size_t>(pool) <= views.size(), ErrorCode::kOutOfRange,
          "view pool of " + std::to_string(pool) + " exceeds " + std::to_string(views.size()) +
              " views");
  std::vector<std::size_t> counts(pool);
  for (int i = 0; i < pool; ++i) counts[i] = part_pixels(views[i], obb, object_to_world).pixels.size();
  return counts;
}

std::vector<int> top_views(std::span<const std::size_t> visibility, int top_k) {
  std::vector<int> order(visibility.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return visibility[a] > visibility[b]; });
  std::vector<int> out;
  for (int i : order) {
    if (static_cast<int>(out.size()) >= top_k || visibility[i] == 0) break;
    out.push_back(i);
  }
  require(!out.empty(), ErrorCode::kEmpty, "functional part is not visible in any view");
  return out;
}

std::vector<ViewPair> select_views(std::span<const CameraView> views_a, const Obb& obb_a,
                                   const RigidTransform& object_to_world_a,
                                   std::span<const CameraView> views_b, const Obb& obb_b,
                                   const RigidTransform& object_to_world_b,
                                   const ViewSelectionConfig& config) {
  require(config.top_k >= 1 && config.trials >= 0, ErrorCode::kInvalidArgument,
          "top_k must be >= 1 and trials >= 0");
  const auto vis_a = part_visibility(views_a, obb_a, object_to_world_a, config.pool);
  const auto vis_b = part_visibility(views_b, obb_b, object_to_world_b, config.pool);
  const auto top_a = top_views(vis_a, config.top_k);
  const auto top_b = top_views(vis_b, config.top_k);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_a(0, top_a.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_b(0, top_b.size() - 1);
  std::vector<ViewPair> out;
  for (int t = 0; t < config.trials; ++t) {
    const int a = top_a[pick_a(rng)];
    const int b = top_b[pick_b(rng)];
    out.push_back({a, b});
  }
  return out;
}

}  // namespace dfc
