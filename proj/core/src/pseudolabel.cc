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

#include "dfc/pseudolabel.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

namespace dfc {

std::vector<Vec3> sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  require(!mesh.empty(), ErrorCode::kEmpty, "cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  require(total > 0.0, ErrorCode::kEmpty, "mesh has zero surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Vec3> points;
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = uniform(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& tri = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    const double s = std::sqrt(uniform(rng));
    const double t = uniform(rng);
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    points.push_back((1.0 - s) * a + s * (1.0 - t) * b + s * t * c);
  }
  return points;
}

namespace {

// Pixel each point lands on in a view, or {-1, -1} when not visible there.
std::vector<Pixel> visible_pixels(std::span<const Vec3> points, const CameraView& view,
                                  const RigidTransform& object_to_world, double tol_rel) {
  std::vector<Pixel> out(points.size(), Pixel{-1, -1});
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 x = object_to_world.apply(points[i]);
    if (view.camera.world_to_cam.apply(x).z() <= 0.0) continue;
    const Projection p = project(x, view.camera);
    const auto q = round_to_pixel(p, view.camera);
    if (!q || !view.object_mask.at(*q)) continue;
    if (!depth_consistent(p.depth, view.depth.at(*q), tol_rel)) continue;
    out[i] = *q;
  }
  return out;
}

void validate_detection(const Detection& d, std::size_t num_views,
                        std::span<const CameraView> views) {
  require(d.view >= 0 && static_cast<std::size_t>(d.view) < num_views, ErrorCode::kOutOfRange,
          "detection references missing view index " + std::to_string(d.view));
  const auto& cam = views[d.view].camera;
  require(d.row_min <= d.row_max && d.col_min <= d.col_max && d.row_min >= 0 && d.col_min >= 0 &&
              d.row_max < cam.height && d.col_max < cam.width,
          ErrorCode::kInvalidArgument,
          "detection bbox out of bounds for view " + std::to_string(d.view));
}

}  // namespace

ScoredPointCloud accumulate_votes(std::span<const Vec3> points, std::span<const CameraView> views,
                                  std::span<const Detection> detections,
                                  const RigidTransform& object_to_world, double tol_rel) {
  for (const auto& d : detections) validate_detection(d, views.size(), views);
  for (const auto& v : views) v.validate();

  std::vector<std::int64_t> counts(points.size(), 0);
  std::vector<std::vector<Pixel>> cache(views.size());
  for (const auto& d : detections) {
    auto& pix = cache[d.view];
    if (pix.empty()) pix = visible_pixels(points, views[d.view], object_to_world, tol_rel);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (pix[i].row >= 0 && d.contains(pix[i])) ++counts[i];
    }
  }
  ScoredPointCloud out;
  out.points.assign(points.begin(), points.end());
  out.scores.assign(points.size(), 0.0);
  const std::int64_t max_count =
      counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  if (max_count > 0) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
      out.scores[i] = static_cast<double>(counts[i]) / static_cast<double>(max_count);
    }
  }
  return out;
}

ScoredPointCloud edge_modulate(const ScoredPointCloud& cloud, std::span<const double> edge_prob) {
  require(edge_prob.size() == cloud.scores.size(), ErrorCode::kShapeMismatch,
          "edge probability count does not match point count");
  ScoredPointCloud out = cloud;
  double max_score = 0.0;
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    out.scores[i] *= edge_prob[i];
    max_score = std::max(max_score, out.scores[i]);
  }
  if (max_score > 0.0) {
    for (auto& s : out.scores) s /= max_score;
  }
  return out;
}

double otsu_threshold(std::span<const double> values, int bins) {
  require(bins >= 2, ErrorCode::kInvalidArgument, "otsu needs at least 2 bins");
  std::set<double> distinct;
  for (double v : values) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::kOutOfRange,
            "otsu input values must lie in [0, 1]");
    if (distinct.size() < 2) distinct.insert(v);
  }
  require(distinct.size() >= 2, ErrorCode::kInvalidArgument, "otsu input is constant");

  std::vector<std::int64_t> hist(bins, 0);
  for (double v : values) {
    ++hist[std::min(bins - 1, static_cast<int>(v * bins))];
  }
  std::int64_t total_n = 0, total_s = 0;
  for (int b = 0; b < bins; ++b) {
    total_n += hist[b];
    total_s += b * hist[b];
  }
  // Inter-class variance in bin units is proportional to
  // (n1*s0 - n0*s1)^2 / (n0*n1); compare the fractions exactly.
  using i128 = __int128;
  i128 best_num = 0, best_den = 1;
  int best_k = 1;
  std::int64_t n0 = 0, s0 = 0;
  for (int k = 1; k < bins; ++k) {
    n0 += hist[k - 1];
    s0 += static_cast<std::int64_t>(k - 1) * hist[k - 1];
    const std::int64_t n1 = total_n - n0, s1 = total_s - s0;
    if (n0 == 0 || n1 == 0) continue;
    const i128 diff = static_cast<i128>(n1) * s0 - static_cast<i128>(n0) * s1;
    const i128 num = diff * diff;
    const i128 den = static_cast<i128>(n0) * n1;
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best_k = k;
    }
  }
  return static_cast<double>(best_k) / bins;
}

namespace {

constexpr int kCross[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};

// Out-of-image neighbors are ignored, so the border is neutral for both ops.
Mask morph(const Mask& in, bool dilation) {
  Mask out(in.height, in.width, 0);
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      bool acc = !dilation;
      for (const auto& d : kCross) {
        const int rr = r + d[0], cc = c + d[1];
        if (!in.in_bounds(rr, cc)) continue;
        if (dilation) acc = acc || in.at(rr, cc);
        else acc = acc && in.at(rr, cc);
      }
      out.at(r, c) = acc ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

Mask dilate(const Mask& mask) { return morph(mask, true); }
Mask erode(const Mask& mask) { return morph(mask, false); }

Mask morphological_close(const Mask& mask, int iterations) {
  require(iterations >= 0, ErrorCode::kInvalidArgument, "closing iterations must be >= 0");
  Mask out = mask;
  for (int i = 0; i < iterations; ++i) out = dilate(out);
  for (int i = 0; i < iterations; ++i) out = erode(out);
  return out;
}

Mask splat_points(const ScoredPointCloud& cloud, const CameraView& view,
                  const MaskExtractionConfig& config, const RigidTransform& object_to_world) {
  view.validate();
  require(config.threshold >= 0.0 && config.threshold <= 1.0, ErrorCode::kOutOfRange,
          "threshold must lie in [0, 1]");
  require(config.splat_radius >= 0, ErrorCode::kInvalidArgument, "splat radius must be >= 0");
  require(cloud.points.size() == cloud.scores.size(), ErrorCode::kShapeMismatch,
          "cloud points/scores length mismatch");
  const auto pix = visible_pixels(cloud.points, view, object_to_world, config.tol_rel);
  const int rad = config.splat_radius;
  Mask out(view.camera.height, view.camera.width, 0);
  for (std::size_t i = 0; i < pix.size(); ++i) {
    if (pix[i].row < 0 || cloud.scores[i] < config.threshold) continue;
    for (int dr = -rad; dr <= rad; ++dr) {
      for (int dc = -rad; dc <= rad; ++dc) {
        if (dr * dr + dc * dc > rad * rad) continue;
        const int r = pix[i].row + dr, c = pix[i].col + dc;
        if (out.in_bounds(r, c) && view.object_mask.at(r, c)) out.at(r, c) = 1;
      }
    }
  }
  return out;
}

Mask extract_mask(const ScoredPointCloud& cloud, const CameraView& view,
                  const MaskExtractionConfig& config, const RigidTransform& object_to_world) {
  Mask out = morphological_close(splat_points(cloud, view, config, object_to_world),
                                 config.close_iterations);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] &= view.object_mask.data[i] ? 1 : 0;
  return out;
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open detections file " + path.string());
  std::vector<Detection> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Detection d;
      d.view = j.at("view").get<int>();
      d.trial = j.value("trial", 0);
      const auto bbox = j.at("bbox").get<std::vector<int>>();
      require(bbox.size() == 4, ErrorCode::kInvalidArgument, "bbox needs 4 values");
      d.row_min = bbox[0];
      d.col_min = bbox[1];
      d.row_max = bbox[2];
      d.col_max = bbox[3];
      d.object_id = j.value("object_id", "");
      d.function = j.value("function", "");
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kInvalidArgument,
           path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_detections(const std::filesystem::path& path, std::span<const Detection> detections) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& d : detections) {
    nlohmann::json j;
    if (!d.object_id.empty()) j["object_id"] = d.object_id;
    if (!d.function.empty()) j["function"] = d.function;
    j["view"] = d.view;
    j["trial"] = d.trial;
    j["bbox"] = {d.row_min, d.col_min, d.row_max, d.col_max};
    out << j.dump() << '\n';
  }
}

}  // namespace dfc
