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


#ifndef DFC_TESTS_SUPPORT_TEST_UTIL_H_
#define DFC_TESTS_SUPPORT_TEST_UTIL_H_

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>

#include "dfc/camera.h"
#include "dfc/scenes.h"

namespace dfc::testing {

// Code of the dfc::Error thrown by `f`, or nullopt when it returns normally.
inline std::optional<ErrorCode> error_code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dfc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Camera at the world origin looking down +z.
inline Camera simple_camera(double f, int size) {
  Camera cam;
  cam.fx = cam.fy = f;
  cam.cx = cam.cy = (size - 1) / 2.0;
  cam.width = cam.height = size;
  return cam;
}

// Renders `obj` and packages the result as a CameraView.
inline CameraView render_view(const ParametricObject& obj, const Camera& cam,
                              const RigidTransform& object_to_world = RigidTransform::identity()) {
  const RasterOutput r = rasterize(obj, cam, object_to_world);
  return CameraView{cam, r.depth, r.object_mask};
}

// First intersection of the ray origin + s * dir (s > 0) with an
// axis-aligned box, by the slab method.
inline std::optional<Vec3> ray_box_hit(const Vec3& origin, const Vec3& dir, const Vec3& center,
                                       const Vec3& half) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double lo = center[k] - half[k] - origin[k];
    const double hi = center[k] + half[k] - origin[k];
    if (dir[k] == 0.0) {
      if (lo > 0.0 || hi < 0.0) return std::nullopt;
      continue;
    }
    double a = lo / dir[k], b = hi / dir[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t0 > t1 || t0 <= 0.0) return std::nullopt;
  return origin + t0 * dir;
}

// A 0.2 m cube resting on z = 0 and two orbit views of it 45 degrees apart.
struct CubeScene {
  ParametricObject cube;
  Vec3 center{0.0, 0.0, 0.1};
  Vec3 half{0.1, 0.1, 0.1};
  CameraView view_a, view_b;
};

inline CubeScene cube_scene(int image_size = 160) {
  CubeScene s;
  ObjectParams p;
  p.box_size = Vec3(0.2, 0.2, 0.2);
  s.cube = make_object(ObjectKind::kBox, p, 0);
  const double el = 30.0 * std::numbers::pi / 180.0;
  const double az = 45.0 * std::numbers::pi / 180.0;
  s.view_a = render_view(s.cube, orbit_camera(s.center, 0.9, 0.3, el, 220.0, image_size));
  s.view_b = render_view(s.cube, orbit_camera(s.center, 0.9, 0.3 + az, el, 220.0, image_size));
  return s;
}

inline ParametricObject spout_object(std::uint64_t seed = 7) {
  ObjectParams p;
  p.part_function = "pour-with";
  return make_object(ObjectKind::kCompositeSpout, p, seed);
}

// Feature grid with i.i.d. normal cells and a full object mask.
inline FeatureGrid random_grid(int grid_h, int grid_w, int channels, int stride, std::uint64_t seed) {
  FeatureGrid g;
  g.grid_h = grid_h;
  g.grid_w = grid_w;
  g.channels = channels;
  g.stride = stride;
  g.image_height = grid_h * stride;
  g.image_width = grid_w * stride;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (auto& b : g.blocks) {
    b.resize(static_cast<std::size_t>(grid_h) * grid_w * channels);
    for (auto& v : b) v = n(rng);
  }
  g.object_mask = Mask(g.image_height, g.image_width, 1);
  return g;
}

inline Eigen::MatrixXd random_unit_rows(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = g(rng);
    m.row(i).normalize();
  }
  return m;
}

}  // namespace dfc::testing

#endif  // DFC_TESTS_SUPPORT_TEST_UTIL_H_
