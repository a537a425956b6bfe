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


#ifndef DFC_TESTS_SUPPORT_ORACLES_H_
#define DFC_TESTS_SUPPORT_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <boost/multiprecision/cpp_int.hpp>

#include "dfc/camera.h"
#include "test_util.h"

namespace dfc::testing {

// Minimum total cost over every permutation.
inline double brute_force_cost(const Eigen::MatrixXd& cost) {
  std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < cost.rows(); ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Exhaustive Otsu over bin edges with exact rational arithmetic:
// maximize w0 * w1 * (mu0 - mu1)^2, lowest edge on ties. Returns -1 when
// every split leaves a class empty.
inline int otsu_oracle(const std::vector<long>& hist) {
  using boost::multiprecision::cpp_rational;
  const int bins = static_cast<int>(hist.size());
  long total = 0;
  for (long h : hist) total += h;
  cpp_rational best = -1;
  int best_k = -1;
  for (int k = 1; k < bins; ++k) {
    cpp_rational n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int b = 0; b < bins; ++b) {
      const cpp_rational center = cpp_rational(2 * b + 1, 2 * bins);
      (b < k ? n0 : n1) += hist[static_cast<std::size_t>(b)];
      (b < k ? s0 : s1) += center * hist[static_cast<std::size_t>(b)];
    }
    if (n0 == 0 || n1 == 0) continue;
    const cpp_rational w0 = n0 / total, w1 = n1 / total;
    const cpp_rational d = s0 / n0 - s1 / n1;
    const cpp_rational var = w0 * w1 * d * d;
    if (var > best) {
      best = var;
      best_k = k;
    }
  }
  return best_k;
}

// Random histogram with a few occupied bins, expanded to bin-center values.
inline std::vector<long> random_histogram(int bins, int filled, std::mt19937_64& rng) {
  std::vector<long> hist(static_cast<std::size_t>(bins), 0);
  std::uniform_int_distribution<int> bin(0, bins - 1), count(1, 40);
  for (int i = 0; i < filled; ++i) hist[static_cast<std::size_t>(bin(rng))] += count(rng);
  return hist;
}

inline std::vector<double> histogram_values(const std::vector<long>& hist) {
  const auto bins = static_cast<double>(hist.size());
  std::vector<double> values;
  for (std::size_t b = 0; b < hist.size(); ++b) {
    values.insert(values.end(), static_cast<std::size_t>(hist[b]), (static_cast<double>(b) + 0.5) / bins);
  }
  return values;
}

// 224 px camera with jittered intrinsics and a random pose.
inline Camera posed_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Camera cam;
  cam.fx = 180.0 + 40.0 * u(rng);
  cam.fy = 180.0 + 40.0 * u(rng);
  cam.cx = 111.5 + 5.0 * u(rng);
  cam.cy = 111.5 + 5.0 * u(rng);
  cam.width = cam.height = 224;
  const Eigen::AngleAxisd aa(3.0 * u(rng), Vec3(u(rng), u(rng), u(rng)).normalized());
  cam.world_to_cam = RigidTransform(aa.toRotationMatrix(), Vec3(u(rng), u(rng), u(rng)));
  return cam;
}

// Fraction of multiview pairs whose b pixel lies within 1 px of the
// ray-cast projection of the a pixel's cube hit.
inline double cube_closed_form_agreement(const CubeScene& scene, const CorrespondenceSet& s) {
  const Camera& ca = scene.view_a.camera;
  const Vec3 eye = ca.world_to_cam.inverse().translation();
  std::size_t good = 0;
  for (const auto& p : s.pairs) {
    const Vec3 through = backproject(p.a, 1.0, ca);
    const auto hit = ray_box_hit(eye, (through - eye).normalized(), scene.center, scene.half);
    if (!hit) continue;
    const Projection q = project(*hit, scene.view_b.camera);
    if (std::hypot(q.row - p.b.row, q.col - p.b.col) <= 1.0) ++good;
  }
  return s.empty() ? 0.0 : static_cast<double>(good) / static_cast<double>(s.size());
}

}  // namespace dfc::testing

#endif  // DFC_TESTS_SUPPORT_ORACLES_H_
