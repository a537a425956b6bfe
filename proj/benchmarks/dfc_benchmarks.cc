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


#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dfc/camera.h"
#include "dfc/groundtruth.h"
#include "dfc/metrics.h"
#include "dfc/scenes.h"
#include "dfc/train.h"

namespace {

using namespace dfc;

void BM_Hungarian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(c).total_cost);
  state.SetComplexityN(n);
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(32, 512)->Complexity(benchmark::oNCubed);

void BM_Rasterize(benchmark::State& state) {
  ObjectParams p;
  p.part_function = "pour-with";
  const auto obj = make_object(ObjectKind::kCompositeSpout, p, 3);
  const int size = static_cast<int>(state.range(0));
  const Camera cam = orbit_camera(Vec3(0, 0, 0.1), 0.65, 0.4, 0.5, 260.0 * size / 224.0, size);
  for (auto _ : state) benchmark::DoNotOptimize(rasterize(obj, cam).depth.data.data());
}
BENCHMARK(BM_Rasterize)->Arg(112)->Arg(224);

void BM_MultiviewPairs(benchmark::State& state) {
  ObjectParams p;
  p.part_function = "pour-with";
  const auto obj = make_object(ObjectKind::kCompositeSpout, p, 3);
  auto view = [&](double az) {
    const Camera cam = orbit_camera(Vec3(0, 0, 0.1), 0.65, az, 0.5, 260.0, 224);
    const RasterOutput r = rasterize(obj, cam);
    return CameraView{cam, r.depth, r.object_mask};
  };
  const CameraView a = view(0.2), b = view(0.6);
  for (auto _ : state) benchmark::DoNotOptimize(multiview_pairs(a, b).size());
}
BENCHMARK(BM_MultiviewPairs);

FeatureGrid random_grid(int side, int channels, int stride, std::uint64_t seed) {
  FeatureGrid g;
  g.grid_h = g.grid_w = side;
  g.channels = channels;
  g.stride = stride;
  g.image_height = g.image_width = side * stride;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (auto& b : g.blocks) {
    b.resize(static_cast<std::size_t>(side) * side * channels);
    for (auto& v : b) v = n(rng);
  }
  g.object_mask = Mask(g.image_height, g.image_width, 1);
  return g;
}

void BM_ComputeGradient(benchmark::State& state) {
  const int points = static_cast<int>(state.range(0));
  const FeatureGrid g1 = random_grid(16, 32, 14, 1), g2 = random_grid(16, 32, 14, 2);
  const FunctionEmbedding fn = hash_function_embedding("pour-with", 16);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> px(0, 16 * 14 - 1);
  auto pixels = [&] {
    std::vector<Pixel> v;
    for (int i = 0; i < points; ++i) v.push_back({px(rng), px(rng)});
    return v;
  };
  Batch batch;
  FuncPairSample f{&g1, &g2, &fn, pixels(), pixels(), pixels(), pixels()};
  batch.func.push_back(f);
  SpatialPairSample s{&g1, &g2, &fn, {}};
  const auto a = pixels(), b = pixels();
  for (int i = 0; i < points; ++i) s.pairs.push_back({a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]});
  batch.spatial.push_back(s);
  TrainConfig cfg;
  cfg.head.hidden = 256;
  cfg.head.output_dim = 64;
  const auto params = EmbeddingHeadParams::initialize(cfg.head, 4);
  for (auto _ : state) benchmark::DoNotOptimize(compute_gradient(params, batch, cfg).loss.total);
  state.SetItemsProcessed(state.iterations() * points * 6);
}
BENCHMARK(BM_ComputeGradient)->Arg(32)->Arg(128);

void BM_Discovery(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Mask m(side, side, 1);
  const auto a = random_embedded_view(m, 32, 1), b = random_embedded_view(m, 32, 2);
  CorrespondenceSet gt;
  for (int i = 0; i < side; ++i) gt.pairs.push_back({{i, i}, {i, side - 1 - i}});
  const auto grid = default_t_grid();
  for (auto _ : state) benchmark::DoNotOptimize(discovery(a, b, gt, 10.0, grid).ap);
}
BENCHMARK(BM_Discovery)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
