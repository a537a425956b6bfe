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


#include "dfc/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace dfc {
namespace {

using testing::error_code_of;

Mask full_mask(int h, int w) { return Mask(h, w, 1); }

EmbeddedView constant_view(const Mask& m, int dims) {
  std::size_t n = 0;
  for (auto v : m.data) n += v != 0;
  EmbeddingMatrix e = EmbeddingMatrix::Zero(static_cast<Eigen::Index>(n), dims);
  e.col(0).setOnes();
  return EmbeddedView(m, e);
}

// Greedy matching in rank order: each candidate takes the unconsumed GT pair
// with both endpoints strictly within k, smallest max endpoint distance first,
// then lowest index.
std::vector<int> brute_force_hits(const std::vector<RankedPair>& ranked, const CorrespondenceSet& gt,
                                  double k) {
  std::vector<bool> used(gt.size(), false);
  std::vector<int> hits;
  for (const auto& c : ranked) {
    int best = -1;
    double best_d = 1e300;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (used[g]) continue;
      const double da = std::hypot(c.pair.a.row - gt.pairs[g].a.row, c.pair.a.col - gt.pairs[g].a.col);
      const double db = std::hypot(c.pair.b.row - gt.pairs[g].b.row, c.pair.b.col - gt.pairs[g].b.col);
      if (da >= k || db >= k) continue;
      if (std::max(da, db) < best_d) {
        best_d = std::max(da, db);
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) used[static_cast<std::size_t>(best)] = true;
    hits.push_back(best >= 0);
  }
  return hits;
}

TEST(Match, RandomViewMatchesItself) {
  const auto v = random_embedded_view(full_mask(12, 15), 32, 4);
  const auto out = transfer_match(v, v, v.pixels());
  EXPECT_EQ(out, v.pixels());
}

TEST(Match, TiesGoToLowestPixel) {
  Mask m(6, 6, 0);
  m.at(2, 3) = m.at(4, 1) = m.at(5, 5) = 1;
  const auto v = constant_view(m, 4);
  const std::vector<Pixel> q = {{5, 5}, {4, 1}};
  const auto out = transfer_match(v, v, q);
  EXPECT_EQ(out[0], (Pixel{2, 3}));
  EXPECT_EQ(out[1], (Pixel{2, 3}));
}

TEST(Match, SearchesPartMaskWhenPresent) {
  Mask part(6, 6, 0);
  part.at(4, 4) = 1;
  auto v = constant_view(full_mask(6, 6), 4);
  v.set_part_mask(part);
  const std::vector<Pixel> q = {{0, 0}};
  EXPECT_EQ(transfer_match(v, v, q)[0], (Pixel{4, 4}));
  EXPECT_EQ(transfer_match(v, v, q, false)[0], (Pixel{0, 0}));
}

TEST(LabelTransfer, PckIsStrictAndDistanceNormalized) {
  CorrespondenceSet gt;
  gt.pairs = {{{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}};
  const std::vector<Pixel> m = {{0, 10}, {6, 8}, {0, 9}, {0, 0}};
  const std::vector<int> ks = {10, 23};
  const auto r = label_transfer_metrics(m, gt, 100.0, ks);
  EXPECT_DOUBLE_EQ(r.pck.at(10), 0.5);
  EXPECT_DOUBLE_EQ(r.pck.at(23), 1.0);
  EXPECT_DOUBLE_EQ(r.normalized_dist, (10 + 10 + 9 + 0) / 4.0 / 100.0);
  EXPECT_EQ(error_code_of([&] { label_transfer_metrics(std::span(m).first(3), gt, 100.0, ks); }),
            ErrorCode::kShapeMismatch);
}

TEST(PrCurve, HandExample) {
  CorrespondenceSet gt;
  gt.pairs = {{{10, 10}, {20, 20}}, {{40, 40}, {50, 50}}};
  std::vector<RankedPair> ranked = {
      {{{11, 10}, {20, 21}}, 0.9, false},
      {{{80, 80}, {80, 80}}, 0.8, false},
      {{{10, 10}, {70, 70}}, 0.7, false},
      {{{40, 41}, {50, 52}}, 0.6, false},
  };
  const std::vector<double> t = {0.25, 0.5, 0.75, 1.0};
  const auto c = pr_curve(ranked, gt, 10.0, t);
  ASSERT_EQ(c.points.size(), 4u);
  EXPECT_DOUBLE_EQ(c.points[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(c.points[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(c.points[3].recall, 1.0);
  EXPECT_DOUBLE_EQ(c.ap, 0.75);
  EXPECT_NEAR(c.best_f1, 2.0 / 3.0, 1e-12);
}

TEST(PrCurve, EachGroundTruthPairMatchesOnce) {
  CorrespondenceSet gt;
  gt.pairs = {{{5, 5}, {5, 5}}};
  std::vector<RankedPair> ranked = {{{{5, 5}, {5, 5}}, 1.0, false}, {{{5, 6}, {5, 6}}, 0.9, false}};
  const std::vector<double> t = {1.0};
  const auto c = pr_curve(ranked, gt, 10.0, t);
  EXPECT_DOUBLE_EQ(c.points[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(c.points[0].recall, 1.0);
}

TEST(PrCurve, AgreesWithBruteForce) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> u(0, 60);
  for (int trial = 0; trial < 20; ++trial) {
    CorrespondenceSet gt;
    for (int i = 0; i < 40; ++i) gt.pairs.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
    std::vector<RankedPair> ranked;
    for (int i = 0; i < 150; ++i) {
      const auto& g = gt.pairs[static_cast<std::size_t>(i % 40)];
      std::uniform_int_distribution<int> jitter(-12, 12);
      ranked.push_back({{{g.a.row + jitter(rng), g.a.col + jitter(rng)},
                         {g.b.row + jitter(rng), g.b.col + jitter(rng)}},
                        0.0, false});
    }
    const double k = trial % 2 ? 10.0 : 6.5;
    const auto hits = brute_force_hits(ranked, gt, k);
    const auto grid = default_t_grid();
    const auto c = pr_curve(ranked, gt, k, grid);
    for (const auto& p : c.points) {
      const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(p.t * 150 - 1e-9)));
      const int matched = std::accumulate(hits.begin(), hits.begin() + static_cast<long>(count), 0);
      EXPECT_DOUBLE_EQ(p.precision, matched / static_cast<double>(count));
      EXPECT_DOUBLE_EQ(p.recall, matched / 40.0);
    }
  }
}

TEST(PrCurve, RejectsBadGrid) {
  CorrespondenceSet gt;
  gt.pairs = {{{0, 0}, {0, 0}}};
  const std::vector<RankedPair> ranked = {{{{0, 0}, {0, 0}}, 1.0, false}};
  const std::vector<double> bad = {0.5, 0.4};
  EXPECT_EQ(error_code_of([&] { pr_curve(ranked, gt, 10.0, bad); }), ErrorCode::kInvalidArgument);
  const std::vector<double> ok = {1.0};
  EXPECT_EQ(error_code_of([&] { pr_curve(ranked, CorrespondenceSet{}, 10.0, ok); }), ErrorCode::kEmpty);
}

TEST(Discovery, PerfectEmbeddingsGiveUnitAp) {
  const auto v = random_embedded_view(full_mask(10, 10), 32, 8);
  CorrespondenceSet gt;
  for (const auto& p : v.pixels()) gt.pairs.push_back({p, p});
  const auto grid = default_t_grid();
  const auto c = discovery(v, v, gt, 1.0, grid);
  EXPECT_DOUBLE_EQ(c.ap, 1.0);
  EXPECT_DOUBLE_EQ(c.best_f1, 1.0);
}

TEST(Discovery, PriorityTierComesFirst) {
  Mask part(8, 8, 0);
  part.at(7, 7) = 1;
  auto v = random_embedded_view(full_mask(8, 8), 16, 2, part);
  const auto ranked = rank_candidates(v, v);
  ASSERT_EQ(ranked.size(), 64u);
  EXPECT_TRUE(ranked[0].priority);
  EXPECT_EQ(ranked[0].pair.a, (Pixel{7, 7}));
  for (std::size_t i = 1; i < ranked.size(); ++i) EXPECT_FALSE(ranked[i].priority);
}

TEST(MaskIou, HandCases) {
  Mask a(2, 2, 0), b(2, 2, 0);
  a.at(0, 0) = a.at(0, 1) = 1;
  b.at(0, 0) = 1;
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 0.5);
  Mask c(2, 2, 0);
  c.at(1, 1) = 1;
  EXPECT_DOUBLE_EQ(mask_iou(a, c), 0.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
  EXPECT_EQ(error_code_of([&] { mask_iou(a, Mask(3, 2, 0)); }), ErrorCode::kShapeMismatch);
}

TEST(Chance, PckMatchesUniformExpectation) {
  const Mask m = full_mask(30, 30);
  const auto a = random_embedded_view(m, 8, 1);
  const auto b = random_embedded_view(m, 8, 2);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(0, 29);
  CorrespondenceSet gt;
  for (int i = 0; i < 60; ++i) gt.pairs.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
  double expected = 0.0;
  for (const auto& g : gt.pairs) {
    int inside = 0;
    for (const auto& p : b.pixels()) inside += std::hypot(p.row - g.b.row, p.col - g.b.col) < 10.0;
    expected += inside / static_cast<double>(b.pixels().size());
  }
  expected /= static_cast<double>(gt.size());
  const std::vector<int> ks = {10};
  const auto grid = default_t_grid();
  const auto ref = chance_reference(a, b, gt, ks, grid, 5, 100);
  EXPECT_NEAR(ref.pck.at(10), expected, 0.02);
  const auto again = chance_reference(a, b, gt, ks, grid, 5, 100);
  EXPECT_EQ(again.ap.at(10), ref.ap.at(10));
  EXPECT_GT(ref.ap.at(10), 0.0);
  EXPECT_LT(ref.ap.at(10), 1.0);
}

TEST(RandomView, UnitRowsAndSeeded) {
  const auto a = random_embedded_view(full_mask(5, 7), 16, 3);
  const auto b = random_embedded_view(full_mask(5, 7), 16, 3);
  EXPECT_EQ(a.embeddings(), b.embeddings());
  for (Eigen::Index i = 0; i < a.embeddings().rows(); ++i) {
    EXPECT_NEAR(a.embeddings().row(i).norm(), 1.0, 1e-5);
  }
}

TEST(Oracle, SameSurfacePointSameEmbedding) {
  const auto s = testing::cube_scene(96);
  const auto va = oracle_embedded_view(s.view_a, RigidTransform::identity(), Vec3::Constant(0.4));
  const auto vb = oracle_embedded_view(s.view_b, RigidTransform::identity(), Vec3::Constant(0.4));
  const auto pairs = multiview_pairs(s.view_a, s.view_b);
  ASSERT_GT(pairs.size(), 100u);
  double worst = 0.0;
  for (const auto& pp : pairs.pairs) {
    const auto ea = va.embeddings().row(va.row_of(pp.a));
    const auto eb = vb.embeddings().row(vb.row_of(pp.b));
    worst = std::max(worst, static_cast<double>((ea - eb).norm()));
    EXPECT_NEAR(ea.norm(), 1.0, 1e-5);
  }
  EXPECT_LT(worst, 0.05);
}

}  // namespace
}  // namespace dfc
