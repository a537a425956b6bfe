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


#include "dfc/losses.h"

#include <array>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace dfc {
namespace {

using testing::error_code_of;
using testing::random_unit_rows;

Eigen::MatrixXd repeat_row(const Eigen::RowVectorXd& r, int n) { return r.replicate(n, 1); }

TEST(LossFunc, IdenticalEmbeddingsGiveLn3) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd e = repeat_row(random_unit_rows(1, 8, rng).row(0), 5);
  EXPECT_NEAR(loss_func(e, e, e, e, 0.07), std::log(3.0), 1e-9);
}

TEST(LossFunc, SeparatedCaseNearZero) {
  Eigen::MatrixXd u(1, 2), v(1, 2);
  u << 1, 0;
  v << -1, 0;
  // sim(p1+, p2+) = 1, sim(p1+, p2-) = -1, sim(p1-, p2-) = -1.
  const double l = loss_func(u, u, u, v, 0.07);
  EXPECT_LT(l, 1e-12);
  EXPECT_NEAR(l, std::log1p(2.0 * std::exp(-2.0 / 0.07)), 1e-15);
}

TEST(LossFunc, HighTemperatureSaturates) {
  std::mt19937_64 rng(2);
  const auto a = random_unit_rows(6, 8, rng), b = random_unit_rows(6, 8, rng);
  const auto c = random_unit_rows(6, 8, rng), d = random_unit_rows(6, 8, rng);
  EXPECT_NEAR(loss_func(a, b, c, d, 1e6), std::log(3.0), 1e-5);
}

TEST(LossFunc, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::array<Eigen::MatrixXd, 4> m = {random_unit_rows(4, 5, rng), random_unit_rows(4, 5, rng),
                                      random_unit_rows(4, 5, rng), random_unit_rows(4, 5, rng)};
  FuncLossGrad g;
  loss_func(m[0], m[1], m[2], m[3], 0.3, &g);
  const std::array<Eigen::MatrixXd*, 4> grads = {&g.p1_pos, &g.p1_neg, &g.p2_pos, &g.p2_neg};
  // Unit-norm rows are only checked on input, so raw perturbations are fine
  // as long as they stay within tolerance.
  const double h = 1e-6;
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < m[k].size(); ++i) {
      auto plus = m, minus = m;
      plus[k].data()[i] += h;
      minus[k].data()[i] -= h;
      const double num = (loss_func(plus[0], plus[1], plus[2], plus[3], 0.3) -
                          loss_func(minus[0], minus[1], minus[2], minus[3], 0.3)) /
                         (2 * h);
      EXPECT_NEAR(num, grads[k]->data()[i], 1e-7) << k << " " << i;
    }
  }
}

TEST(LossFunc, RejectsBadInputs) {
  Eigen::MatrixXd u(2, 2);
  u << 1, 0, 0, 1;
  Eigen::MatrixXd not_unit = u * 2.0;
  EXPECT_EQ(error_code_of([&] { loss_func(not_unit, u, u, u, 0.1); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([&] { loss_func(u, u, u, u, 0.0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([&] { loss_func(u, u.topRows(1), u, u, 0.1); }), ErrorCode::kShapeMismatch);
}

TEST(LossSpatial, UniformSimilarities) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd e = repeat_row(random_unit_rows(1, 6, rng).row(0), 3);
  const std::vector<Eigen::MatrixXd> one(3, e.topRows(1));
  EXPECT_NEAR(loss_spatial(e, e, one, 0.07), std::log(2.0), 1e-9);
  const std::vector<Eigen::MatrixXd> many(3, repeat_row(e.row(0), 127));
  EXPECT_NEAR(loss_spatial(e, e, many, 0.07), std::log(128.0), 1e-9);
}

TEST(LossSpatial, SeparatedCaseNearZero) {
  Eigen::MatrixXd u(1, 2), v(1, 2);
  u << 1, 0;
  v << -1, 0;
  const std::vector<Eigen::MatrixXd> neg = {v.replicate(5, 1)};
  const double l = loss_spatial(u, u, neg, 0.07);
  EXPECT_LT(l, 1e-11);
  EXPECT_NEAR(l, std::log1p(5.0 * std::exp(-2.0 / 0.07)), 1e-15);
}

TEST(LossSpatialInBatch, EqualsExplicitNegativesForm) {
  std::mt19937_64 rng(5);
  const auto a = random_unit_rows(6, 4, rng), p = random_unit_rows(6, 4, rng);
  std::vector<Eigen::MatrixXd> negs;
  for (int i = 0; i < 6; ++i) {
    Eigen::MatrixXd n(5, 4);
    for (int j = 0, k = 0; j < 6; ++j)
      if (j != i) n.row(k++) = p.row(j);
    negs.push_back(n);
  }
  EXPECT_NEAR(loss_spatial_in_batch(a, p, 0.2), loss_spatial(a, p, negs, 0.2), 1e-12);
}

TEST(LossSpatialInBatch, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const auto a = random_unit_rows(5, 3, rng), p = random_unit_rows(5, 3, rng);
  SpatialLossGrad g;
  loss_spatial_in_batch(a, p, 0.15, &g);
  const double h = 1e-6;
  for (int i = 0; i < a.size(); ++i) {
    Eigen::MatrixXd ap = a, am = a, pp = p, pm = p;
    ap.data()[i] += h;
    am.data()[i] -= h;
    pp.data()[i] += h;
    pm.data()[i] -= h;
    EXPECT_NEAR((loss_spatial_in_batch(ap, p, 0.15) - loss_spatial_in_batch(am, p, 0.15)) / (2 * h),
                g.anchors.data()[i], 1e-7);
    EXPECT_NEAR((loss_spatial_in_batch(a, pp, 0.15) - loss_spatial_in_batch(a, pm, 0.15)) / (2 * h),
                g.positives.data()[i], 1e-7);
  }
}

TEST(LossSpatialInBatch, NeedsTwoAnchors) {
  std::mt19937_64 rng(7);
  const auto a = random_unit_rows(1, 3, rng);
  EXPECT_EQ(error_code_of([&] { loss_spatial_in_batch(a, a, 0.1); }), ErrorCode::kShapeMismatch);
}

TEST(LossMask, ClosedForms) {
  const std::vector<std::uint8_t> zero = {0}, one = {1};
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
  EXPECT_NEAR(loss_mask(z, zero), std::log(2.0), 1e-12);
  EXPECT_NEAR(loss_mask(z, one), std::log(2.0), 1e-12);
  EXPECT_LT(loss_mask(Eigen::VectorXd::Constant(1, 30.0), one), 1e-12);
  Eigen::VectorXd l(2);
  l << -1, 2;
  const std::vector<std::uint8_t> y = {0, 1};
  const double expected = (std::log1p(std::exp(-1.0)) + std::log1p(std::exp(-2.0))) / 2;
  EXPECT_NEAR(loss_mask(l, y), expected, 1e-12);
  EXPECT_NEAR(expected, 0.2201, 1e-4);
}

TEST(LossMask, StableForLargeLogitsAndGradient) {
  Eigen::VectorXd l(3);
  l << 800, -800, 0.3;
  const std::vector<std::uint8_t> y = {0, 1, 1};
  Eigen::VectorXd g;
  const double v = loss_mask(l, y, &g);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, (800 + 800 + std::log1p(std::exp(-0.3))) / 3, 1e-9);
  EXPECT_NEAR(g[0], 1.0 / 3, 1e-12);
  EXPECT_NEAR(g[1], -1.0 / 3, 1e-12);
  EXPECT_NEAR(g[2], (1 / (1 + std::exp(-0.3)) - 1) / 3, 1e-12);
  const std::vector<std::uint8_t> bad = {0, 2, 1};
  EXPECT_EQ(error_code_of([&] { loss_mask(l, bad); }), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace dfc
