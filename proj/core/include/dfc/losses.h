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

#ifndef DFC_LOSSES_H_
#define DFC_LOSSES_H_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dfc {

inline constexpr double kUnitNormTolerance = 1e-3;

// Throws kInvalidArgument when any row norm deviates from 1 by more than
// kUnitNormTolerance.
void check_unit_rows(const Eigen::MatrixXd& m, const char* what);

struct FuncLossGrad {
  Eigen::MatrixXd p1_pos, p1_neg, p2_pos, p2_neg;
};

// Part-level infoNCE over zipped quadruples (row i of each matrix), mean over
// rows. Denominator has exactly three terms:
//   sim(p1+, p2+), sim(p1+, p2-), sim(p1-, p2-).
double loss_func(const Eigen::MatrixXd& p1_pos, const Eigen::MatrixXd& p1_neg,
                 const Eigen::MatrixXd& p2_pos, const Eigen::MatrixXd& p2_neg, double tau,
                 FuncLossGrad* grad = nullptr);

// Multi-view infoNCE with explicit negatives: negatives[i] holds the N_neg x D
// negatives for anchor i.
double loss_spatial(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                    std::span<const Eigen::MatrixXd> negatives, double tau);

struct SpatialLossGrad {
  Eigen::MatrixXd anchors, positives;
};

// Multi-view infoNCE where the negatives of anchor i are the positives of
// every other anchor (N_neg = n - 1).
double loss_spatial_in_batch(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                             double tau, SpatialLossGrad* grad = nullptr);

// Mean binary cross-entropy with logits, log-sum-exp stable.
double loss_mask(const Eigen::VectorXd& logits, std::span<const std::uint8_t> labels,
                 Eigen::VectorXd* grad = nullptr);

}  // namespace dfc

#endif  // DFC_LOSSES_H_
