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

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "dfc/error.h"

namespace dfc {

void check_unit_rows(const Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) {
      fail(ErrorCode::kInvalidArgument, std::string(what) + " row " + std::to_string(i) +
                                            " is not unit-norm (" + std::to_string(norm) + ")");
    }
  }
}

namespace {

void check_tau(double tau) {
  require(std::isfinite(tau) && tau > 0.0, ErrorCode::kInvalidArgument, "temperature must be > 0");
}

double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

double loss_func(const Eigen::MatrixXd& p1_pos, const Eigen::MatrixXd& p1_neg,
                 const Eigen::MatrixXd& p2_pos, const Eigen::MatrixXd& p2_neg, double tau,
                 FuncLossGrad* grad) {
  check_tau(tau);
  const Eigen::Index n = p1_pos.rows();
  require(n > 0 && p1_neg.rows() == n && p2_pos.rows() == n && p2_neg.rows() == n,
          ErrorCode::kShapeMismatch, "loss_func needs four equally sized point sets");
  require(p1_neg.cols() == p1_pos.cols() && p2_pos.cols() == p1_pos.cols() &&
              p2_neg.cols() == p1_pos.cols(),
          ErrorCode::kShapeMismatch, "loss_func embedding widths differ");
  check_unit_rows(p1_pos, "p1_pos");
  check_unit_rows(p1_neg, "p1_neg");
  check_unit_rows(p2_pos, "p2_pos");
  check_unit_rows(p2_neg, "p2_neg");

  if (grad) {
    grad->p1_pos = Eigen::MatrixXd::Zero(n, p1_pos.cols());
    grad->p1_neg = grad->p1_pos;
    grad->p2_pos = grad->p1_pos;
    grad->p2_neg = grad->p1_pos;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::array<double, 3> logits = {p1_pos.row(i).dot(p2_pos.row(i)) / tau,
                                          p1_pos.row(i).dot(p2_neg.row(i)) / tau,
                                          p1_neg.row(i).dot(p2_neg.row(i)) / tau};
    const double lse = log_sum_exp(logits);
    total += lse - logits[0];
    if (grad) {
      const double scale = 1.0 / (static_cast<double>(n) * tau);
      const double ga = (std::exp(logits[0] - lse) - 1.0) * scale;
      const double gb = std::exp(logits[1] - lse) * scale;
      const double gc = std::exp(logits[2] - lse) * scale;
      grad->p1_pos.row(i) = ga * p2_pos.row(i) + gb * p2_neg.row(i);
      grad->p2_pos.row(i) = ga * p1_pos.row(i);
      grad->p2_neg.row(i) = gb * p1_pos.row(i) + gc * p1_neg.row(i);
      grad->p1_neg.row(i) = gc * p2_neg.row(i);
    }
  }
  return total / static_cast<double>(n);
}

double loss_spatial(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                    std::span<const Eigen::MatrixXd> negatives, double tau) {
  check_tau(tau);
  const Eigen::Index n = anchors.rows();
  require(n > 0 && positives.rows() == n && static_cast<Eigen::Index>(negatives.size()) == n,
          ErrorCode::kShapeMismatch, "loss_spatial needs one positive and negative set per anchor");
  check_unit_rows(anchors, "anchors");
  check_unit_rows(positives, "positives");
  double total = 0.0;
  std::vector<double> logits;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& neg = negatives[i];
    require(neg.rows() >= 1 && neg.cols() == anchors.cols(), ErrorCode::kShapeMismatch,
            "each anchor needs >= 1 negative of matching width");
    check_unit_rows(neg, "negatives");
    logits.assign(1, anchors.row(i).dot(positives.row(i)) / tau);
    for (Eigen::Index j = 0; j < neg.rows(); ++j) logits.push_back(anchors.row(i).dot(neg.row(j)) / tau);
    total += log_sum_exp(logits) - logits[0];
  }
  return total / static_cast<double>(n);
}

double loss_spatial_in_batch(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                             double tau, SpatialLossGrad* grad) {
  check_tau(tau);
  const Eigen::Index n = anchors.rows();
  require(n >= 2 && positives.rows() == n && positives.cols() == anchors.cols(),
          ErrorCode::kShapeMismatch, "in-batch spatial loss needs >= 2 matched anchors");
  check_unit_rows(anchors, "anchors");
  check_unit_rows(positives, "positives");
  const Eigen::MatrixXd logits = anchors * positives.transpose() / tau;
  Eigen::MatrixXd probs(n, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    const double s = e.sum();
    total += m + std::log(s) - logits(i, i);
    probs.row(i) = e / s;
  }
  if (grad) {
    Eigen::MatrixXd g = probs;
    g.diagonal().array() -= 1.0;
    g /= static_cast<double>(n) * tau;
    grad->anchors = g * positives;
    grad->positives = g.transpose() * anchors;
  }
  return total / static_cast<double>(n);
}

double loss_mask(const Eigen::VectorXd& logits, std::span<const std::uint8_t> labels,
                 Eigen::VectorXd* grad) {
  const Eigen::Index n = logits.size();
  require(n > 0 && static_cast<Eigen::Index>(labels.size()) == n, ErrorCode::kShapeMismatch,
          "mask logits and labels differ in length");
  if (grad) grad->resize(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    require(labels[i] <= 1, ErrorCode::kInvalidArgument, "mask labels must be 0 or 1");
    const double z = logits[i];
    const double y = labels[i];
    total += std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
    if (grad) {
      const double sigmoid = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      (*grad)[i] = (sigmoid - y) / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace dfc
