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

#ifndef DFC_METRICS_H_
#define DFC_METRICS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dfc/camera.h"
#include "dfc/image.h"

namespace dfc {

using EmbeddingMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unit embeddings for every object-mask pixel of one view, rows in
// row-major pixel order.
class EmbeddedView {
 public:
  EmbeddedView(Mask object_mask, EmbeddingMatrix embeddings,
               std::optional<Mask> part_mask = std::nullopt);

  int height() const { return object_mask_.height; }
  int width() const { return object_mask_.width; }
  const Mask& object_mask() const { return object_mask_; }
  const std::optional<Mask>& part_mask() const { return part_mask_; }
  const std::vector<Pixel>& pixels() const { return pixels_; }
  const EmbeddingMatrix& embeddings() const { return embeddings_; }
  int dims() const { return static_cast<int>(embeddings_.cols()); }

  // Row of `p` in embeddings(), or -1 outside the object mask.
  int row_of(Pixel p) const;
  void set_part_mask(std::optional<Mask> part_mask);
  // Rows searched when matching into this view: the part mask when present
  // and `use_part_mask` is set, else the whole object mask.
  std::vector<int> search_rows(bool use_part_mask) const;

 private:
  Mask object_mask_;
  std::optional<Mask> part_mask_;
  std::vector<Pixel> pixels_;
  std::vector<int> index_;
  EmbeddingMatrix embeddings_;
};

struct MatchResult {
  std::vector<int> dst_rows;  // rows into dst.pixels()
  std::vector<float> similarity;
};

// Nearest neighbour by dot product over dst's search region for each source
// row; ties go to the lowest row-major pixel.
MatchResult match_rows(const EmbeddedView& src, std::span<const int> src_rows,
                       const EmbeddedView& dst, bool use_part_mask = true);

std::vector<Pixel> transfer_match(const EmbeddedView& src, const EmbeddedView& dst,
                                  std::span<const Pixel> queries, bool use_part_mask = true);

struct LabelTransferMetrics {
  double normalized_dist = 0.0;
  std::map<int, double> pck;  // k -> fraction with error < k
};

LabelTransferMetrics label_transfer_metrics(std::span<const Pixel> matches,
                                            const CorrespondenceSet& gt, double image_side,
                                            std::span<const int> k_list);

struct PRPoint {
  double t = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;
  double best_f1 = 0.0;
  double ap = 0.0;
};

double ap_from_points(std::span<const PRPoint> points);
double best_f1_from_points(std::span<const PRPoint> points);

// 0.01, 0.02, ..., 1.00.
std::vector<double> default_t_grid();

struct RankedPair {
  PixelPair pair;
  double score = 0.0;
  bool priority = false;  // both endpoints inside the predicted part masks
};

struct DiscoveryOptions {
  bool use_part_masks = true;
  bool similarity_only = false;
};

// Scores every pixel of a's object mask by forward and backward matching
// and returns the candidates in rank order: priority tier first, then score
// descending, then (row, col) of the a endpoint.
std::vector<RankedPair> rank_candidates(const EmbeddedView& a, const EmbeddedView& b,
                                        const DiscoveryOptions& options = {});

// Precision/recall sweep over an already ranked candidate list.
PRCurve pr_curve(std::span<const RankedPair> ranked, const CorrespondenceSet& gt, double k,
                 std::span<const double> t_grid);

PRCurve discovery(const EmbeddedView& a, const EmbeddedView& b, const CorrespondenceSet& gt,
                  double k, std::span<const double> t_grid, const DiscoveryOptions& options = {});

double mask_iou(const Mask& pred, const Mask& gt);

struct ChanceReference {
  double normalized_dist = 0.0;
  std::map<int, double> pck;
  std::map<int, double> best_f1;
  std::map<int, double> ap;
};

// Mean metrics of `trials` random matchings: each query maps to a uniformly
// drawn pixel of b's search region and each candidate gets a uniform score.
ChanceReference chance_reference(const EmbeddedView& a, const EmbeddedView& b,
                                 const CorrespondenceSet& gt, std::span<const int> k_list,
                                 std::span<const double> t_grid, std::uint64_t seed,
                                 int trials = 100, bool use_part_masks = true);

// Seeded random unit vectors for every object-mask pixel.
EmbeddedView random_embedded_view(const Mask& object_mask, int dims, std::uint64_t seed,
                                  std::optional<Mask> part_mask = std::nullopt);

// Embeds each object-mask pixel by the inverse stereographic projection of
// its back-projected surface point expressed in a shared frame:
// y = (2u, |u|^2 - 1) / (|u|^2 + 1) with u = frame_from_world(x) / scale per axis.
EmbeddedView oracle_embedded_view(const CameraView& view, const RigidTransform& frame_from_world,
                                  const Vec3& scale,
                                  std::optional<Mask> part_mask = std::nullopt);

}  // namespace dfc

#endif  // DFC_METRICS_H_
