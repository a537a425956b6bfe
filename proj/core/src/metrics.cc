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
#include <array>
#include <climits>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "dfc/error.h"
#include "dfc/random.h"

namespace dfc {

namespace {

constexpr std::size_t kMatchChunk = 1024;

int squared_distance(Pixel a, Pixel b) {
  const int dr = a.row - b.row;
  const int dc = a.col - b.col;
  return dr * dr + dc * dc;
}

double pixel_distance(Pixel a, Pixel b) { return std::sqrt(squared_distance(a, b)); }

void check_same_size(const Mask& a, const Mask& b, const char* what) {
  require(a.height == b.height && a.width == b.width, ErrorCode::kShapeMismatch,
          std::string(what) + ": mask shapes differ");
}

}  // namespace

EmbeddedView::EmbeddedView(Mask object_mask, EmbeddingMatrix embeddings,
                           std::optional<Mask> part_mask)
    : object_mask_(std::move(object_mask)), embeddings_(std::move(embeddings)) {
  pixels_ = mask_pixels(object_mask_);
  require(static_cast<Eigen::Index>(pixels_.size()) == embeddings_.rows(),
          ErrorCode::kShapeMismatch, "embedding rows must match object-mask pixel count");
  index_.assign(object_mask_.data.size(), -1);
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    index_[static_cast<std::size_t>(pixels_[i].row) * object_mask_.width + pixels_[i].col] =
        static_cast<int>(i);
  }
  set_part_mask(std::move(part_mask));
}

int EmbeddedView::row_of(Pixel p) const {
  if (!object_mask_.in_bounds(p)) return -1;
  return index_[static_cast<std::size_t>(p.row) * object_mask_.width + p.col];
}

void EmbeddedView::set_part_mask(std::optional<Mask> part_mask) {
  if (part_mask) {
    check_same_size(*part_mask, object_mask_, "predicted part mask");
    for (std::size_t i = 0; i < part_mask->data.size(); ++i) {
      require(!part_mask->data[i] || object_mask_.data[i], ErrorCode::kInvalidArgument,
              "predicted part mask must lie inside the object mask");
    }
  }
  part_mask_ = std::move(part_mask);
}

std::vector<int> EmbeddedView::search_rows(bool use_part_mask) const {
  std::vector<int> rows;
  if (use_part_mask && part_mask_) {
    for (std::size_t i = 0; i < pixels_.size(); ++i) {
      if (part_mask_->at(pixels_[i])) rows.push_back(static_cast<int>(i));
    }
  } else {
    rows.resize(pixels_.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  }
  return rows;
}

MatchResult match_rows(const EmbeddedView& src, std::span<const int> src_rows,
                       const EmbeddedView& dst, bool use_part_mask) {
  require(src.dims() == dst.dims(), ErrorCode::kShapeMismatch, "embedding widths differ");
  const std::vector<int> region = dst.search_rows(use_part_mask);
  require(!region.empty(), ErrorCode::kEmpty, "empty search region");
  EmbeddingMatrix candidates(static_cast<Eigen::Index>(region.size()), dst.dims());
  for (std::size_t i = 0; i < region.size(); ++i) {
    candidates.row(static_cast<Eigen::Index>(i)) = dst.embeddings().row(region[i]);
  }
  MatchResult result;
  result.dst_rows.resize(src_rows.size());
  result.similarity.resize(src_rows.size());
  EmbeddingMatrix queries;
  Eigen::MatrixXf sims;
  for (std::size_t start = 0; start < src_rows.size(); start += kMatchChunk) {
    const std::size_t end = std::min(src_rows.size(), start + kMatchChunk);
    queries.resize(static_cast<Eigen::Index>(end - start), src.dims());
    for (std::size_t i = start; i < end; ++i) {
      require(src_rows[i] >= 0 && src_rows[i] < static_cast<int>(src.pixels().size()),
              ErrorCode::kOutOfRange, "query row out of range");
      queries.row(static_cast<Eigen::Index>(i - start)) = src.embeddings().row(src_rows[i]);
    }
    sims.noalias() = candidates * queries.transpose();  // region x chunk, column per query
    for (Eigen::Index q = 0; q < sims.cols(); ++q) {
      Eigen::Index best = 0;
      float best_sim = sims(0, q);
      for (Eigen::Index r = 1; r < sims.rows(); ++r) {
        if (sims(r, q) > best_sim) {
          best_sim = sims(r, q);
          best = r;
        }
      }
      result.dst_rows[start + static_cast<std::size_t>(q)] = region[static_cast<std::size_t>(best)];
      result.similarity[start + static_cast<std::size_t>(q)] = best_sim;
    }
  }
  return result;
}

std::vector<Pixel> transfer_match(const EmbeddedView& src, const EmbeddedView& dst,
                                  std::span<const Pixel> queries, bool use_part_mask) {
  std::vector<int> rows;
  rows.reserve(queries.size());
  for (const Pixel& q : queries) {
    const int r = src.row_of(q);
    require(r >= 0, ErrorCode::kInvalidArgument,
            "query (" + std::to_string(q.row) + ", " + std::to_string(q.col) +
                ") is outside the source object mask");
    rows.push_back(r);
  }
  const MatchResult m = match_rows(src, rows, dst, use_part_mask);
  std::vector<Pixel> out;
  out.reserve(rows.size());
  for (int r : m.dst_rows) out.push_back(dst.pixels()[static_cast<std::size_t>(r)]);
  return out;
}

LabelTransferMetrics label_transfer_metrics(std::span<const Pixel> matches,
                                            const CorrespondenceSet& gt, double image_side,
                                            std::span<const int> k_list) {
  require(!gt.empty(), ErrorCode::kEmpty, "empty ground truth");
  require(matches.size() == gt.size(), ErrorCode::kShapeMismatch,
          "one match per ground-truth pair is required");
  require(image_side > 0.0, ErrorCode::kInvalidArgument, "image side must be > 0");
  LabelTransferMetrics m;
  std::map<int, std::size_t> hits;
  for (int k : k_list) hits[k] = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const double d = pixel_distance(matches[i], gt.pairs[i].b);
    total += d;
    for (auto& [k, n] : hits) n += d < k;
  }
  const double n = static_cast<double>(matches.size());
  m.normalized_dist = total / n / image_side;
  for (const auto& [k, h] : hits) m.pck[k] = static_cast<double>(h) / n;
  return m;
}

double ap_from_points(std::span<const PRPoint> points) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const auto& p : points) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

double best_f1_from_points(std::span<const PRPoint> points) {
  double best = 0.0;
  for (const auto& p : points) {
    if (p.precision + p.recall > 0.0) {
      best = std::max(best, 2.0 * p.precision * p.recall / (p.precision + p.recall));
    }
  }
  return best;
}

std::vector<double> default_t_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

namespace {

void sort_ranked(std::vector<RankedPair>& ranked) {
  std::sort(ranked.begin(), ranked.end(), [](const RankedPair& x, const RankedPair& y) {
    if (x.priority != y.priority) return x.priority;
    if (x.score != y.score) return x.score > y.score;
    return x.pair < y.pair;
  });
}

}  // namespace

std::vector<RankedPair> rank_candidates(const EmbeddedView& a, const EmbeddedView& b,
                                        const DiscoveryOptions& options) {
  require(!a.pixels().empty() && !b.pixels().empty(), ErrorCode::kEmpty,
          "discovery needs non-empty object masks");
  std::vector<int> a_rows(a.pixels().size());
  for (std::size_t i = 0; i < a_rows.size(); ++i) a_rows[i] = static_cast<int>(i);
  const MatchResult forward = match_rows(a, a_rows, b, options.use_part_masks);

  // Backward matches only for the distinct b pixels reached.
  std::vector<int> reached = forward.dst_rows;
  std::sort(reached.begin(), reached.end());
  reached.erase(std::unique(reached.begin(), reached.end()), reached.end());
  const MatchResult backward = match_rows(b, reached, a, options.use_part_masks);
  std::unordered_map<int, int> back_of;
  for (std::size_t i = 0; i < reached.size(); ++i) back_of[reached[i]] = backward.dst_rows[i];

  const bool tiers = options.use_part_masks && a.part_mask() && b.part_mask();
  const double diagonal = std::hypot(static_cast<double>(a.height()), static_cast<double>(a.width()));
  std::vector<RankedPair> ranked(a_rows.size());
  for (std::size_t i = 0; i < a_rows.size(); ++i) {
    const Pixel p1 = a.pixels()[i];
    const Pixel p2 = b.pixels()[static_cast<std::size_t>(forward.dst_rows[i])];
    const Pixel q1 = a.pixels()[static_cast<std::size_t>(back_of.at(forward.dst_rows[i]))];
    const double sim = static_cast<double>(forward.similarity[i]);
    const double d_hat = std::min(1.0, pixel_distance(p1, q1) / diagonal);
    ranked[i].pair = {p1, p2};
    ranked[i].score = options.similarity_only ? sim : (1.0 - d_hat) * sim;
    ranked[i].priority = tiers && a.part_mask()->at(p1) && b.part_mask()->at(p2);
  }
  sort_ranked(ranked);
  return ranked;
}

PRCurve pr_curve(std::span<const RankedPair> ranked, const CorrespondenceSet& gt, double k,
                 std::span<const double> t_grid) {
  require(!gt.empty(), ErrorCode::kEmpty, "empty ground truth");
  require(!t_grid.empty(), ErrorCode::kEmpty, "empty t grid");
  require(k > 0.0, ErrorCode::kInvalidArgument, "k must be > 0");
  require(!ranked.empty(), ErrorCode::kEmpty, "no discovery candidates");

  // GT pairs hashed on both endpoints with cell size ceil(k); a candidate
  // only inspects the 3^4 neighbouring cells.
  const int cell = static_cast<int>(std::ceil(k));
  const double k2 = k * k;
  auto floor_div = [](int v, int d) { return v >= 0 ? v / d : -((-v + d - 1) / d); };
  auto key = [](int ar, int ac, int br, int bc) {
    auto u = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint16_t>(v)); };
    return (u(ar) << 48) | (u(ac) << 32) | (u(br) << 16) | u(bc);
  };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  std::array<int, 4> lo{INT_MAX, INT_MAX, INT_MAX, INT_MAX};
  std::array<int, 4> hi{INT_MIN, INT_MIN, INT_MIN, INT_MIN};
  for (std::size_t g = 0; g < gt.size(); ++g) {
    const PixelPair& p = gt.pairs[g];
    const std::array<int, 4> c{floor_div(p.a.row, cell), floor_div(p.a.col, cell),
                               floor_div(p.b.row, cell), floor_div(p.b.col, cell)};
    for (int d = 0; d < 4; ++d) {
      lo[d] = std::min(lo[d], c[d] - 1);
      hi[d] = std::max(hi[d], c[d] + 1);
    }
    buckets[key(floor_div(p.a.row, cell), floor_div(p.a.col, cell), floor_div(p.b.row, cell),
                floor_div(p.b.col, cell))]
        .push_back(g);
  }
  std::vector<std::size_t> matched_prefix(ranked.size() + 1, 0);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const PixelPair& cand = ranked[i].pair;
    const int ar = floor_div(cand.a.row, cell), ac = floor_div(cand.a.col, cell);
    const int br = floor_div(cand.b.row, cell), bc = floor_div(cand.b.col, cell);
    const bool outside = ar < lo[0] || ar > hi[0] || ac < lo[1] || ac > hi[1] || br < lo[2] ||
                         br > hi[2] || bc < lo[3] || bc > hi[3];
    if (outside) {
      matched_prefix[i + 1] = matched_prefix[i];
      continue;
    }
    std::size_t best = gt.size();
    std::vector<std::size_t>* best_bucket = nullptr;
    std::size_t best_slot = 0;
    int best_d = INT_MAX;
    for (int d0 = -1; d0 <= 1; ++d0)
      for (int d1 = -1; d1 <= 1; ++d1)
        for (int d2 = -1; d2 <= 1; ++d2)
          for (int d3 = -1; d3 <= 1; ++d3) {
            const auto it = buckets.find(key(ar + d0, ac + d1, br + d2, bc + d3));
            if (it == buckets.end()) continue;
            for (std::size_t s = 0; s < it->second.size(); ++s) {
              const std::size_t g = it->second[s];
              const int da = squared_distance(cand.a, gt.pairs[g].a);
              const int db = squared_distance(cand.b, gt.pairs[g].b);
              if (!(da < k2 && db < k2)) continue;
              const int d = std::max(da, db);
              if (d < best_d || (d == best_d && g < best)) {
                best_d = d;
                best = g;
                best_bucket = &it->second;
                best_slot = s;
              }
            }
          }
    if (best_bucket) {
      // Consumed pairs leave their bucket.
      (*best_bucket)[best_slot] = best_bucket->back();
      best_bucket->pop_back();
    }
    matched_prefix[i + 1] = matched_prefix[i] + (best_bucket ? 1 : 0);
  }

  PRCurve curve;
  const double n = static_cast<double>(ranked.size());
  double prev_t = 0.0;
  for (double t : t_grid) {
    require(t > prev_t && t <= 1.0, ErrorCode::kInvalidArgument,
            "t grid must be increasing fractions in (0, 1]");
    prev_t = t;
    const auto count = std::min(ranked.size(),
                                std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t * n - 1e-9))));
    const auto matched = static_cast<double>(matched_prefix[count]);
    curve.points.push_back({t, matched / static_cast<double>(count), matched / static_cast<double>(gt.size())});
  }
  curve.best_f1 = best_f1_from_points(curve.points);
  curve.ap = ap_from_points(curve.points);
  return curve;
}

PRCurve discovery(const EmbeddedView& a, const EmbeddedView& b, const CorrespondenceSet& gt,
                  double k, std::span<const double> t_grid, const DiscoveryOptions& options) {
  require(!gt.empty(), ErrorCode::kEmpty, "empty ground truth");
  require(!t_grid.empty(), ErrorCode::kEmpty, "empty t grid");
  const auto ranked = rank_candidates(a, b, options);
  return pr_curve(ranked, gt, k, t_grid);
}

double mask_iou(const Mask& pred, const Mask& gt) {
  check_same_size(pred, gt, "mask_iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool g = gt.data[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

ChanceReference chance_reference(const EmbeddedView& a, const EmbeddedView& b,
                                 const CorrespondenceSet& gt, std::span<const int> k_list,
                                 std::span<const double> t_grid, std::uint64_t seed, int trials,
                                 bool use_part_masks) {
  require(trials > 0, ErrorCode::kInvalidArgument, "trials must be > 0");
  require(!gt.empty(), ErrorCode::kEmpty, "empty ground truth");
  const std::vector<int> region = b.search_rows(use_part_masks);
  require(!region.empty(), ErrorCode::kEmpty, "empty search region");
  const bool tiers = use_part_masks && a.part_mask() && b.part_mask();
  std::mt19937_64 rng(splitmix64(seed ^ 0x6368616e6365ULL));
  std::uniform_int_distribution<std::size_t> pick(0, region.size() - 1);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  const double side = static_cast<double>(std::max(b.height(), b.width()));

  ChanceReference ref;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<Pixel> matches;
    matches.reserve(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
      matches.push_back(b.pixels()[static_cast<std::size_t>(region[pick(rng)])]);
    }
    const auto lt = label_transfer_metrics(matches, gt, side, k_list);
    ref.normalized_dist += lt.normalized_dist;
    for (const auto& [k, v] : lt.pck) ref.pck[k] += v;

    std::vector<RankedPair> ranked(a.pixels().size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const Pixel p2 = b.pixels()[static_cast<std::size_t>(region[pick(rng)])];
      ranked[i].pair = {a.pixels()[i], p2};
      ranked[i].score = score(rng);
      ranked[i].priority = tiers && a.part_mask()->at(a.pixels()[i]) && b.part_mask()->at(p2);
    }
    sort_ranked(ranked);
    for (int k : k_list) {
      const PRCurve c = pr_curve(ranked, gt, k, t_grid);
      ref.best_f1[k] += c.best_f1;
      ref.ap[k] += c.ap;
    }
  }
  const double n = trials;
  ref.normalized_dist /= n;
  for (auto* m : {&ref.pck, &ref.best_f1, &ref.ap}) {
    for (auto& [k, v] : *m) v /= n;
  }
  return ref;
}

EmbeddedView random_embedded_view(const Mask& object_mask, int dims, std::uint64_t seed,
                                  std::optional<Mask> part_mask) {
  require(dims > 0, ErrorCode::kInvalidArgument, "dims must be > 0");
  const auto n = static_cast<Eigen::Index>(count_nonzero(object_mask));
  EmbeddingMatrix e(n, dims);
  std::mt19937_64 rng(splitmix64(seed ^ 0x72616e646f6dULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v(dims);
    do {
      for (int d = 0; d < dims; ++d) v[d] = normal(rng);
    } while (v.norm() == 0.0);
    e.row(i) = (v / v.norm()).cast<float>().transpose();
  }
  return EmbeddedView(object_mask, std::move(e), std::move(part_mask));
}

EmbeddedView oracle_embedded_view(const CameraView& view, const RigidTransform& frame_from_world,
                                  const Vec3& scale, std::optional<Mask> part_mask) {
  require((scale.array() > 0.0).all(), ErrorCode::kInvalidArgument, "oracle scale must be > 0");
  const auto pixels = mask_pixels(view.object_mask);
  EmbeddingMatrix e(static_cast<Eigen::Index>(pixels.size()), 4);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const Vec3 world = backproject(pixels[i], view.depth.at(pixels[i]), view.camera);
    const Vec3 u = frame_from_world.apply(world).cwiseQuotient(scale);
    const double r2 = u.squaredNorm();
    Eigen::Vector4d y(2.0 * u.x(), 2.0 * u.y(), 2.0 * u.z(), r2 - 1.0);
    y /= r2 + 1.0;
    e.row(static_cast<Eigen::Index>(i)) = y.cast<float>().transpose();
  }
  return EmbeddedView(view.object_mask, std::move(e), std::move(part_mask));
}

}  // namespace dfc
