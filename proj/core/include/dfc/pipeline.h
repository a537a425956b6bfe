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

#ifndef DFC_PIPELINE_H_
#define DFC_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfc/dataset.h"
#include "dfc/groundtruth.h"
#include "dfc/metrics.h"
#include "dfc/pseudolabel.h"
#include "dfc/scenes.h"
#include "dfc/train.h"

namespace dfc {

struct GenScenesConfig {
  int n_objects = 16;
  std::vector<std::string> functions = {"pour-with", "lift-with"};
  int views_per_object = 8;
  std::uint64_t seed = 0;
  int image_size = 224;
  int stride = kDefaultPatchStride;
  int text_channels = 16;
  double camera_distance = 0.65;
  double focal = 260.0;
  // Views are spread evenly over azimuth_spread_deg, centered
  // azimuth_offset_deg away from the part direction.
  double azimuth_spread_deg = 120.0;
  double azimuth_offset_deg = 90.0;
  // Scales the spread of part length, radius and tilt around their midpoints.
  double part_variation = 1.0;
  FeatureFieldConfig features;
};

// Writes manifest.json plus every tensor under `out`. Objects cycle through
// `functions`; each object is aligned with the next object sharing its
// function. Returns the manifest path.
std::filesystem::path cmd_gen_scenes(const GenScenesConfig& config, const std::filesystem::path& out);

// Object kind generated for a function name.
ObjectKind kind_for_function(const std::string& function);

struct SynthDetectionsConfig {
  int trials = 4;
  int jitter_px = 0;
  std::uint64_t seed = 0;
};

// Detections bounding each view's part mask, one per trial, with optional
// uniform jitter of the box edges.
std::vector<Detection> synth_detections(const Dataset& dataset, const SynthDetectionsConfig& config);

struct PseudolabelConfig {
  std::size_t surface_points = 20000;
  std::uint64_t seed = 0;
  MaskExtractionConfig mask;
  bool otsu = true;  // threshold chosen by Otsu instead of mask.threshold
};

struct PseudolabelReport {
  std::filesystem::path manifest;  // manifest pointing at the new part masks
  // object_id -> function -> mean IoU against the input manifest's part
  // masks (only when those exist)
  std::map<std::string, std::map<std::string, double>> mean_iou;
  std::size_t detections = 0;
};

PseudolabelReport cmd_pseudolabel(const std::filesystem::path& manifest,
                                  const std::filesystem::path& detections,
                                  const std::filesystem::path& out,
                                  const PseudolabelConfig& config = {});

struct GtPairInfo {
  std::string pair_id;
  std::string object_id_a;
  std::string object_id_b;
  std::string function;
  int view_a = 0;
  int view_b = 0;
  std::size_t count = 0;
  double residual_mean = 0.0;
  std::string file;  // relative to the gt directory
};

struct DeriveGtConfig {
  ViewSelectionConfig views;
  GroundTruthConfig gt;
};

// One i64 [k, 4] tensor (row_a, col_a, row_b, col_b) plus a JSON sidecar per
// alignment and trial, and gt/index.json. Returns the index entries.
std::vector<GtPairInfo> cmd_derive_gt(const std::filesystem::path& manifest,
                                      const std::filesystem::path& out,
                                      const DeriveGtConfig& config = {});

std::vector<GtPairInfo> read_gt_index(const std::filesystem::path& gt_dir);
CorrespondenceSet read_gt_pairs(const std::filesystem::path& gt_dir, const GtPairInfo& info);

// Trains, then writes out/checkpoint/ and out/loss.csv.
TrainResult cmd_train(const std::filesystem::path& manifest, const TrainConfig& config,
                      const std::filesystem::path& out);

enum class EmbeddingSource { kCheckpoint, kOracle, kRandom };

EmbeddingSource embedding_source_from_name(const std::string& name);
std::string embedding_source_name(EmbeddingSource source);

struct EvalConfig {
  EmbeddingSource source = EmbeddingSource::kCheckpoint;
  std::filesystem::path checkpoint;
  std::vector<int> k_list = {23, 10};
  std::vector<double> t_grid = default_t_grid();
  bool pred_masks = true;
  bool similarity_only = false;
  bool chance = true;
  int chance_trials = 100;
  int random_dims = 32;
  double oracle_scale = 0.4;  // meters
  std::size_t max_pairs = 0;  // 0 = every GT pair
  int threads = 0;            // 0 = hardware concurrency
  int save_matches = 100;     // ranked pairs kept per pair for rendering
  std::uint64_t seed = 0;
};

struct PairMetrics {
  GtPairInfo info;
  LabelTransferMetrics transfer;
  std::map<int, double> best_f1;
  std::map<int, double> ap;
  std::optional<double> mask_iou_a;
  std::optional<double> mask_iou_b;
  std::optional<ChanceReference> chance;
};

struct EvalSummary {
  std::vector<PairMetrics> pairs;  // GT index order
  PairMetrics mean;                // info.pair_id = "mean"
};

// Evaluates every GT pair and writes out/metrics/<pair_id>.json,
// out/matches/<pair_id>.dftc, out/metrics.csv and out/aggregate.json.
EvalSummary cmd_eval(const std::filesystem::path& manifest, const std::filesystem::path& gt_dir,
                     const EvalConfig& config, const std::filesystem::path& out);

nlohmann::ordered_json pair_metrics_to_json(const PairMetrics& m);
std::string metrics_csv(const EvalSummary& summary, const std::vector<int>& k_list);

// Draws the top `top_n` saved matches of one evaluated pair. Returns the
// number of line segments drawn.
int cmd_render(const std::filesystem::path& manifest, const std::filesystem::path& eval_dir,
               const std::string& pair_id, int top_n, const std::filesystem::path& out_png);

}  // namespace dfc

#endif  // DFC_PIPELINE_H_
