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

#ifndef DFC_TRAIN_H_
#define DFC_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfc/camera.h"
#include "dfc/dataset.h"
#include "dfc/embedding.h"

namespace dfc {

enum class SpatialSampling { kFunctionalPart, kWholeObject };

std::string spatial_sampling_name(SpatialSampling s);
SpatialSampling spatial_sampling_from_name(const std::string& name);

struct TrainConfig {
  double lr = 1e-4;
  int batch_pairs = 50;
  int points_per_image = 128;
  double lambda_func = 1.0;
  double lambda_spatial = 10.0;
  double lambda_mask = 1.0;
  double tau = 0.07;
  int epochs = 100;
  int steps_per_epoch = 1;
  std::uint64_t seed = 0;
  SpatialSampling spatial_sampling = SpatialSampling::kFunctionalPart;
  double occlusion_tol = kDefaultOcclusionTolerance;
  HeadConfig head;

  void validate() const;
};

nlohmann::ordered_json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& json);

// One image pair sharing a function, with equally many sampled points per
// role; row i of the four lists forms one quadruple.
struct FuncPairSample {
  const FeatureGrid* grid_1 = nullptr;
  const FeatureGrid* grid_2 = nullptr;
  const FunctionEmbedding* function = nullptr;
  std::vector<Pixel> pos_1, neg_1, pos_2, neg_2;
};

// Corresponding pixels between two views of one object.
struct SpatialPairSample {
  const FeatureGrid* grid_a = nullptr;
  const FeatureGrid* grid_b = nullptr;
  const FunctionEmbedding* function = nullptr;
  std::vector<PixelPair> pairs;
};

struct Batch {
  std::vector<FuncPairSample> func;
  std::vector<SpatialPairSample> spatial;
};

struct LossBreakdown {
  double func = 0.0;
  double spatial = 0.0;
  double mask = 0.0;
  double total = 0.0;
};

// L = lambda_func * L_func + lambda_spatial * L_spatial + lambda_mask * L_mask.
// L_func averages over every quadruple in the batch, L_spatial over every
// anchor (negatives are the other positives of the same sample) and L_mask
// over every L_func point, labelled by part membership. Terms without
// samples, or the mask term without a mask head, contribute 0.
LossBreakdown total_loss(const EmbeddingHeadParams& params, const Batch& batch,
                         const TrainConfig& config);

struct GradientResult {
  LossBreakdown loss;
  EmbeddingHeadParams grad;
};

// Exact gradient of total_loss. Throws kNonFinite naming the parameter when
// any gradient entry is not finite.
GradientResult compute_gradient(const EmbeddingHeadParams& params, const Batch& batch,
                                const TrainConfig& config);

// Draws training batches from a dataset. Multi-view correspondences are
// computed once per view pair and cached.
class BatchSampler {
 public:
  BatchSampler(const Dataset& dataset, const TrainConfig& config);

  Batch sample(std::mt19937_64& rng);
  std::size_t skipped() const { return skipped_; }

 private:
  struct FunctionPair {
    std::size_t object_1, object_2;
    std::string function;
  };

  bool sample_func(std::mt19937_64& rng, const FunctionPair& fp, FuncPairSample& out);
  bool sample_spatial(std::mt19937_64& rng, std::size_t object, int view_a,
                      const std::string& function, SpatialPairSample& out);
  const std::vector<PixelPair>& correspondences(std::size_t object, int view_a, int view_b,
                                                const std::string& function);

  const Dataset& dataset_;
  TrainConfig config_;
  std::vector<FunctionPair> pairs_;
  std::map<std::tuple<std::size_t, int, int, std::string>, std::vector<PixelPair>> cache_;
  std::size_t skipped_ = 0;
};

struct LossRecord {
  int epoch = 0;
  LossBreakdown loss;
};

struct TrainResult {
  EmbeddingHeadParams params;
  // Row 0 is the initial head; row e follows epoch e. Every row is measured
  // on the same fixed monitor batch.
  std::vector<LossRecord> curve;
  std::size_t skipped_pairs = 0;
};

TrainResult train(const Dataset& dataset, const TrainConfig& config);

void write_loss_csv(const std::vector<LossRecord>& curve, const std::filesystem::path& path);
std::string loss_csv(const std::vector<LossRecord>& curve);

// Checkpoint directory: params.json index, one f64 tensor per parameter
// (weights stored [out, in] row-major) and config.json.
void save_checkpoint(const EmbeddingHeadParams& params, const TrainConfig& config,
                     const std::filesystem::path& dir);
EmbeddingHeadParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace dfc

#endif  // DFC_TRAIN_H_
