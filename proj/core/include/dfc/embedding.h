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

#ifndef DFC_EMBEDDING_H_
#define DFC_EMBEDDING_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dfc/image.h"
#include "dfc/scenes.h"

namespace dfc {

// Text conditioning vector for one function name.
struct FunctionEmbedding {
  std::string name;
  Eigen::VectorXd vector;
};

// Deterministic stand-in for a text encoder: a unit vector drawn from a
// generator seeded by the FNV-1a hash of the name.
FunctionEmbedding hash_function_embedding(const std::string& name, int dims, std::uint64_t seed = 0);

struct HeadConfig {
  int image_channels = 32;
  int text_channels = 16;
  int hidden = 1024;
  int output_dim = 256;
  bool mask_head = true;
};

inline constexpr int kNumLayers = 3;

// Learnable state of the function-conditioned head: softmax block-fusion
// logits, a 3-layer ReLU MLP (weights stored [out, in]) and an optional
// linear mask row applied to the un-normalized output.
struct EmbeddingHeadParams {
  Eigen::Vector3d block_logits = Eigen::Vector3d::Zero();
  std::array<Eigen::MatrixXd, kNumLayers> weights;
  std::array<Eigen::VectorXd, kNumLayers> biases;
  Eigen::VectorXd mask_weight;  // empty without a mask head
  Eigen::VectorXd mask_bias;    // size 1 with a mask head

  // Uniform He-style weights in +-sqrt(6 / fan_in), zero biases, zero logits.
  static EmbeddingHeadParams initialize(const HeadConfig& config, std::uint64_t seed);
  static EmbeddingHeadParams zeros_like(const EmbeddingHeadParams& other);

  bool has_mask_head() const { return mask_weight.size() > 0; }
  std::size_t num_parameters() const;
  void validate() const;

  // Visits every parameter block in a fixed order with a stable name.
  template <typename F>
  void visit(F&& f) {
    f("block_logits", std::span<double>(block_logits.data(), 3));
    for (int l = 0; l < kNumLayers; ++l) {
      f("mlp." + std::to_string(l) + ".weight",
        std::span<double>(weights[l].data(), static_cast<std::size_t>(weights[l].size())));
      f("mlp." + std::to_string(l) + ".bias",
        std::span<double>(biases[l].data(), static_cast<std::size_t>(biases[l].size())));
    }
    if (has_mask_head()) {
      f("mask_head.weight",
        std::span<double>(mask_weight.data(), static_cast<std::size_t>(mask_weight.size())));
      f("mask_head.bias", std::span<double>(mask_bias.data(), 1));
    }
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<EmbeddingHeadParams*>(this)->visit(
        [&](const std::string& name, std::span<double> s) {
          f(name, std::span<const double>(s.data(), s.size()));
        });
  }

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);
};

Eigen::Vector3d block_weights(const Eigen::Vector3d& logits);

// Single feature plane in double precision, [(r * w + c) * channels + ch].
struct FeaturePlane {
  int grid_h = 0;
  int grid_w = 0;
  int channels = 0;
  std::vector<double> data;
};

FeaturePlane fuse_blocks(const FeatureGrid& grid, const Eigen::Vector3d& block_logits);

// The four grid taps of a bilinear lookup at grid coordinate
// ((row + 0.5) / stride - 0.5, (col + 0.5) / stride - 0.5), clamped to the
// grid edges.
struct BilinearTaps {
  std::array<int, 4> cell;  // r * grid_w + c
  std::array<double, 4> weight;
};
BilinearTaps bilinear_taps(int grid_h, int grid_w, int stride, Pixel pixel);

Eigen::VectorXd sample_feature(const FeaturePlane& plane, Pixel pixel, int stride);

struct PointQuery {
  const FeatureGrid* grid = nullptr;
  Pixel pixel;
  const FunctionEmbedding* function = nullptr;
};

struct HeadOutput {
  Eigen::MatrixXd embeddings;   // n x D, unit rows
  Eigen::VectorXd mask_logits;  // n, empty without a mask head
};

// Intermediate values kept for the backward pass.
struct ForwardCache {
  std::array<Eigen::MatrixXd, 3> block_samples;  // n x C per block
  Eigen::Vector3d fusion_weights;
  Eigen::MatrixXd input;   // n x (C + T)
  Eigen::MatrixXd z1, z2;  // pre-activations
  Eigen::MatrixXd a1, a2;
  Eigen::MatrixXd output;  // n x D before normalization
  Eigen::VectorXd norms;
  HeadOutput result;
};

HeadOutput forward(const EmbeddingHeadParams& params, std::span<const PointQuery> queries);
ForwardCache forward_with_cache(const EmbeddingHeadParams& params,
                                std::span<const PointQuery> queries);

// Accumulates d(loss)/d(params) into `grad` given upstream gradients on the
// unit embeddings (n x D) and on the mask logits (n, or empty).
void backward(const EmbeddingHeadParams& params, const ForwardCache& cache,
              const Eigen::MatrixXd& d_embeddings, const Eigen::VectorXd& d_mask_logits,
              EmbeddingHeadParams& grad);

// Dense evaluation over many pixels of one view, in chunks, without caches.
HeadOutput forward_dense(const EmbeddingHeadParams& params, const FeatureGrid& grid,
                         std::span<const Pixel> pixels, const FunctionEmbedding& function,
                         std::size_t chunk = 4096);

}  // namespace dfc

#endif  // DFC_EMBEDDING_H_
