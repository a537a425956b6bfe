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

#include "dfc/train.h"

#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

#include <spdlog/spdlog.h>

#include "dfc/error.h"
#include "dfc/losses.h"
#include "dfc/manifest.h"
#include "dfc/optimizer.h"
#include "dfc/random.h"
#include "dfc/tensor_store.h"

namespace dfc {

using nlohmann::json;
using nlohmann::ordered_json;

std::string spatial_sampling_name(SpatialSampling s) {
  return s == SpatialSampling::kFunctionalPart ? "part" : "object";
}

SpatialSampling spatial_sampling_from_name(const std::string& name) {
  if (name == "part" || name == "functional_part") return SpatialSampling::kFunctionalPart;
  if (name == "object" || name == "whole_object") return SpatialSampling::kWholeObject;
  fail(ErrorCode::kInvalidArgument, "unknown spatial sampling '" + name + "'");
}

void TrainConfig::validate() const {
  require(std::isfinite(lr) && lr >= 0.0, ErrorCode::kInvalidArgument, "lr must be >= 0");
  require(batch_pairs > 0, ErrorCode::kInvalidArgument, "batch_pairs must be > 0");
  require(points_per_image >= 2, ErrorCode::kInvalidArgument, "points_per_image must be >= 2");
  require(lambda_func >= 0.0 && lambda_spatial >= 0.0 && lambda_mask >= 0.0,
          ErrorCode::kInvalidArgument, "loss weights must be >= 0");
  require(std::isfinite(tau) && tau > 0.0, ErrorCode::kInvalidArgument, "tau must be > 0");
  require(epochs >= 0, ErrorCode::kInvalidArgument, "epochs must be >= 0");
  require(steps_per_epoch > 0, ErrorCode::kInvalidArgument, "steps_per_epoch must be > 0");
  require(occlusion_tol > 0.0, ErrorCode::kInvalidArgument, "occlusion tolerance must be > 0");
  require(head.hidden > 0 && head.output_dim > 0, ErrorCode::kInvalidArgument,
          "head sizes must be > 0");
}

ordered_json train_config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["lr"] = c.lr;
  j["batch_pairs"] = c.batch_pairs;
  j["points_per_image"] = c.points_per_image;
  j["lambda_func"] = c.lambda_func;
  j["lambda_spatial"] = c.lambda_spatial;
  j["lambda_mask"] = c.lambda_mask;
  j["tau"] = c.tau;
  j["epochs"] = c.epochs;
  j["steps_per_epoch"] = c.steps_per_epoch;
  j["seed"] = c.seed;
  j["spatial_sampling"] = spatial_sampling_name(c.spatial_sampling);
  j["occlusion_tol"] = c.occlusion_tol;
  j["head"] = {{"image_channels", c.head.image_channels},
               {"text_channels", c.head.text_channels},
               {"hidden", c.head.hidden},
               {"output_dim", c.head.output_dim},
               {"mask_head", c.head.mask_head}};
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.batch_pairs = j.value("batch_pairs", c.batch_pairs);
  c.points_per_image = j.value("points_per_image", c.points_per_image);
  c.lambda_func = j.value("lambda_func", c.lambda_func);
  c.lambda_spatial = j.value("lambda_spatial", c.lambda_spatial);
  c.lambda_mask = j.value("lambda_mask", c.lambda_mask);
  c.tau = j.value("tau", c.tau);
  c.epochs = j.value("epochs", c.epochs);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.seed = j.value("seed", c.seed);
  c.spatial_sampling = spatial_sampling_from_name(
      j.value("spatial_sampling", spatial_sampling_name(c.spatial_sampling)));
  c.occlusion_tol = j.value("occlusion_tol", c.occlusion_tol);
  if (j.contains("head")) {
    const auto& h = j["head"];
    c.head.image_channels = h.value("image_channels", c.head.image_channels);
    c.head.text_channels = h.value("text_channels", c.head.text_channels);
    c.head.hidden = h.value("hidden", c.head.hidden);
    c.head.output_dim = h.value("output_dim", c.head.output_dim);
    c.head.mask_head = h.value("mask_head", c.head.mask_head);
  }
  c.validate();
  return c;
}

namespace {

// Row layout of one batch inside a single forward pass.
struct BatchLayout {
  std::vector<PointQuery> queries;
  std::vector<Eigen::Index> func_offsets;     // start row of each func sample
  std::vector<Eigen::Index> spatial_offsets;  // start row of each spatial sample
  Eigen::Index func_points = 0;               // quadruples
  Eigen::Index spatial_points = 0;            // anchors
};

BatchLayout layout_batch(const Batch& batch) {
  BatchLayout layout;
  auto push = [&](const FeatureGrid* grid, const FunctionEmbedding* fn, Pixel p) {
    layout.queries.push_back({grid, p, fn});
  };
  for (const auto& s : batch.func) {
    const std::size_t n = s.pos_1.size();
    require(n > 0 && s.neg_1.size() == n && s.pos_2.size() == n && s.neg_2.size() == n,
            ErrorCode::kShapeMismatch, "func sample roles differ in size");
    layout.func_offsets.push_back(static_cast<Eigen::Index>(layout.queries.size()));
    for (auto p : s.pos_1) push(s.grid_1, s.function, p);
    for (auto p : s.neg_1) push(s.grid_1, s.function, p);
    for (auto p : s.pos_2) push(s.grid_2, s.function, p);
    for (auto p : s.neg_2) push(s.grid_2, s.function, p);
    layout.func_points += static_cast<Eigen::Index>(n);
  }
  for (const auto& s : batch.spatial) {
    require(s.pairs.size() >= 2, ErrorCode::kShapeMismatch,
            "spatial sample needs >= 2 correspondences");
    layout.spatial_offsets.push_back(static_cast<Eigen::Index>(layout.queries.size()));
    for (const auto& pp : s.pairs) push(s.grid_a, s.function, pp.a);
    for (const auto& pp : s.pairs) push(s.grid_b, s.function, pp.b);
    layout.spatial_points += static_cast<Eigen::Index>(s.pairs.size());
  }
  require(!layout.queries.empty(), ErrorCode::kEmpty, "empty training batch");
  return layout;
}

Eigen::MatrixXd gather_role(const Eigen::MatrixXd& e, const Batch& batch,
                            const BatchLayout& layout, int role) {
  Eigen::MatrixXd out(layout.func_points, e.cols());
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < batch.func.size(); ++s) {
    const auto n = static_cast<Eigen::Index>(batch.func[s].pos_1.size());
    out.middleRows(row, n) = e.middleRows(layout.func_offsets[s] + role * n, n);
    row += n;
  }
  return out;
}

void scatter_role(const Eigen::MatrixXd& g, double scale, const Batch& batch,
                  const BatchLayout& layout, int role, Eigen::MatrixXd& d_e) {
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < batch.func.size(); ++s) {
    const auto n = static_cast<Eigen::Index>(batch.func[s].pos_1.size());
    d_e.middleRows(layout.func_offsets[s] + role * n, n) += scale * g.middleRows(row, n);
    row += n;
  }
}

// Forward pass plus every loss term; fills the upstream gradients when
// `d_e` is non-null.
LossBreakdown evaluate(const EmbeddingHeadParams& params, const Batch& batch,
                       const TrainConfig& config, const BatchLayout& layout,
                       const HeadOutput& out, Eigen::MatrixXd* d_e, Eigen::VectorXd* d_logit) {
  LossBreakdown loss;
  const Eigen::MatrixXd& e = out.embeddings;
  if (d_e) {
    *d_e = Eigen::MatrixXd::Zero(e.rows(), e.cols());
    d_logit->resize(0);
  }
  if (layout.func_points > 0) {
    std::array<Eigen::MatrixXd, 4> roles;
    for (int r = 0; r < 4; ++r) roles[r] = gather_role(e, batch, layout, r);
    FuncLossGrad g;
    loss.func = loss_func(roles[0], roles[1], roles[2], roles[3], config.tau, d_e ? &g : nullptr);
    if (d_e) {
      scatter_role(g.p1_pos, config.lambda_func, batch, layout, 0, *d_e);
      scatter_role(g.p1_neg, config.lambda_func, batch, layout, 1, *d_e);
      scatter_role(g.p2_pos, config.lambda_func, batch, layout, 2, *d_e);
      scatter_role(g.p2_neg, config.lambda_func, batch, layout, 3, *d_e);
    }
  }
  if (layout.spatial_points > 0) {
    const double total = static_cast<double>(layout.spatial_points);
    for (std::size_t s = 0; s < batch.spatial.size(); ++s) {
      const auto n = static_cast<Eigen::Index>(batch.spatial[s].pairs.size());
      const Eigen::Index off = layout.spatial_offsets[s];
      SpatialLossGrad g;
      const double l = loss_spatial_in_batch(e.middleRows(off, n), e.middleRows(off + n, n),
                                             config.tau, d_e ? &g : nullptr);
      const double share = static_cast<double>(n) / total;
      loss.spatial += share * l;
      if (d_e) {
        d_e->middleRows(off, n) += config.lambda_spatial * share * g.anchors;
        d_e->middleRows(off + n, n) += config.lambda_spatial * share * g.positives;
      }
    }
  }
  if (params.has_mask_head() && layout.func_points > 0) {
    const Eigen::Index rows = 4 * layout.func_points;
    Eigen::VectorXd logits(rows);
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(rows));
    Eigen::Index k = 0;
    for (std::size_t s = 0; s < batch.func.size(); ++s) {
      const auto n = static_cast<Eigen::Index>(batch.func[s].pos_1.size());
      for (Eigen::Index i = 0; i < 4 * n; ++i, ++k) {
        logits[k] = out.mask_logits[layout.func_offsets[s] + i];
        const int role = static_cast<int>(i / n);
        labels[static_cast<std::size_t>(k)] = role == 0 || role == 2 ? 1 : 0;
      }
    }
    Eigen::VectorXd g;
    loss.mask = loss_mask(logits, labels, d_e ? &g : nullptr);
    if (d_e) {
      *d_logit = Eigen::VectorXd::Zero(e.rows());
      k = 0;
      for (std::size_t s = 0; s < batch.func.size(); ++s) {
        const auto n = static_cast<Eigen::Index>(batch.func[s].pos_1.size());
        for (Eigen::Index i = 0; i < 4 * n; ++i, ++k) {
          (*d_logit)[layout.func_offsets[s] + i] = config.lambda_mask * g[k];
        }
      }
    }
  }
  loss.total = config.lambda_func * loss.func + config.lambda_spatial * loss.spatial +
               config.lambda_mask * loss.mask;
  return loss;
}

}  // namespace

LossBreakdown total_loss(const EmbeddingHeadParams& params, const Batch& batch,
                         const TrainConfig& config) {
  const BatchLayout layout = layout_batch(batch);
  const HeadOutput out = forward(params, layout.queries);
  return evaluate(params, batch, config, layout, out, nullptr, nullptr);
}

GradientResult compute_gradient(const EmbeddingHeadParams& params, const Batch& batch,
                                const TrainConfig& config) {
  const BatchLayout layout = layout_batch(batch);
  const ForwardCache cache = forward_with_cache(params, layout.queries);
  Eigen::MatrixXd d_e;
  Eigen::VectorXd d_logit;
  GradientResult result;
  result.loss = evaluate(params, batch, config, layout, cache.result, &d_e, &d_logit);
  require(std::isfinite(result.loss.total), ErrorCode::kNonFinite, "loss is not finite");
  result.grad = EmbeddingHeadParams::zeros_like(params);
  backward(params, cache, d_e, d_logit, result.grad);
  result.grad.visit([](const std::string& name, std::span<const double> values) {
    for (double v : values) {
      if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "non-finite gradient in " + name);
    }
  });
  return result;
}

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

template <typename T>
std::vector<T> choose(std::vector<T> candidates, std::size_t n, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(candidates[i], candidates[i + uniform_index(rng, candidates.size() - i)]);
  }
  candidates.resize(n);
  return candidates;
}

}  // namespace

BatchSampler::BatchSampler(const Dataset& dataset, const TrainConfig& config)
    : dataset_(dataset), config_(config) {
  const auto& objects = dataset.manifest.objects;
  std::set<std::string> functions;
  for (const auto& o : objects) functions.insert(o.functions.begin(), o.functions.end());
  for (const auto& fn : functions) {
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (!objects[i].has_function(fn) || dataset.objects[i].views.empty()) continue;
      for (std::size_t j = 0; j < objects.size(); ++j) {
        if (j == i || !objects[j].has_function(fn) || dataset.objects[j].views.empty()) continue;
        pairs_.push_back({i, j, fn});
      }
    }
  }
  require(!pairs_.empty(), ErrorCode::kEmpty,
          "training needs at least two objects sharing a function");
  for (const auto& fn : functions) dataset.function(fn);
}

bool BatchSampler::sample_func(std::mt19937_64& rng, const FunctionPair& fp, FuncPairSample& out) {
  const auto& o1 = dataset_.objects[fp.object_1];
  const auto& o2 = dataset_.objects[fp.object_2];
  const std::size_t v1 = uniform_index(rng, o1.features.size());
  const std::size_t v2 = uniform_index(rng, o2.features.size());
  out.grid_1 = &o1.features[v1];
  out.grid_2 = &o2.features[v2];
  out.function = &dataset_.function(fp.function);
  const auto n = static_cast<std::size_t>(config_.points_per_image);
  auto split = [&](const FeatureGrid& g, const std::string& id, std::size_t v,
                   std::vector<Pixel>& pos, std::vector<Pixel>& neg) {
    const auto it = g.part_masks.find(fp.function);
    if (it == g.part_masks.end()) {
      spdlog::warn("skipping pair: {} view {} has no part mask for '{}'", id, v, fp.function);
      return false;
    }
    std::vector<Pixel> in, out_part;
    for (int r = 0; r < g.image_height; ++r) {
      for (int c = 0; c < g.image_width; ++c) {
        if (!g.object_mask.at(r, c)) continue;
        (it->second.at(r, c) ? in : out_part).push_back({r, c});
      }
    }
    if (in.size() < n || out_part.size() < n) {
      spdlog::warn("skipping pair: {} view {} has {} part / {} non-part pixels for '{}', need {}",
                   id, v, in.size(), out_part.size(), fp.function, n);
      return false;
    }
    pos = choose(std::move(in), n, rng);
    neg = choose(std::move(out_part), n, rng);
    return true;
  };
  return split(*out.grid_1, o1.object_id, v1, out.pos_1, out.neg_1) &&
         split(*out.grid_2, o2.object_id, v2, out.pos_2, out.neg_2);
}

const std::vector<PixelPair>& BatchSampler::correspondences(std::size_t object, int view_a,
                                                            int view_b,
                                                            const std::string& function) {
  const auto key = std::make_tuple(object, view_a, view_b, function);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const auto& o = dataset_.objects[object];
  CorrespondenceSet all = multiview_pairs(o.views[view_a], o.views[view_b], config_.occlusion_tol);
  std::vector<PixelPair> kept;
  if (function.empty()) {
    kept = std::move(all.pairs);
  } else {
    const auto& parts = o.features[view_a].part_masks;
    const auto pm = parts.find(function);
    if (pm != parts.end()) {
      for (const auto& p : all.pairs) {
        if (pm->second.at(p.a)) kept.push_back(p);
      }
    }
  }
  return cache_.emplace(key, std::move(kept)).first->second;
}

bool BatchSampler::sample_spatial(std::mt19937_64& rng, std::size_t object, int view_a,
                                  const std::string& function, SpatialPairSample& out) {
  const auto& o = dataset_.objects[object];
  const auto nviews = static_cast<int>(o.views.size());
  if (nviews < 2) {
    spdlog::warn("skipping spatial pair: {} has a single view", o.object_id);
    return false;
  }
  int view_b = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(nviews - 1)));
  if (view_b >= view_a) ++view_b;
  const bool part = config_.spatial_sampling == SpatialSampling::kFunctionalPart;
  const auto& candidates = correspondences(object, view_a, view_b, part ? function : "");
  const auto n = static_cast<std::size_t>(config_.points_per_image);
  if (candidates.size() < n) {
    spdlog::warn("skipping spatial pair: {} views {}/{} have {} correspondences, need {}",
                 o.object_id, view_a, view_b, candidates.size(), n);
    return false;
  }
  out.grid_a = &o.features[static_cast<std::size_t>(view_a)];
  out.grid_b = &o.features[static_cast<std::size_t>(view_b)];
  out.function = &dataset_.function(function);
  out.pairs = choose(candidates, n, rng);
  return true;
}

Batch BatchSampler::sample(std::mt19937_64& rng) {
  Batch batch;
  for (int i = 0; i < config_.batch_pairs; ++i) {
    const FunctionPair& fp = pairs_[uniform_index(rng, pairs_.size())];
    FuncPairSample fs;
    if (sample_func(rng, fp, fs)) {
      batch.func.push_back(std::move(fs));
    } else {
      ++skipped_;
    }
    const auto& o1 = dataset_.objects[fp.object_1];
    const int view = static_cast<int>(uniform_index(rng, o1.views.size()));
    SpatialPairSample ss;
    if (sample_spatial(rng, fp.object_1, view, fp.function, ss)) {
      batch.spatial.push_back(std::move(ss));
    } else {
      ++skipped_;
    }
  }
  require(!batch.func.empty() || !batch.spatial.empty(), ErrorCode::kEmpty,
          "every sampled training pair was skipped");
  return batch;
}

TrainResult train(const Dataset& dataset, const TrainConfig& base_config) {
  TrainConfig config = base_config;
  config.head.image_channels = dataset.image_channels();
  config.head.text_channels = dataset.text_channels();
  config.validate();

  TrainResult result;
  result.params = EmbeddingHeadParams::initialize(config.head, config.seed);
  BatchSampler sampler(dataset, config);
  std::mt19937_64 monitor_rng(splitmix64(config.seed ^ 0x6d6f6e69746f72ULL));
  const Batch monitor = sampler.sample(monitor_rng);
  result.curve.push_back({0, total_loss(result.params, monitor, config)});

  std::mt19937_64 rng(splitmix64(config.seed));
  AdamState state = AdamState::zeros(result.params.num_parameters());
  const AdamConfig adam{config.lr};
  std::vector<double> theta = result.params.flatten();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (int step = 0; step < config.steps_per_epoch; ++step) {
      const Batch batch = sampler.sample(rng);
      const GradientResult g = compute_gradient(result.params, batch, config);
      const std::vector<double> flat_grad = g.grad.flatten();
      adam_step(theta, flat_grad, state, adam);
      result.params.unflatten(theta);
    }
    result.curve.push_back({epoch, total_loss(result.params, monitor, config)});
    spdlog::debug("epoch {} total {:.6f}", epoch, result.curve.back().loss.total);
  }
  result.skipped_pairs = sampler.skipped();
  return result;
}

std::string loss_csv(const std::vector<LossRecord>& curve) {
  std::string out = "epoch,L_func,L_spatial,L_mask,total\n";
  char line[160];
  for (const auto& r : curve) {
    std::snprintf(line, sizeof(line), "%d,%.10f,%.10f,%.10f,%.10f\n", r.epoch, r.loss.func,
                  r.loss.spatial, r.loss.mask, r.loss.total);
    out += line;
  }
  return out;
}

void write_loss_csv(const std::vector<LossRecord>& curve, const std::filesystem::path& path) {
  write_text_file(path, loss_csv(curve));
}

namespace {

std::vector<std::uint64_t> param_shape(const EmbeddingHeadParams& p, const std::string& name) {
  for (int l = 0; l < kNumLayers; ++l) {
    if (name == "mlp." + std::to_string(l) + ".weight") {
      return {static_cast<std::uint64_t>(p.weights[l].rows()),
              static_cast<std::uint64_t>(p.weights[l].cols())};
    }
    if (name == "mlp." + std::to_string(l) + ".bias") {
      return {static_cast<std::uint64_t>(p.biases[l].size())};
    }
  }
  if (name == "block_logits") return {3};
  if (name == "mask_head.weight") return {static_cast<std::uint64_t>(p.mask_weight.size())};
  return {1};
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

void save_checkpoint(const EmbeddingHeadParams& params, const TrainConfig& config,
                     const std::filesystem::path& dir) {
  params.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create checkpoint directory " + dir.string());
  ordered_json index;
  index["format"] = "dfc-head";
  index["version"] = 1;
  ordered_json list = ordered_json::array();
  params.visit([&](const std::string& name, std::span<const double> values) {
    const auto shape = param_shape(params, name);
    std::vector<double> data(values.begin(), values.end());
    if (shape.size() == 2) {
      const Eigen::Map<const Eigen::MatrixXd> m(values.data(), static_cast<Eigen::Index>(shape[0]),
                                                static_cast<Eigen::Index>(shape[1]));
      const RowMajor rm = m;
      data.assign(rm.data(), rm.data() + rm.size());
    }
    const std::string file = name + ".dftc";
    write_tensor(Tensor::from<double>(shape, data), dir / file);
    list.push_back({{"name", name}, {"file", file}, {"shape", shape}});
  });
  index["parameters"] = std::move(list);
  write_text_file(dir / "params.json", index.dump(2) + "\n");
  write_text_file(dir / "config.json", train_config_to_json(config).dump(2) + "\n");
}

EmbeddingHeadParams load_checkpoint(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorCode::kNotFound,
          "checkpoint not found: " + dir.string());
  json index;
  try {
    index = json::parse(read_text_file(dir / "params.json"));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, (dir / "params.json").string() + ": " + e.what());
  }
  std::map<std::string, Tensor> tensors;
  for (const auto& entry : index.at("parameters")) {
    const auto name = entry.at("name").get<std::string>();
    tensors.emplace(name, read_tensor(dir / entry.at("file").get<std::string>()));
  }
  auto take = [&](const std::string& name) -> const Tensor& {
    const auto it = tensors.find(name);
    require(it != tensors.end(), ErrorCode::kNotFound, "checkpoint lacks parameter " + name);
    return it->second;
  };
  auto vec = [&](const std::string& name) {
    const auto v = take(name).values<double>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  EmbeddingHeadParams p;
  const Eigen::VectorXd logits = vec("block_logits");
  require(logits.size() == 3, ErrorCode::kShapeMismatch, "block_logits must have 3 entries");
  p.block_logits = logits;
  for (int l = 0; l < kNumLayers; ++l) {
    const std::string prefix = "mlp." + std::to_string(l);
    const Tensor& w = take(prefix + ".weight");
    require(w.ndim() == 2, ErrorCode::kShapeMismatch, prefix + ".weight must be 2-D");
    const auto v = w.values<double>();
    p.weights[l] = Eigen::Map<const RowMajor>(v.data(), static_cast<Eigen::Index>(w.shape()[0]),
                                              static_cast<Eigen::Index>(w.shape()[1]));
    p.biases[l] = vec(prefix + ".bias");
  }
  if (tensors.contains("mask_head.weight")) {
    p.mask_weight = vec("mask_head.weight");
    p.mask_bias = vec("mask_head.bias");
  }
  p.validate();
  return p;
}

}  // namespace dfc
