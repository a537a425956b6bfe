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

#include "dfc/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "dfc/error.h"
#include "dfc/manifest.h"
#include "dfc/random.h"
#include "dfc/render.h"
#include "dfc/tensor_store.h"

namespace dfc {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Path of `target` relative to `base`, both taken as absolute.
std::string relative_to(const fs::path& target, const fs::path& base) {
  return fs::absolute(target).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal()).generic_string();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::kIo, "cannot create directory " + dir.string());
}

void save_tensor(const Tensor& tensor, const fs::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  write_tensor(tensor, path);
}

}  // namespace

ObjectKind kind_for_function(const std::string& function) {
  if (function == "pour-with") return ObjectKind::kCompositeSpout;
  if (function == "lift-with") return ObjectKind::kCompositeHandle;
  // Any other function reuses one of the two composite generators.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : function) h = (h ^ c) * 1099511628211ULL;
  return h % 2 == 0 ? ObjectKind::kCompositeSpout : ObjectKind::kCompositeHandle;
}

fs::path cmd_gen_scenes(const GenScenesConfig& config, const fs::path& out) {
  require(config.n_objects > 0, ErrorCode::kInvalidArgument, "n_objects must be > 0");
  require(config.views_per_object > 0, ErrorCode::kInvalidArgument, "views_per_object must be > 0");
  require(!config.functions.empty(), ErrorCode::kInvalidArgument, "at least one function is required");
  require(config.image_size > 0 && config.stride > 0 && config.image_size % config.stride == 0,
          ErrorCode::kInvalidArgument, "image size must be a positive multiple of the stride");
  require(config.part_variation >= 0.0 && config.part_variation <= 1.0,
          ErrorCode::kInvalidArgument, "part variation must be in [0, 1]");
  require(config.azimuth_spread_deg >= 0.0 && config.azimuth_spread_deg <= 360.0,
          ErrorCode::kInvalidArgument, "azimuth spread must be in [0, 360]");
  require(config.camera_distance > 0.0 && config.focal > 0.0, ErrorCode::kInvalidArgument,
          "camera distance and focal length must be > 0");
  ensure_dir(out);

  Manifest m;
  m.base_dir = out;
  m.image_height = m.image_width = config.image_size;
  m.stride = config.stride;
  for (const auto& fn : config.functions) {
    const std::string rel = "functions/" + fn + ".dftc";
    save_tensor(function_embedding_tensor(hash_function_embedding(fn, config.text_channels)),
                 out / rel);
    m.function_embeddings[fn] = rel;
  }

  std::mt19937_64 rng(splitmix64(config.seed));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  const int nf = static_cast<int>(config.functions.size());
  std::vector<ParametricObject> objects;

  for (int i = 0; i < config.n_objects; ++i) {
    const std::string& fn = config.functions[static_cast<std::size_t>(i % nf)];
    ObjectParams p;
    p.part_function = fn;
    p.box_body = u01(rng) < 0.3;
    p.radius = uniform(0.06, 0.09);
    p.height = uniform(0.14, 0.22);
    p.box_size = Vec3(uniform(0.11, 0.17), uniform(0.11, 0.17), uniform(0.14, 0.22));
    p.segments = 24;
    const double pv = config.part_variation;
    auto part_uniform = [&](double lo, double hi) {
      const double mid = 0.5 * (lo + hi);
      return mid + pv * (uniform(lo, hi) - mid);
    };
    p.part_length = part_uniform(0.07, 0.10);
    p.part_radius = part_uniform(0.014, 0.02);
    p.part_elevation = uniform(0.5, 0.7);
    p.part_tilt_deg = part_uniform(25.0, 45.0);
    const std::uint64_t object_seed = splitmix64(config.seed * 1000003ULL + static_cast<std::uint64_t>(i));
    ParametricObject obj = make_object(kind_for_function(fn), p, object_seed);
    const double yaw = uniform(0.0, 2.0 * std::numbers::pi);
    const RigidTransform o2w(Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(),
                             Vec3(uniform(-0.05, 0.05), uniform(-0.05, 0.05), 0.0));

    ObjectRecord rec;
    rec.object_id = format("obj%03d", i);
    rec.category = object_kind_name(obj.kind);
    rec.kind = object_kind_name(obj.kind);
    rec.functions = {fn};
    rec.object_to_world = o2w;
    rec.parts = obj.part_regions;
    const std::string dir = "objects/" + rec.object_id + "/";
    rec.mesh = MeshRecord{dir + "mesh_vertices.dftc", dir + "mesh_faces.dftc"};
    save_tensor(mesh_vertices_tensor(obj.mesh), out / rec.mesh->vertices);
    save_tensor(mesh_faces_tensor(obj.mesh), out / rec.mesh->faces);

    Vec3 lo = obj.mesh.vertices.front(), hi = lo;
    for (const auto& v : obj.mesh.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    const Vec3 target = o2w.apply(0.5 * (lo + hi));
    const Vec3 part_dir = o2w.rotation() * obj.part_regions.at(fn).center;
    const double part_az = std::atan2(part_dir.y(), part_dir.x());
    const int nv = config.views_per_object;
    for (int v = 0; v < nv; ++v) {
      const double spread = config.azimuth_spread_deg;
      const double az = part_az + deg(config.azimuth_offset_deg + spread * ((v + 0.5) / nv - 0.5) +
                                      uniform(-8.0, 8.0));
      const double el = deg(uniform(15.0, 40.0));
      const Camera cam = orbit_camera(target, config.camera_distance, az, el, config.focal,
                                      config.image_size);
      const RasterOutput raster = rasterize(obj, cam, o2w);
      const std::uint64_t image_seed =
          splitmix64(config.seed ^ (static_cast<std::uint64_t>(i) << 20) ^ static_cast<std::uint64_t>(v));
      const FeatureGrid grid =
          procedural_features(obj, cam, raster, config.features, image_seed, config.stride, o2w);
      ViewRecord vr;
      const std::string vdir = dir + format("view%02d_", v);
      vr.depth = vdir + "depth.dftc";
      vr.object_mask = vdir + "object_mask.dftc";
      vr.features = vdir + "features.dftc";
      vr.camera = cam;
      save_tensor(to_tensor(raster.depth), out / vr.depth);
      save_tensor(to_tensor(raster.object_mask), out / vr.object_mask);
      save_tensor(feature_planes_to_tensor(grid), out / vr.features);
      for (const auto& [pfn, mask] : raster.part_masks) {
        vr.part_masks[pfn] = vdir + "part_" + pfn + ".dftc";
        save_tensor(to_tensor(mask), out / vr.part_masks[pfn]);
      }
      rec.views.push_back(std::move(vr));
    }
    m.objects.push_back(std::move(rec));
    objects.push_back(std::move(obj));
  }

  for (int i = 0; i + nf < config.n_objects; ++i) {
    const int j = i + nf;
    const std::string& fn = config.functions[static_cast<std::size_t>(i % nf)];
    AlignmentRecord a;
    a.object_id_a = m.objects[static_cast<std::size_t>(i)].object_id;
    a.object_id_b = m.objects[static_cast<std::size_t>(j)].object_id;
    a.function = fn;
    a.obb_a = objects[static_cast<std::size_t>(i)].part_regions.at(fn);
    a.obb_b = objects[static_cast<std::size_t>(j)].part_regions.at(fn);
    a.transform = a.obb_a.object_to_local().inverse() * a.obb_b.object_to_local();
    m.alignments.push_back(std::move(a));
  }
  validate_manifest(m);
  const fs::path path = out / "manifest.json";
  write_manifest(m, path);
  return path;
}

std::vector<Detection> synth_detections(const Dataset& dataset, const SynthDetectionsConfig& config) {
  require(config.trials > 0, ErrorCode::kInvalidArgument, "trials must be > 0");
  require(config.jitter_px >= 0, ErrorCode::kInvalidArgument, "jitter must be >= 0");
  std::mt19937_64 rng(splitmix64(config.seed ^ 0x646574ULL));
  std::uniform_int_distribution<int> jitter(-config.jitter_px, config.jitter_px);
  std::vector<Detection> out;
  for (std::size_t oi = 0; oi < dataset.objects.size(); ++oi) {
    const auto& obj = dataset.objects[oi];
    const auto& rec = dataset.manifest.objects[oi];
    for (std::size_t v = 0; v < obj.features.size(); ++v) {
      for (const auto& [fn, mask] : obj.features[v].part_masks) {
        int r0 = mask.height, c0 = mask.width, r1 = -1, c1 = -1;
        for (const Pixel& p : mask_pixels(mask)) {
          r0 = std::min(r0, p.row);
          c0 = std::min(c0, p.col);
          r1 = std::max(r1, p.row);
          c1 = std::max(c1, p.col);
        }
        if (r1 < 0) continue;
        for (int t = 0; t < config.trials; ++t) {
          Detection d;
          d.view = static_cast<int>(v);
          d.trial = t;
          d.object_id = rec.object_id;
          d.function = fn;
          d.row_min = std::clamp(r0 + jitter(rng), 0, mask.height - 1);
          d.col_min = std::clamp(c0 + jitter(rng), 0, mask.width - 1);
          d.row_max = std::clamp(r1 + jitter(rng), d.row_min, mask.height - 1);
          d.col_max = std::clamp(c1 + jitter(rng), d.col_min, mask.width - 1);
          out.push_back(d);
        }
      }
    }
  }
  return out;
}

PseudolabelReport cmd_pseudolabel(const fs::path& manifest_path, const fs::path& detections_path,
                                  const fs::path& out, const PseudolabelConfig& config) {
  const Dataset ds = load_dataset(manifest_path, {.features = true, .meshes = true, .function_embeddings = false});
  const std::vector<Detection> detections = read_detections(detections_path);
  if (detections.empty()) spdlog::warn("detections file {} is empty; all masks will be empty", detections_path.string());
  ensure_dir(out);

  // Group detections by (object, function); omitted keys must be unambiguous.
  std::map<std::pair<std::string, std::string>, std::vector<Detection>> groups;
  for (const auto& d : detections) {
    std::string id = d.object_id;
    if (id.empty()) {
      require(ds.manifest.objects.size() == 1, ErrorCode::kInvalidArgument,
              "detection without object_id in a multi-object manifest");
      id = ds.manifest.objects.front().object_id;
    }
    const ObjectRecord& rec = ds.manifest.object(id);
    std::string fn = d.function;
    if (fn.empty()) {
      require(rec.functions.size() == 1, ErrorCode::kInvalidArgument,
              "detection without function for multi-function object '" + id + "'");
      fn = rec.functions.front();
    }
    require(rec.has_function(fn), ErrorCode::kInvalidArgument,
            "detection function '" + fn + "' not declared by object '" + id + "'");
    require(d.view >= 0 && d.view < static_cast<int>(rec.views.size()), ErrorCode::kOutOfRange,
            "detection references missing view index " + std::to_string(d.view) + " of object '" + id + "'");
    groups[{id, fn}].push_back(d);
  }

  Manifest m = ds.manifest;
  m.base_dir = out;
  for (auto& [name, path] : m.function_embeddings) path = relative_to(ds.manifest.resolve(path), out);
  PseudolabelReport report;
  report.detections = detections.size();
  ordered_json jreport;
  for (std::size_t oi = 0; oi < ds.objects.size(); ++oi) {
    const auto& obj = ds.objects[oi];
    const ObjectRecord& src = ds.manifest.objects[oi];
    ObjectRecord& rec = m.objects[oi];
    require(obj.mesh.has_value(), ErrorCode::kNotFound,
            "object_id '" + src.object_id + "' has no mesh to sample");
    auto rebase = [&](const std::string& rel) { return relative_to(ds.manifest.resolve(rel), out); };
    if (rec.mesh) rec.mesh = MeshRecord{rebase(rec.mesh->vertices), rebase(rec.mesh->faces)};
    for (auto& v : rec.views) {
      if (!v.image.empty()) v.image = rebase(v.image);
      v.depth = rebase(v.depth);
      v.object_mask = rebase(v.object_mask);
      v.features = rebase(v.features);
      v.part_masks.clear();
    }
    const std::vector<Vec3> points =
        sample_surface(*obj.mesh, config.surface_points, splitmix64(config.seed + oi));
    for (const auto& fn : src.functions) {
      const auto it = groups.find({src.object_id, fn});
      const std::vector<Detection> none;
      const auto& dets = it == groups.end() ? none : it->second;
      const ScoredPointCloud cloud =
          accumulate_votes(points, obj.views, dets, src.object_to_world, config.mask.tol_rel);
      MaskExtractionConfig mc = config.mask;
      const auto [mn, mx] = std::minmax_element(cloud.scores.begin(), cloud.scores.end());
      if (*mx <= 0.0) {
        mc.threshold = std::numeric_limits<double>::infinity();
      } else if (config.otsu) {
        mc.threshold = *mn == *mx ? *mx : otsu_threshold(cloud.scores);
      }
      const std::string dir = "pseudolabels/" + src.object_id + "/";
      std::vector<double> cloud_data;
      for (std::size_t i = 0; i < points.size(); ++i) {
        cloud_data.insert(cloud_data.end(), {points[i].x(), points[i].y(), points[i].z(), cloud.scores[i]});
      }
      save_tensor(Tensor::from<double>({points.size(), 4}, cloud_data), out / (dir + fn + "_cloud.dftc"));
      double iou_sum = 0.0;
      int iou_n = 0;
      for (std::size_t v = 0; v < obj.views.size(); ++v) {
        Mask mask = std::isfinite(mc.threshold)
                        ? extract_mask(cloud, obj.views[v], mc, src.object_to_world)
                        : Mask(obj.views[v].object_mask.height, obj.views[v].object_mask.width, 0);
        const std::string rel = dir + format("view%02d_", static_cast<int>(v)) + fn + ".dftc";
        save_tensor(to_tensor(mask), out / rel);
        rec.views[v].part_masks[fn] = rel;
        if (!obj.features.empty()) {
          const auto gt = obj.features[v].part_masks.find(fn);
          if (gt != obj.features[v].part_masks.end()) {
            iou_sum += mask_iou(mask, gt->second);
            ++iou_n;
          }
        }
      }
      if (iou_n > 0) {
        report.mean_iou[src.object_id][fn] = iou_sum / iou_n;
        jreport["mean_iou"][src.object_id][fn] = iou_sum / iou_n;
      }
      jreport["threshold"][src.object_id][fn] = std::isfinite(mc.threshold) ? json(mc.threshold) : json(nullptr);
    }
  }
  validate_manifest(m);
  report.manifest = out / "manifest.json";
  write_manifest(m, report.manifest);
  jreport["detections"] = report.detections;
  write_text_file(out / "pseudolabel_report.json", jreport.dump(2) + "\n");
  return report;
}

namespace {

ordered_json gt_info_to_json(const GtPairInfo& g) {
  ordered_json j;
  j["pair_id"] = g.pair_id;
  j["object_id_a"] = g.object_id_a;
  j["object_id_b"] = g.object_id_b;
  j["function"] = g.function;
  j["view_a"] = g.view_a;
  j["view_b"] = g.view_b;
  j["count"] = g.count;
  j["residual_mean"] = g.residual_mean;
  j["file"] = g.file;
  return j;
}

GtPairInfo gt_info_from_json(const json& j) {
  GtPairInfo g;
  g.pair_id = j.at("pair_id").get<std::string>();
  g.object_id_a = j.at("object_id_a").get<std::string>();
  g.object_id_b = j.at("object_id_b").get<std::string>();
  g.function = j.at("function").get<std::string>();
  g.view_a = j.at("view_a").get<int>();
  g.view_b = j.at("view_b").get<int>();
  g.count = j.value("count", std::size_t{0});
  g.residual_mean = j.value("residual_mean", 0.0);
  g.file = j.at("file").get<std::string>();
  return g;
}

}  // namespace

std::vector<GtPairInfo> cmd_derive_gt(const fs::path& manifest_path, const fs::path& out,
                                      const DeriveGtConfig& config) {
  const Dataset ds =
      load_dataset(manifest_path, {.features = false, .meshes = false, .function_embeddings = false});
  require(!ds.manifest.alignments.empty(), ErrorCode::kEmpty, "manifest has no alignment records");
  ensure_dir(out);
  std::vector<GtPairInfo> index;
  for (const auto& a : ds.manifest.alignments) {
    const auto& ra = ds.manifest.object(a.object_id_a);
    const auto& rb = ds.manifest.object(a.object_id_b);
    const auto& oa = ds.object(a.object_id_a);
    const auto& ob = ds.object(a.object_id_b);
    ViewSelectionConfig vs = config.views;
    vs.pool = std::min<int>(vs.pool, static_cast<int>(std::min(oa.views.size(), ob.views.size())));
    const FunctionalAlignment fa{a.transform, a.obb_a, a.obb_b, a.function};
    fa.validate();
    const auto pairs = select_views(oa.views, a.obb_a, ra.object_to_world, ob.views, a.obb_b,
                                    rb.object_to_world, vs);
    for (std::size_t t = 0; t < pairs.size(); ++t) {
      const ViewPair& vp = pairs[t];
      const GroundTruth gt = derive_gt(oa.views[static_cast<std::size_t>(vp.view_a)], ra.object_to_world,
                                       ob.views[static_cast<std::size_t>(vp.view_b)], rb.object_to_world,
                                       fa, config.gt);
      GtPairInfo info;
      info.pair_id = a.object_id_a + "__" + a.object_id_b + "__" + a.function + format("__t%d", static_cast<int>(t));
      info.object_id_a = a.object_id_a;
      info.object_id_b = a.object_id_b;
      info.function = a.function;
      info.view_a = vp.view_a;
      info.view_b = vp.view_b;
      info.count = gt.correspondences.size();
      info.residual_mean = gt.residual_mean;
      info.file = info.pair_id + ".dftc";
      std::vector<std::int64_t> data;
      data.reserve(gt.correspondences.size() * 4);
      for (const auto& p : gt.correspondences.pairs) data.insert(data.end(), {p.a.row, p.a.col, p.b.row, p.b.col});
      save_tensor(Tensor::from<std::int64_t>({gt.correspondences.size(), 4}, data), out / info.file);
      ordered_json side = gt_info_to_json(info);
      side["total_cost"] = gt.total_cost;
      write_text_file(out / (info.pair_id + ".json"), side.dump(2) + "\n");
      index.push_back(std::move(info));
    }
  }
  ordered_json j;
  j["pairs"] = ordered_json::array();
  for (const auto& g : index) j["pairs"].push_back(gt_info_to_json(g));
  write_text_file(out / "index.json", j.dump(2) + "\n");
  return index;
}

std::vector<GtPairInfo> read_gt_index(const fs::path& gt_dir) {
  const fs::path path = gt_dir / "index.json";
  require(fs::is_regular_file(path), ErrorCode::kNotFound, "ground-truth index not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  std::vector<GtPairInfo> out;
  for (const auto& e : j.at("pairs")) out.push_back(gt_info_from_json(e));
  return out;
}

CorrespondenceSet read_gt_pairs(const fs::path& gt_dir, const GtPairInfo& info) {
  const Tensor t = read_tensor(gt_dir / info.file);
  require(t.ndim() == 2 && t.shape()[1] == 4, ErrorCode::kShapeMismatch,
          "ground-truth tensor must have shape [k, 4]");
  const auto v = t.values<std::int64_t>();
  CorrespondenceSet set;
  for (std::size_t i = 0; i < v.size(); i += 4) {
    set.pairs.push_back({{static_cast<int>(v[i]), static_cast<int>(v[i + 1])},
                         {static_cast<int>(v[i + 2]), static_cast<int>(v[i + 3])}});
  }
  return set;
}

TrainResult cmd_train(const fs::path& manifest_path, const TrainConfig& base, const fs::path& out) {
  const Dataset ds = load_dataset(manifest_path);
  TrainConfig config = base;
  config.head.image_channels = ds.image_channels();
  config.head.text_channels = ds.text_channels();
  TrainResult result = train(ds, config);
  if (result.skipped_pairs > 0) spdlog::warn("{} sampled pairs were skipped", result.skipped_pairs);
  save_checkpoint(result.params, config, out / "checkpoint");
  write_loss_csv(result.curve, out / "loss.csv");
  return result;
}

EmbeddingSource embedding_source_from_name(const std::string& name) {
  if (name == "checkpoint") return EmbeddingSource::kCheckpoint;
  if (name == "oracle") return EmbeddingSource::kOracle;
  if (name == "random") return EmbeddingSource::kRandom;
  fail(ErrorCode::kInvalidArgument, "unknown embedding source '" + name + "'");
}

std::string embedding_source_name(EmbeddingSource source) {
  switch (source) {
    case EmbeddingSource::kCheckpoint: return "checkpoint";
    case EmbeddingSource::kOracle: return "oracle";
    case EmbeddingSource::kRandom: return "random";
  }
  return "checkpoint";
}

namespace {

ordered_json k_map(const std::map<int, double>& m) {
  ordered_json j = ordered_json::object();
  for (auto it = m.rbegin(); it != m.rend(); ++it) j[std::to_string(it->first)] = it->second;
  return j;
}

struct PairOutput {
  PairMetrics metrics;
  std::vector<RankedPair> top;
  std::vector<Pixel> transfer;  // a pixel for each b object pixel
};

EmbeddedView embed_view(const EvalConfig& config, const Dataset& ds, const EmbeddingHeadParams* params,
                        const std::string& object_id, int view, const std::string& function,
                        const Obb& part, std::uint64_t seed) {
  const auto& obj = ds.object(object_id);
  const auto& rec = ds.manifest.object(object_id);
  require(view >= 0 && view < static_cast<int>(obj.views.size()), ErrorCode::kOutOfRange,
          "ground truth references missing view " + std::to_string(view) + " of object '" + object_id + "'");
  const CameraView& cv = obj.views[static_cast<std::size_t>(view)];
  const FeatureGrid& grid = obj.features[static_cast<std::size_t>(view)];
  std::optional<Mask> gt_part;
  if (const auto it = grid.part_masks.find(function); it != grid.part_masks.end()) gt_part = it->second;
  switch (config.source) {
    case EmbeddingSource::kOracle:
      // Each view is expressed in its own part frame, which is where the
      // alignment places both parts.
      return oracle_embedded_view(cv, part.object_to_local() * rec.object_to_world.inverse(),
                                  Vec3::Constant(config.oracle_scale),
                                  config.pred_masks ? gt_part : std::nullopt);
    case EmbeddingSource::kRandom:
      return random_embedded_view(cv.object_mask, config.random_dims, seed);
    case EmbeddingSource::kCheckpoint: {
      const auto pixels = mask_pixels(cv.object_mask);
      const HeadOutput out = forward_dense(*params, grid, pixels, ds.function(function));
      std::optional<Mask> pred;
      if (config.pred_masks && params->has_mask_head()) {
        pred = Mask(cv.object_mask.height, cv.object_mask.width, 0);
        for (std::size_t i = 0; i < pixels.size(); ++i) {
          if (out.mask_logits[static_cast<Eigen::Index>(i)] > 0.0) pred->at(pixels[i]) = 1;
        }
        if (count_nonzero(*pred) == 0) {
          spdlog::debug("{} view {}: empty predicted part mask, searching the object mask",
                        rec.object_id, view);
          pred.reset();
        }
      }
      return EmbeddedView(cv.object_mask, out.embeddings.cast<float>(), std::move(pred));
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown embedding source");
}

PairOutput evaluate_pair(const EvalConfig& config, const Dataset& ds, const EmbeddingHeadParams* params,
                         const fs::path& gt_dir, const GtPairInfo& info, std::size_t pair_index) {
  PairOutput result;
  PairMetrics& m = result.metrics;
  m.info = info;
  const CorrespondenceSet gt = read_gt_pairs(gt_dir, info);
  require(!gt.empty(), ErrorCode::kEmpty, "ground truth " + info.pair_id + " is empty");

  const AlignmentRecord* align = nullptr;
  for (const auto& a : ds.manifest.alignments) {
    if (a.object_id_a == info.object_id_a && a.object_id_b == info.object_id_b && a.function == info.function) {
      align = &a;
    }
  }
  require(align != nullptr, ErrorCode::kNotFound, "no alignment record for " + info.pair_id);
  const std::uint64_t pair_seed = splitmix64(config.seed ^ (0x9e37ULL * (pair_index + 1)));
  const EmbeddedView a = embed_view(config, ds, params, info.object_id_a, info.view_a, info.function,
                                    align->obb_a, pair_seed);
  const EmbeddedView b = embed_view(config, ds, params, info.object_id_b, info.view_b, info.function,
                                    align->obb_b, splitmix64(pair_seed));

  std::vector<Pixel> queries;
  queries.reserve(gt.size());
  for (const auto& p : gt.pairs) queries.push_back(p.a);
  const auto matches = transfer_match(a, b, queries, config.pred_masks);
  const double side = std::max(b.height(), b.width());
  m.transfer = label_transfer_metrics(matches, gt, side, config.k_list);

  const auto ranked = rank_candidates(a, b, {config.pred_masks, config.similarity_only});
  for (int k : config.k_list) {
    const PRCurve c = pr_curve(ranked, gt, k, config.t_grid);
    m.best_f1[k] = c.best_f1;
    m.ap[k] = c.ap;
  }
  if (config.source == EmbeddingSource::kCheckpoint && config.pred_masks && params->has_mask_head()) {
    const auto& ga = ds.object(info.object_id_a).features[static_cast<std::size_t>(info.view_a)].part_masks;
    const auto& gb = ds.object(info.object_id_b).features[static_cast<std::size_t>(info.view_b)].part_masks;
    // A view whose predicted mask came out empty scores against an empty mask.
    auto pred_or_empty = [](const EmbeddedView& v) {
      return v.part_mask() ? *v.part_mask() : Mask(v.height(), v.width(), 0);
    };
    if (ga.contains(info.function)) m.mask_iou_a = mask_iou(pred_or_empty(a), ga.at(info.function));
    if (gb.contains(info.function)) m.mask_iou_b = mask_iou(pred_or_empty(b), gb.at(info.function));
  }
  if (config.chance) {
    m.chance = chance_reference(a, b, gt, config.k_list, config.t_grid, pair_seed ^ 0xc4a9ce,
                                config.chance_trials, config.pred_masks);
  }
  const std::size_t keep = std::min(ranked.size(), static_cast<std::size_t>(std::max(0, config.save_matches)));
  result.top.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep));
  std::vector<int> b_rows(b.pixels().size());
  for (std::size_t i = 0; i < b_rows.size(); ++i) b_rows[i] = static_cast<int>(i);
  const MatchResult back = match_rows(b, b_rows, a, config.pred_masks);
  for (int r : back.dst_rows) result.transfer.push_back(a.pixels()[static_cast<std::size_t>(r)]);
  return result;
}

void add_into(std::map<int, double>& acc, const std::map<int, double>& v) {
  for (const auto& [k, x] : v) acc[k] += x;
}

void scale(std::map<int, double>& acc, double s) {
  for (auto& [k, x] : acc) x *= s;
}

}  // namespace

ordered_json pair_metrics_to_json(const PairMetrics& m) {
  ordered_json j;
  j["pair_id"] = m.info.pair_id;
  j["function"] = m.info.function;
  if (m.info.pair_id != "mean") {
    j["object_id_a"] = m.info.object_id_a;
    j["view_a"] = m.info.view_a;
    j["object_id_b"] = m.info.object_id_b;
    j["view_b"] = m.info.view_b;
  }
  j["normalized_dist"] = m.transfer.normalized_dist;
  j["pck"] = k_map(m.transfer.pck);
  j["best_f1"] = k_map(m.best_f1);
  j["ap"] = k_map(m.ap);
  if (m.mask_iou_a || m.mask_iou_b) {
    j["mask_iou"] = {{"a", m.mask_iou_a.value_or(0.0)}, {"b", m.mask_iou_b.value_or(0.0)}};
  }
  if (m.chance) {
    ordered_json c;
    c["normalized_dist"] = m.chance->normalized_dist;
    c["pck"] = k_map(m.chance->pck);
    c["best_f1"] = k_map(m.chance->best_f1);
    c["ap"] = k_map(m.chance->ap);
    j["chance"] = c;
  }
  return j;
}

std::string metrics_csv(const EvalSummary& summary, const std::vector<int>& k_list) {
  std::vector<int> ks = k_list;
  std::sort(ks.rbegin(), ks.rend());
  std::string out = "pair_id,function,normalized_dist";
  for (const char* name : {"pck", "best_f1", "ap"}) {
    for (int k : ks) out += format(",%s@%dp", name, k);
  }
  out += "\n";
  auto row = [&](const PairMetrics& m) {
    out += m.info.pair_id + "," + m.info.function + format(",%.6f", m.transfer.normalized_dist);
    for (const auto* map : {&m.transfer.pck, &m.best_f1, &m.ap}) {
      for (int k : ks) out += format(",%.6f", map->count(k) ? map->at(k) : 0.0);
    }
    out += "\n";
  };
  for (const auto& p : summary.pairs) row(p);
  row(summary.mean);
  return out;
}

EvalSummary cmd_eval(const fs::path& manifest_path, const fs::path& gt_dir, const EvalConfig& config,
                     const fs::path& out) {
  require(!config.k_list.empty(), ErrorCode::kInvalidArgument, "k list must not be empty");
  std::optional<EmbeddingHeadParams> params;
  if (config.source == EmbeddingSource::kCheckpoint) {
    require(!config.checkpoint.empty() && fs::is_directory(config.checkpoint), ErrorCode::kNotFound,
            "checkpoint not found: " + config.checkpoint.string());
    params = load_checkpoint(config.checkpoint);
  }
  const Dataset ds = load_dataset(manifest_path, {.features = true, .meshes = false,
                                                  .function_embeddings = config.source == EmbeddingSource::kCheckpoint});
  std::vector<GtPairInfo> index = read_gt_index(gt_dir);
  require(!index.empty(), ErrorCode::kEmpty, "ground-truth index is empty");
  if (config.max_pairs > 0 && index.size() > config.max_pairs) index.resize(config.max_pairs);

  std::vector<std::optional<PairOutput>> results(index.size());
  std::vector<std::exception_ptr> errors(index.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < index.size(); i = next++) {
      try {
        results[i] = evaluate_pair(config, ds, params ? &*params : nullptr, gt_dir, index[i], i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nthreads =
      std::min<std::size_t>(index.size(), config.threads > 0 ? static_cast<std::size_t>(config.threads) : hw);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ensure_dir(out / "metrics");
  ensure_dir(out / "matches");
  EvalSummary summary;
  summary.mean.info.pair_id = "mean";
  summary.mean.info.function = "all";
  ChanceReference chance_mean;
  bool any_chance = false;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const PairOutput& r = *results[i];
    const PairMetrics& m = r.metrics;
    write_text_file(out / "metrics" / (m.info.pair_id + ".json"), pair_metrics_to_json(m).dump(2) + "\n");
    std::vector<double> top;
    for (const auto& rp : r.top) {
      top.insert(top.end(), {static_cast<double>(rp.pair.a.row), static_cast<double>(rp.pair.a.col),
                             static_cast<double>(rp.pair.b.row), static_cast<double>(rp.pair.b.col), rp.score});
    }
    if (!r.top.empty()) {
      save_tensor(Tensor::from<double>({r.top.size(), 5}, top), out / "matches" / (m.info.pair_id + ".dftc"));
    }
    std::vector<std::int64_t> transfer;
    for (const Pixel& p : r.transfer) transfer.insert(transfer.end(), {p.row, p.col});
    save_tensor(Tensor::from<std::int64_t>({r.transfer.size(), 2}, transfer),
                 out / "matches" / (m.info.pair_id + "_transfer.dftc"));

    summary.mean.transfer.normalized_dist += m.transfer.normalized_dist;
    add_into(summary.mean.transfer.pck, m.transfer.pck);
    add_into(summary.mean.best_f1, m.best_f1);
    add_into(summary.mean.ap, m.ap);
    if (m.chance) {
      any_chance = true;
      chance_mean.normalized_dist += m.chance->normalized_dist;
      add_into(chance_mean.pck, m.chance->pck);
      add_into(chance_mean.best_f1, m.chance->best_f1);
      add_into(chance_mean.ap, m.chance->ap);
    }
    summary.pairs.push_back(m);
  }
  const double inv = 1.0 / static_cast<double>(index.size());
  summary.mean.transfer.normalized_dist *= inv;
  scale(summary.mean.transfer.pck, inv);
  scale(summary.mean.best_f1, inv);
  scale(summary.mean.ap, inv);
  if (any_chance) {
    chance_mean.normalized_dist *= inv;
    scale(chance_mean.pck, inv);
    scale(chance_mean.best_f1, inv);
    scale(chance_mean.ap, inv);
    summary.mean.chance = chance_mean;
  }
  write_text_file(out / "metrics.csv", metrics_csv(summary, config.k_list));
  ordered_json agg = pair_metrics_to_json(summary.mean);
  agg["embeddings"] = embedding_source_name(config.source);
  agg["pairs"] = index.size();
  agg["pred_masks"] = config.pred_masks;
  write_text_file(out / "aggregate.json", agg.dump(2) + "\n");
  return summary;
}

int cmd_render(const fs::path& manifest_path, const fs::path& eval_dir, const std::string& pair_id,
               int top_n, const fs::path& out_png) {
  const fs::path metrics_path = eval_dir / "metrics" / (pair_id + ".json");
  require(fs::is_regular_file(metrics_path), ErrorCode::kNotFound, "no metrics for pair " + pair_id);
  const json j = json::parse(read_text_file(metrics_path));
  const Dataset ds =
      load_dataset(manifest_path, {.features = false, .meshes = false, .function_embeddings = false});
  const auto view = [&](const char* id_key, const char* view_key) -> const CameraView& {
    const auto& obj = ds.object(j.at(id_key).get<std::string>());
    const int v = j.at(view_key).get<int>();
    require(v >= 0 && v < static_cast<int>(obj.views.size()), ErrorCode::kOutOfRange,
            "metrics reference missing view " + std::to_string(v));
    return obj.views[static_cast<std::size_t>(v)];
  };
  const CameraView& va = view("object_id_a", "view_a");
  const CameraView& vb = view("object_id_b", "view_b");

  std::vector<PixelPair> ranked;
  const fs::path matches_path = eval_dir / "matches" / (pair_id + ".dftc");
  if (fs::is_regular_file(matches_path)) {
    const auto v = read_tensor(matches_path).values<double>();
    for (std::size_t i = 0; i + 4 < v.size(); i += 5) {
      ranked.push_back({{static_cast<int>(v[i]), static_cast<int>(v[i + 1])},
                        {static_cast<int>(v[i + 2]), static_cast<int>(v[i + 3])}});
    }
  }
  require(top_n <= static_cast<int>(ranked.size()), ErrorCode::kOutOfRange,
          "only " + std::to_string(ranked.size()) + " saved matches for " + pair_id);
  std::vector<Pixel> transfer;
  const fs::path transfer_path = eval_dir / "matches" / (pair_id + "_transfer.dftc");
  if (fs::is_regular_file(transfer_path)) {
    const auto v = read_tensor(transfer_path).values<std::int64_t>();
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
      transfer.push_back({static_cast<int>(v[i]), static_cast<int>(v[i + 1])});
    }
  }
  const MatchFigure fig = render_matches(va, vb, ranked, top_n, transfer);
  if (out_png.has_parent_path()) ensure_dir(out_png.parent_path());
  write_png(fig.image, out_png);
  return fig.lines_drawn;
}

}  // namespace dfc
