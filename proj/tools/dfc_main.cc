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

// Command-line entry point: dfc <subcommand> [flags].

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dfc/error.h"
#include "dfc/pipeline.h"

namespace {

namespace fs = std::filesystem;

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    dfc::require(used == item.size() && !item.empty() && k > 0, dfc::ErrorCode::kInvalidArgument,
                 "--k expects positive integers separated by commas, got '" + text + "'");
    ks.push_back(k);
  }
  dfc::require(!ks.empty(), dfc::ErrorCode::kInvalidArgument, "--k must not be empty");
  return ks;
}

bool on_off(const std::string& value, const char* flag) {
  if (value == "on") return true;
  if (value == "off") return false;
  dfc::fail(dfc::ErrorCode::kInvalidArgument, std::string(flag) + " expects on|off");
}

void print_error(const std::string& subcommand, std::string_view code, const std::string& message) {
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["subcommand"] = subcommand;
  j["code"] = code;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("dfc"));

  CLI::App app{"Dense functional correspondence toolkit"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  // Shared flags.
  fs::path manifest, out;
  std::uint64_t seed = 0;

  // gen-scenes
  dfc::GenScenesConfig gen;
  std::string functions = "pour-with,lift-with";
  auto* gen_cmd = app.add_subcommand("gen-scenes", "Generate a synthetic dataset");
  gen_cmd->add_option("--out", out, "Output directory")->required();
  gen_cmd->add_option("--seed", seed, "Random seed");
  gen_cmd->add_option("--objects", gen.n_objects, "Number of objects");
  gen_cmd->add_option("--views", gen.views_per_object, "Views per object");
  gen_cmd->add_option("--functions", functions, "Comma-separated function names");
  gen_cmd->add_option("--image-size", gen.image_size, "Square image side in pixels");
  gen_cmd->add_option("--channels", gen.features.channels, "Feature channels per block");
  gen_cmd->add_option("--text-channels", gen.text_channels, "Function embedding width");
  gen_cmd->add_option("--focal", gen.focal, "Focal length in pixels");
  gen_cmd->add_option("--distance", gen.camera_distance, "Camera distance in meters");
  gen_cmd->add_option("--azimuth-spread", gen.azimuth_spread_deg,
                      "Azimuth range in degrees covered by the views");
  gen_cmd->add_option("--azimuth-offset", gen.azimuth_offset_deg,
                      "Azimuth of the view arc center relative to the part, degrees");
  gen_cmd->add_option("--part-variation", gen.part_variation,
                      "Spread of part shape parameters in [0, 1]");

  // synth-detections
  dfc::SynthDetectionsConfig synth;
  fs::path detections;
  auto* synth_cmd = app.add_subcommand("synth-detections", "Write detections bounding the manifest part masks");
  synth_cmd->add_option("--manifest", manifest)->required();
  synth_cmd->add_option("--out", detections, "Output JSONL file")->required();
  synth_cmd->add_option("--seed", seed);
  synth_cmd->add_option("--trials", synth.trials, "Detections per view");
  synth_cmd->add_option("--jitter", synth.jitter_px, "Uniform box-edge jitter in pixels");

  // pseudolabel
  dfc::PseudolabelConfig pl;
  auto* pl_cmd = app.add_subcommand("pseudolabel", "Aggregate detections into part masks");
  pl_cmd->add_option("--manifest", manifest)->required();
  pl_cmd->add_option("--detections", detections)->required();
  pl_cmd->add_option("--out", out)->required();
  pl_cmd->add_option("--seed", seed);
  pl_cmd->add_option("--points", pl.surface_points, "Surface samples per object");
  pl_cmd->add_option("--splat-radius", pl.mask.splat_radius);
  pl_cmd->add_option("--close-iterations", pl.mask.close_iterations);

  // derive-gt
  dfc::DeriveGtConfig gtc;
  auto* gt_cmd = app.add_subcommand("derive-gt", "Derive ground-truth correspondences from alignments");
  gt_cmd->add_option("--manifest", manifest)->required();
  gt_cmd->add_option("--out", out)->required();
  gt_cmd->add_option("--seed", seed);
  gt_cmd->add_option("--trials", gtc.views.trials, "View pairs per alignment");
  gt_cmd->add_option("--top-k", gtc.views.top_k, "Most part-visible views to sample from");
  gt_cmd->add_option("--pool", gtc.views.pool, "Views considered per object");
  gt_cmd->add_option("--max-points", gtc.gt.max_points, "FPS cap on part pixels (0 = none)");

  // train
  dfc::TrainConfig tc;
  std::string spatial = "part", mask_head = "on";
  auto* train_cmd = app.add_subcommand("train", "Train the embedding head");
  train_cmd->add_option("--manifest", manifest)->required();
  train_cmd->add_option("--out", out)->required();
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--epochs", tc.epochs);
  train_cmd->add_option("--tau", tc.tau);
  train_cmd->add_option("--lr", tc.lr);
  train_cmd->add_option("--lambda-func", tc.lambda_func);
  train_cmd->add_option("--lambda-spatial", tc.lambda_spatial);
  train_cmd->add_option("--lambda-mask", tc.lambda_mask);
  train_cmd->add_option("--spatial-sampling", spatial, "part|object");
  train_cmd->add_option("--mask-head", mask_head, "on|off");
  train_cmd->add_option("--batch-pairs", tc.batch_pairs);
  train_cmd->add_option("--points", tc.points_per_image, "Points sampled per image");
  train_cmd->add_option("--steps-per-epoch", tc.steps_per_epoch);
  train_cmd->add_option("--hidden", tc.head.hidden);
  train_cmd->add_option("--output-dim", tc.head.output_dim);

  // eval
  dfc::EvalConfig ec;
  std::string k_text = "23,10", embeddings = "checkpoint", pred_masks = "on";
  fs::path gt_dir;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate embeddings on ground-truth pairs");
  eval_cmd->add_option("--manifest", manifest)->required();
  eval_cmd->add_option("--gt", gt_dir, "Directory written by derive-gt")->required();
  eval_cmd->add_option("--out", out)->required();
  eval_cmd->add_option("--seed", seed);
  eval_cmd->add_option("--embeddings", embeddings, "checkpoint|oracle|random");
  eval_cmd->add_option("--checkpoint", ec.checkpoint);
  eval_cmd->add_option("--k", k_text, "Pixel thresholds, e.g. 23,10");
  eval_cmd->add_option("--pred-masks", pred_masks, "on|off");
  eval_cmd->add_flag("--similarity-only", ec.similarity_only, "Rank by similarity without cycle consistency");
  eval_cmd->add_option("--max-pairs", ec.max_pairs, "Evaluate only the first N pairs");
  eval_cmd->add_option("--threads", ec.threads, "Worker threads (0 = available cores)");
  eval_cmd->add_option("--chance-trials", ec.chance_trials);
  eval_cmd->add_option("--oracle-scale", ec.oracle_scale, "Oracle frame scale in meters");

  // render
  std::string pair_id;
  int top_n = 10;
  fs::path eval_dir, png;
  auto* render_cmd = app.add_subcommand("render", "Draw top matches of an evaluated pair");
  render_cmd->add_option("--manifest", manifest)->required();
  render_cmd->add_option("--eval", eval_dir, "Directory written by eval")->required();
  render_cmd->add_option("--pair", pair_id)->required();
  render_cmd->add_option("--top", top_n, "Number of match lines");
  render_cmd->add_option("--out", png, "Output PNG path")->required();

  std::string subcommand = "dfc";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(subcommand, "usage", e.what());
    return 2;
  }
  if (!app.get_subcommands().empty()) subcommand = app.get_subcommands().front()->get_name();

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    nlohmann::ordered_json result;
    result["status"] = "ok";
    result["subcommand"] = subcommand;
    if (*gen_cmd) {
      gen.seed = seed;
      gen.functions.clear();
      std::stringstream ss(functions);
      for (std::string f; std::getline(ss, f, ',');) {
        if (!f.empty()) gen.functions.push_back(f);
      }
      result["manifest"] = dfc::cmd_gen_scenes(gen, out).string();
    } else if (*synth_cmd) {
      synth.seed = seed;
      const auto ds = dfc::load_dataset(manifest, {.features = true, .meshes = false, .function_embeddings = false});
      const auto dets = dfc::synth_detections(ds, synth);
      dfc::write_detections(detections, dets);
      result["detections"] = dets.size();
    } else if (*pl_cmd) {
      pl.seed = seed;
      const auto report = dfc::cmd_pseudolabel(manifest, detections, out, pl);
      result["manifest"] = report.manifest.string();
      result["detections"] = report.detections;
    } else if (*gt_cmd) {
      gtc.views.seed = seed;
      const auto index = dfc::cmd_derive_gt(manifest, out, gtc);
      result["pairs"] = index.size();
    } else if (*train_cmd) {
      tc.seed = seed;
      tc.spatial_sampling = dfc::spatial_sampling_from_name(spatial);
      tc.head.mask_head = on_off(mask_head, "--mask-head");
      tc.validate();
      const auto r = dfc::cmd_train(manifest, tc, out);
      result["initial_total"] = r.curve.front().loss.total;
      result["final_total"] = r.curve.back().loss.total;
      result["skipped_pairs"] = r.skipped_pairs;
    } else if (*eval_cmd) {
      ec.seed = seed;
      ec.source = dfc::embedding_source_from_name(embeddings);
      ec.k_list = parse_k_list(k_text);
      ec.pred_masks = on_off(pred_masks, "--pred-masks");
      const auto summary = dfc::cmd_eval(manifest, gt_dir, ec, out);
      result["aggregate"] = dfc::pair_metrics_to_json(summary.mean);
    } else if (*render_cmd) {
      result["lines"] = dfc::cmd_render(manifest, eval_dir, pair_id, top_n, png);
    }
    std::cout << result.dump() << std::endl;
  } catch (const dfc::Error& e) {
    print_error(subcommand, dfc::error_code_name(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(subcommand, "internal", e.what());
    return 1;
  }
  return 0;
}
