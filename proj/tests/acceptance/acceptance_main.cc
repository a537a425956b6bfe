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


// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "dfc/camera.h"
#include "dfc/groundtruth.h"
#include "dfc/losses.h"
#include "dfc/pipeline.h"
#include "dfc/pseudolabel.h"
#include "dfc/train.h"
#include "oracles.h"
#include "test_util.h"

namespace {

namespace fs = std::filesystem;
using namespace dfc;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testing::slurp(e.path());
  }
  return out;
}

std::vector<Pixel> random_pixels(int n, int size, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, size - 1);
  std::vector<Pixel> out;
  for (int i = 0; i < n; ++i) out.push_back({u(rng), u(rng)});
  return out;
}

Outcome gradient_correctness() {
  constexpr int kC = 16, kT = 16, kPoints = 8, kGrid = 6, kStride = 4;
  double worst = 0.0;
  for (int config = 0; config < 10; ++config) {
    const std::uint64_t seed = 100 + static_cast<std::uint64_t>(config);
    const FeatureGrid g1 = testing::random_grid(kGrid, kGrid, kC, kStride, seed);
    const FeatureGrid g2 = testing::random_grid(kGrid, kGrid, kC, kStride, seed + 50);
    const FunctionEmbedding fn = hash_function_embedding("fn" + std::to_string(config), kT);
    std::mt19937_64 rng(seed);
    const int side = kGrid * kStride;
    Batch batch;
    FuncPairSample f{&g1, &g2, &fn, {}, {}, {}, {}};
    f.pos_1 = random_pixels(kPoints, side, rng);
    f.neg_1 = random_pixels(kPoints, side, rng);
    f.pos_2 = random_pixels(kPoints, side, rng);
    f.neg_2 = random_pixels(kPoints, side, rng);
    batch.func.push_back(f);
    SpatialPairSample s{&g1, &g2, &fn, {}};
    const auto a = random_pixels(kPoints, side, rng), b = random_pixels(kPoints, side, rng);
    for (int i = 0; i < kPoints; ++i) s.pairs.push_back({a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]});
    batch.spatial.push_back(s);

    HeadConfig head;
    head.image_channels = kC;
    head.text_channels = kT;
    head.hidden = 32;
    head.output_dim = 8;
    head.mask_head = true;
    EmbeddingHeadParams params = EmbeddingHeadParams::initialize(head, seed);
    std::normal_distribution<double> n(0.0, 0.5);
    params.block_logits << n(rng), n(rng), n(rng);
    params.mask_bias[0] = n(rng);
    TrainConfig cfg;
    cfg.tau = 0.07 + 0.1 * config;

    const auto analytic = compute_gradient(params, batch, cfg).grad.flatten();
    const auto theta = params.flatten();
    const double h = 1e-5;
    EmbeddingHeadParams probe = params;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto t = theta;
      t[i] = theta[i] + h;
      probe.unflatten(t);
      const double up = total_loss(probe, batch, cfg).total;
      t[i] = theta[i] - h;
      probe.unflatten(t);
      const double down = total_loss(probe, batch, cfg).total;
      const double numeric = (up - down) / (2 * h);
      // Central differences at h = 1e-5 carry ~1e-10 of cancellation noise,
      // so magnitudes below 1e-5 are compared on an absolute footing.
      const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-5});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
    }
  }
  return {worst < 1e-4, "max_rel_err=" + fmt_double(worst)};
}

Outcome closed_form_losses() {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd row = testing::random_unit_rows(1, 8, rng);
  const Eigen::MatrixXd e = row.replicate(4, 1);
  const double lf = loss_func(e, e, e, e, 0.07);
  const std::vector<Eigen::MatrixXd> negs(4, row.replicate(127, 1));
  const double ls = loss_spatial(e, e, negs, 0.07);
  const std::vector<std::uint8_t> labels = {0, 1};
  const double lm = loss_mask(Eigen::VectorXd::Zero(2), labels);
  const double ef = std::abs(lf - std::log(3.0)), es = std::abs(ls - std::log(128.0)),
               em = std::abs(lm - std::log(2.0));
  return {ef <= 1e-9 && es <= 1e-9 && em <= 1e-12,
          "func_err=" + fmt_double(ef) + " spatial_err=" + fmt_double(es) + " mask_err=" + fmt_double(em)};
}

Outcome hungarian_oracle() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_int_distribution<int> small(0, 4);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 7;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = trial % 3 == 0 ? small(rng) : u(rng);
    const Assignment a = hungarian(c);
    double recomputed = 0.0;
    for (int i = 0; i < n; ++i) recomputed += c(i, a.row_to_col[static_cast<std::size_t>(i)]);
    const double brute = testing::brute_force_cost(c);
    // Sums are taken in row order both ways, so optimal totals compare with
    // at most last-bit differences from summation order.
    if (std::abs(recomputed - brute) > 1e-12 * std::max(1.0, brute) || a.total_cost != recomputed) {
      ++mismatches;
    }
  }
  return {mismatches == 0, "mismatches=" + std::to_string(mismatches) + "/200"};
}

Outcome otsu_oracle() {
  std::mt19937_64 rng(21);
  int checked = 0, mismatches = 0;
  while (checked < 100) {
    const auto hist = testing::random_histogram(256, 2 + checked % 12, rng);
    const int k = testing::otsu_oracle(hist);
    if (k < 0) continue;
    ++checked;
    if (otsu_threshold(testing::histogram_values(hist)) != static_cast<double>(k) / 256.0) ++mismatches;
  }
  return {mismatches == 0, "mismatches=" + std::to_string(mismatches) + "/100"};
}

Outcome geometry() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pix(0.0, 223.0), dep(0.1, 20.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Camera cam = testing::posed_camera(rng);
    const double r = pix(rng), c = pix(rng);
    const Projection p = project(backproject(r, c, dep(rng), cam), cam);
    worst = std::max(worst, std::hypot(p.row - r, p.col - c));
  }
  const auto scene = testing::cube_scene();
  const double agree = testing::cube_closed_form_agreement(scene, multiview_pairs(scene.view_a, scene.view_b));
  return {worst < 1e-6 && agree >= 0.99,
          "roundtrip_max_px=" + fmt_double(worst) + " cube_within_1px=" + fmt_double(agree)};
}

double rel_dev(double x, double ref) { return ref > 0.0 ? std::abs(x / ref - 1.0) : INFINITY; }

Outcome oracle_discovery(const fs::path& work) {
  GenScenesConfig g;
  g.n_objects = 12;
  g.views_per_object = 30;
  g.seed = 11;
  const fs::path manifest = cmd_gen_scenes(g, work / "data");
  DeriveGtConfig gt;
  gt.views.trials = 2;
  gt.views.seed = 11;
  cmd_derive_gt(manifest, work / "gt", gt);
  EvalConfig e;
  e.max_pairs = 20;
  e.k_list = {23, 10};
  e.chance = false;
  e.source = EmbeddingSource::kOracle;
  const auto oracle = cmd_eval(manifest, work / "gt", e, work / "eval_oracle");
  e.source = EmbeddingSource::kRandom;
  e.chance = true;
  e.chance_trials = 100;
  const auto random = cmd_eval(manifest, work / "gt", e, work / "eval_random");
  const double ap = oracle.mean.ap.at(10), f1 = oracle.mean.best_f1.at(10);
  const double rp = random.mean.transfer.pck.at(10), ra = random.mean.ap.at(10);
  const double cp = random.mean.chance->pck.at(10), ca = random.mean.chance->ap.at(10);
  const bool pass = oracle.pairs.size() == 20 && ap >= 0.9 && f1 >= 0.9 && rel_dev(rp, cp) <= 0.5 &&
                    rel_dev(ra, ca) <= 0.5;
  return {pass, "pairs=" + std::to_string(oracle.pairs.size()) + " oracle_AP@10=" + fmt_double(ap) +
                    " oracle_F1@10=" + fmt_double(f1) + " random_PCK@10=" + fmt_double(rp) +
                    " chance_PCK@10=" + fmt_double(cp) + " random_AP@10=" + fmt_double(ra) +
                    " chance_AP@10=" + fmt_double(ca)};
}

// Shared by the training-ordering and determinism criteria.
struct TrainingSetup {
  fs::path manifest;
  fs::path gt;
};

TrainingSetup training_data(const fs::path& work) {
  GenScenesConfig g;
  g.n_objects = 16;
  g.views_per_object = 8;
  g.seed = 5;
  TrainingSetup s;
  s.manifest = cmd_gen_scenes(g, work / "data");
  DeriveGtConfig gt;
  gt.views.pool = 8;
  gt.views.trials = 2;
  gt.views.seed = 5;
  gt.gt.max_points = 400;
  cmd_derive_gt(s.manifest, work / "gt", gt);
  s.gt = work / "gt";
  return s;
}

TrainConfig acceptance_train_config() {
  TrainConfig c;
  c.lr = 1e-3;
  c.batch_pairs = 8;
  c.points_per_image = 32;
  c.epochs = 200;
  c.seed = 5;
  c.head.hidden = 128;
  c.head.output_dim = 32;
  return c;
}

EvalSummary eval_checkpoint(const TrainingSetup& s, const fs::path& ckpt, const fs::path& out) {
  EvalConfig e;
  e.source = EmbeddingSource::kCheckpoint;
  e.checkpoint = ckpt;
  e.chance = false;
  e.threads = 1;
  return cmd_eval(s.manifest, s.gt, e, out);
}

Outcome training_ordering(const TrainingSetup& s, const fs::path& work) {
  TrainConfig full = acceptance_train_config();
  TrainConfig untrained = full;
  untrained.epochs = 0;
  TrainConfig spatial = full;
  spatial.lambda_func = 0.0;
  spatial.lambda_mask = 0.0;
  spatial.head.mask_head = false;
  spatial.spatial_sampling = SpatialSampling::kWholeObject;
  cmd_train(s.manifest, untrained, work / "untrained");
  cmd_train(s.manifest, full, work / "full");
  cmd_train(s.manifest, spatial, work / "spatial");
  const auto u = eval_checkpoint(s, work / "untrained" / "checkpoint", work / "eval_untrained");
  const auto f = eval_checkpoint(s, work / "full" / "checkpoint", work / "eval_full");
  const auto sp = eval_checkpoint(s, work / "spatial" / "checkpoint", work / "eval_spatial");
  const double fp = f.mean.transfer.pck.at(10), up = u.mean.transfer.pck.at(10);
  const double fa = f.mean.ap.at(23), sa = sp.mean.ap.at(23);
  return {fp >= 2.0 * up && fa > sa,
          "pairs=" + std::to_string(f.pairs.size()) + " full_PCK@10=" + fmt_double(fp) +
              " untrained_PCK@10=" + fmt_double(up) + " full_AP@23=" + fmt_double(fa) +
              " spatial_only_AP@23=" + fmt_double(sa)};
}

Outcome pseudolabel_fidelity(const fs::path& work) {
  GenScenesConfig g;
  g.n_objects = 16;
  g.views_per_object = 19;
  g.seed = 9;
  const fs::path manifest = cmd_gen_scenes(g, work / "data");
  const Dataset ds = load_dataset(manifest, {.features = true, .meshes = false, .function_embeddings = false});
  SynthDetectionsConfig sd;
  sd.seed = 9;
  write_detections(work / "detections.jsonl", synth_detections(ds, sd));
  const auto report = cmd_pseudolabel(manifest, work / "detections.jsonl", work / "pl");
  int good = 0, total = 0;
  double lowest = 1.0;
  for (const auto& [object, per_fn] : report.mean_iou) {
    ++total;
    bool ok = true;
    for (const auto& [fn, iou] : per_fn) {
      ok = ok && iou >= 0.7;
      lowest = std::min(lowest, iou);
    }
    good += ok;
  }
  const double frac = total ? static_cast<double>(good) / total : 0.0;
  return {total == 16 && frac >= 0.9, "objects_iou>=0.7=" + std::to_string(good) + "/" +
                                          std::to_string(total) + " min_iou=" + fmt_double(lowest)};
}

Outcome determinism(const TrainingSetup& s, const fs::path& work) {
  TrainConfig c = acceptance_train_config();
  c.epochs = 5;
  cmd_train(s.manifest, c, work / "train_1");
  cmd_train(s.manifest, c, work / "train_2");
  const bool train_same = tree_contents(work / "train_1") == tree_contents(work / "train_2");
  EvalConfig e;
  e.checkpoint = work / "train_1" / "checkpoint";
  e.chance_trials = 5;
  e.max_pairs = 6;
  cmd_eval(s.manifest, s.gt, e, work / "eval_1");
  e.threads = 1;
  cmd_eval(s.manifest, s.gt, e, work / "eval_2");
  const bool eval_same = tree_contents(work / "eval_1") == tree_contents(work / "eval_2");
  return {train_same && eval_same, std::string("train_identical=") + (train_same ? "yes" : "no") +
                                       " eval_identical=" + (eval_same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "dfc_acceptance";
  std::vector<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      only.emplace_back(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--work DIR] [--only NAME]...\n", argv[0]);
      return 2;
    }
  }
  spdlog::set_level(spdlog::level::warn);
  fs::remove_all(work);
  fs::create_directories(work);

  std::optional<TrainingSetup> training;
  auto training_setup = [&]() -> const TrainingSetup& {
    if (!training) training = training_data(work / "training");
    return *training;
  };

  struct Criterion {
    std::string name;
    double limit_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradient_correctness", 30, gradient_correctness},
      {"closed_form_losses", 0, closed_form_losses},
      {"hungarian_oracle", 10, hungarian_oracle},
      {"otsu_oracle", 0, otsu_oracle},
      {"geometry", 0, geometry},
      {"oracle_discovery", 300, [&] { return oracle_discovery(work / "discovery"); }},
      {"training_ordering", 600,
       [&] { return training_ordering(training_setup(), work / "training"); }},
      {"pseudolabel_fidelity", 0, [&] { return pseudolabel_fidelity(work / "pseudolabel"); }},
      {"determinism", 0, [&] { return determinism(training_setup(), work / "determinism"); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string detail = o.detail + " runtime_s=" + fmt_double(secs);
    if (c.limit_s > 0 && secs >= c.limit_s) {
      o.pass = false;
      detail += " (limit " + fmt_double(c.limit_s) + ")";
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
