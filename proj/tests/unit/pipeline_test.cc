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

#include <fstream>

#include <gtest/gtest.h>

#include "dfc/render.h"
#include "test_util.h"

namespace dfc {
namespace {

namespace fs = std::filesystem;
using testing::error_code_of;
using testing::slurp;
using testing::TempDir;

GenScenesConfig small_scenes() {
  GenScenesConfig g;
  g.n_objects = 4;
  g.views_per_object = 4;
  g.image_size = 112;
  g.features.channels = 8;
  g.text_channels = 6;
  g.seed = 3;
  return g;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

TEST(GenScenes, CountsAndDeterminism) {
  TempDir a, b;
  GenScenesConfig g = small_scenes();
  g.n_objects = 2;
  const auto m = read_manifest(cmd_gen_scenes(g, a.path()));
  std::size_t views = 0;
  for (const auto& o : m.objects) views += o.views.size();
  EXPECT_EQ(views, 8u);
  EXPECT_EQ(m.function_embeddings.size(), 2u);
  cmd_gen_scenes(g, b.path());
  const auto ta = tree_contents(a.path()), tb = tree_contents(b.path());
  EXPECT_EQ(ta.size(), tb.size());
  EXPECT_TRUE(ta == tb);
  g.seed = 4;
  TempDir c;
  cmd_gen_scenes(g, c.path());
  EXPECT_FALSE(tree_contents(c.path()) == ta);
}

TEST(GenScenes, RejectsBadConfig) {
  TempDir d;
  GenScenesConfig g = small_scenes();
  g.views_per_object = 0;
  EXPECT_EQ(error_code_of([&] { cmd_gen_scenes(g, d.path()); }), ErrorCode::kInvalidArgument);
  g = small_scenes();
  g.image_size = 100;
  EXPECT_EQ(error_code_of([&] { cmd_gen_scenes(g, d.path()); }), ErrorCode::kInvalidArgument);
  g = small_scenes();
  g.part_variation = 2.0;
  EXPECT_EQ(error_code_of([&] { cmd_gen_scenes(g, d.path()); }), ErrorCode::kInvalidArgument);
}

class EndToEnd : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    manifest_ = new fs::path(cmd_gen_scenes(small_scenes(), dir_->path() / "data"));
    DeriveGtConfig gt;
    gt.views.pool = 4;
    gt.views.top_k = 3;
    gt.views.trials = 2;
    gt.gt.max_points = 80;
    index_ = new std::vector<GtPairInfo>(cmd_derive_gt(*manifest_, gt_dir(), gt));
  }
  static void TearDownTestSuite() {
    delete index_;
    delete manifest_;
    delete dir_;
  }
  static fs::path gt_dir() { return dir_->path() / "gt"; }
  static EvalConfig quick_eval(EmbeddingSource source) {
    EvalConfig e;
    e.source = source;
    e.chance_trials = 2;
    e.threads = 1;
    return e;
  }
  static TempDir* dir_;
  static fs::path* manifest_;
  static std::vector<GtPairInfo>* index_;
};

TempDir* EndToEnd::dir_ = nullptr;
fs::path* EndToEnd::manifest_ = nullptr;
std::vector<GtPairInfo>* EndToEnd::index_ = nullptr;

TEST_F(EndToEnd, DeriveGtWritesIndexAndPairs) {
  const Manifest m = read_manifest(*manifest_);
  ASSERT_FALSE(index_->empty());
  EXPECT_EQ(index_->size(), m.alignments.size() * 2);
  EXPECT_EQ(read_gt_index(gt_dir()).size(), index_->size());
  for (const auto& info : *index_) {
    const auto set = read_gt_pairs(gt_dir(), info);
    EXPECT_EQ(set.size(), info.count);
    EXPECT_GT(info.count, 0u);
    EXPECT_LE(info.count, 80u);
    EXPECT_GE(info.residual_mean, 0.0);
    EXPECT_LT(info.residual_mean, 0.05);
  }
}

TEST_F(EndToEnd, OracleBeatsRandom) {
  TempDir out;
  const auto oracle = cmd_eval(*manifest_, gt_dir(), quick_eval(EmbeddingSource::kOracle), out / "o");
  const auto random = cmd_eval(*manifest_, gt_dir(), quick_eval(EmbeddingSource::kRandom), out / "r");
  EXPECT_EQ(oracle.pairs.size(), index_->size());
  EXPECT_GT(oracle.mean.ap.at(23), random.mean.ap.at(23));
  EXPECT_GT(oracle.mean.transfer.pck.at(23), random.mean.transfer.pck.at(23));
  EXPECT_TRUE(fs::exists(out / "o" / "aggregate.json"));
  EXPECT_TRUE(fs::exists(out / "o" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(out / "o" / "metrics" / (index_->front().pair_id + ".json")));
  ASSERT_TRUE(oracle.pairs.front().chance.has_value());
  const int lines = cmd_render(*manifest_, out / "o", index_->front().pair_id, 10, out / "fig.png");
  EXPECT_EQ(lines, 10);
  EXPECT_GT(read_png(out / "fig.png").width, 0);
}

TEST_F(EndToEnd, TrainThenEvalIsDeterministic) {
  TempDir out;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_pairs = 2;
  tc.points_per_image = 8;
  tc.head.hidden = 16;
  tc.head.output_dim = 8;
  cmd_train(*manifest_, tc, out / "t1");
  cmd_train(*manifest_, tc, out / "t2");
  EXPECT_EQ(tree_contents(out / "t1"), tree_contents(out / "t2"));
  EXPECT_TRUE(fs::exists(out / "t1" / "loss.csv"));
  EvalConfig e = quick_eval(EmbeddingSource::kCheckpoint);
  e.checkpoint = out / "t1" / "checkpoint";
  e.max_pairs = 2;
  cmd_eval(*manifest_, gt_dir(), e, out / "e1");
  cmd_eval(*manifest_, gt_dir(), e, out / "e2");
  EXPECT_EQ(tree_contents(out / "e1"), tree_contents(out / "e2"));
  EXPECT_EQ(read_gt_index(gt_dir()).size(), index_->size());
}

TEST_F(EndToEnd, PseudolabelRecoversPartMasks) {
  TempDir out;
  const Dataset ds = load_dataset(*manifest_);
  const auto dets = synth_detections(ds, {});
  write_detections(out / "dets.jsonl", dets);
  PseudolabelConfig pl;
  pl.surface_points = 8000;
  const auto report = cmd_pseudolabel(*manifest_, out / "dets.jsonl", out / "pl", pl);
  EXPECT_EQ(report.detections, dets.size());
  EXPECT_NO_THROW(read_manifest(report.manifest));
  ASSERT_EQ(report.mean_iou.size(), 4u);
  for (const auto& [object, per_fn] : report.mean_iou) {
    for (const auto& [fn, iou] : per_fn) EXPECT_GT(iou, 0.4) << object << " " << fn;
  }
}

TEST(EvalNames, RoundTrip) {
  for (auto s : {EmbeddingSource::kCheckpoint, EmbeddingSource::kOracle, EmbeddingSource::kRandom}) {
    EXPECT_EQ(embedding_source_from_name(embedding_source_name(s)), s);
  }
  EXPECT_EQ(error_code_of([] { embedding_source_from_name("bogus"); }), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace dfc
