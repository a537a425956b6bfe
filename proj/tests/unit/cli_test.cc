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


#include <array>
#include <cstdio>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.h"

namespace {

using dfc::testing::TempDir;

struct Run {
  int exit_code = 0;
  std::string out;
};

Run run(const std::string& args, const TempDir& dir) {
  const std::string err = (dir / "stderr.txt").string();
  const std::string cmd = std::string(DFC_CLI_PATH) + " " + args + " 2>" + err;
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (r.exit_code != 0) r.out = dfc::testing::slurp(dir / "stderr.txt");
  return r;
}

nlohmann::json last_json_line(const std::string& text) {
  const auto end = text.find_last_not_of('\n');
  const auto start = text.rfind('\n', end);
  return nlohmann::json::parse(text.substr(start == std::string::npos ? 0 : start + 1));
}

TEST(Cli, FullPipeline) {
  TempDir dir;
  const std::string d = dir.path().string();
  auto r = run("gen-scenes --out " + d + "/data --objects 4 --views 3 --image-size 112 --channels 8", dir);
  ASSERT_EQ(r.exit_code, 0) << r.out;
  auto j = last_json_line(r.out);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["subcommand"], "gen-scenes");
  const std::string manifest = j["manifest"];

  r = run("derive-gt --manifest " + manifest + " --out " + d + "/gt --pool 3 --top-k 2 --trials 1 --max-points 50", dir);
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_GT(last_json_line(r.out)["pairs"].get<int>(), 0);

  r = run("train --manifest " + manifest + " --out " + d + "/train --epochs 1 --batch-pairs 2 --points 8 --hidden 16 --output-dim 8", dir);
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_TRUE(last_json_line(r.out).contains("final_total"));

  r = run("eval --manifest " + manifest + " --gt " + d + "/gt --out " + d + "/eval --checkpoint " + d +
              "/train/checkpoint --chance-trials 1 --max-pairs 1 --threads 1", dir);
  ASSERT_EQ(r.exit_code, 0) << r.out;
  j = last_json_line(r.out);
  EXPECT_TRUE(j["aggregate"].is_object());
}

TEST(Cli, ErrorsAreJsonWithNonZeroExit) {
  TempDir dir;
  auto r = run("train --manifest " + (dir / "missing.json").string() + " --out " + dir.path().string(), dir);
  EXPECT_EQ(r.exit_code, 1);
  auto j = last_json_line(r.out);
  EXPECT_EQ(j["status"], "error");
  EXPECT_EQ(j["subcommand"], "train");
  EXPECT_EQ(j["code"], "io");

  r = run("gen-scenes --out " + dir.path().string() + "/x --views 0", dir);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(last_json_line(r.out)["code"], "invalid_argument");

  r = run("gen-scenes", dir);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(last_json_line(r.out)["code"], "usage");

  r = run("train --manifest x --out y --mask-head maybe", dir);
  EXPECT_EQ(r.exit_code, 1);
}

}  // namespace
