// Copyright 2026 The ckfuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "ckfuzz/tree.h"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "ckfuzz/checkpoint.h"
#include "test_util.h"
#include "json.hpp"

namespace ckfuzz {
namespace {

using testing::Bytes;
using testing::LoadTarget;

std::filesystem::path MakeRootImage(const testing::TempDir& dir) {
  HookRegistry hooks;
  hooks.Register(MakePlugin("analysis:window=1"));
  Session session = Session::Launch(LoadTarget("three_patterns.fza"), std::move(hooks), {0x07});
  AdvanceResult r = session.Advance(1'000'000);
  EXPECT_EQ(r.kind, AdvanceResult::Kind::kCheckpoint);
  const auto path = dir / "root.ckfz";
  WriteImage(TakeCheckpoint(session, r.pattern_hash, 0), path);
  return path;
}

TreeManifest RunTree(const testing::TempDir& dir, uint32_t workers, uint32_t max_nodes = 64) {
  TreeOptions options;
  options.workers = workers;
  options.max_nodes = max_nodes;
  options.node_budget = 2000;
  options.out_dir = dir / ("out" + std::to_string(workers));
  return TreeRun(LoadTarget("three_patterns.fza"), MakeRootImage(dir), {ByteArray{0x00}}, options);
}

std::set<uint64_t> Hashes(const TreeManifest& m) {
  std::set<uint64_t> out;
  for (const TreeNode& n : m.nodes) out.insert(n.pattern_hash);
  return out;
}

TEST(TreeTest, ThreePatternsGiveThreeChildren) {
  testing::TempDir dir;
  TreeManifest m = RunTree(dir, 1);
  ASSERT_EQ(m.nodes.size(), 4u);
  EXPECT_FALSE(m.nodes[0].parent.has_value());
  for (size_t i = 1; i < m.nodes.size(); ++i) {
    EXPECT_EQ(m.nodes[i].node_id, i);
    EXPECT_EQ(m.nodes[i].parent, std::optional<uint64_t>(0));
    EXPECT_FALSE(m.nodes[i].failed) << m.nodes[i].error;
    EXPECT_TRUE(std::filesystem::exists(m.nodes[i].image_path));
  }
  EXPECT_EQ(Hashes(m).size(), 4u);
}

TEST(TreeTest, WorkerCountDoesNotChangeResult) {
  testing::TempDir dir;
  EXPECT_EQ(Hashes(RunTree(dir, 1)), Hashes(RunTree(dir, 4)));
}

TEST(TreeTest, MaxNodesCaps) {
  testing::TempDir dir;
  EXPECT_EQ(RunTree(dir, 1, 2).nodes.size(), 2u);
  EXPECT_EQ(RunTree(dir, 2, 1).nodes.size(), 1u);
}

TEST(TreeTest, ManifestJson) {
  testing::TempDir dir;
  TreeManifest m = RunTree(dir, 2);
  std::ifstream in(dir / "out2/tree.json");
  ASSERT_TRUE(in);
  nlohmann::json j = nlohmann::json::parse(in);
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), m.nodes.size());
  EXPECT_TRUE(j[0]["parent"].is_null());
  EXPECT_EQ(j[1]["parent"], 0);
  EXPECT_EQ(j[0]["status"], "ok");
  EXPECT_EQ(j[0]["pattern_hash"].get<std::string>().size(), 16u);
}

TEST(TreeTest, CorruptRootIsFailedNode) {
  testing::TempDir dir;
  const auto bad = dir / "bad.ckfz";
  std::ofstream(bad) << "CKFZ garbage";
  TreeOptions options;
  options.out_dir = dir / "out";
  TreeManifest m = TreeRun(LoadTarget("three_patterns.fza"), bad, {ByteArray{0}}, options);
  ASSERT_EQ(m.nodes.size(), 1u);
  EXPECT_TRUE(m.nodes[0].failed);
  EXPECT_FALSE(m.nodes[0].error.empty());
}

}  // namespace
}  // namespace ckfuzz
