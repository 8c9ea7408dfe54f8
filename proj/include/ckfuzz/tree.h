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


// Execution state tree: every checkpoint image is a node that is restored
// and fuzzed on its own; new host-call patterns reported by the analysis
// plugin inside fuzz children become child nodes.
//
// Nodes are processed level by level. All nodes of a level start from the
// global virgin map as it stood when the level began, and their results are
// merged in node order once the level is done, so the tree does not depend
// on the number of workers.

#ifndef CKFUZZ_TREE_H_
#define CKFUZZ_TREE_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ckfuzz/campaign.h"
#include "ckfuzz/common.h"
#include "ckfuzz/target_vm.h"

namespace ckfuzz {

struct TreeNode {
  uint64_t node_id = 0;
  std::optional<uint64_t> parent;
  uint64_t pattern_hash = 0;
  std::string image_path;
  CampaignStats stats;
  bool failed = false;
  std::string error;  // set when failed
};

struct TreeManifest {
  std::vector<TreeNode> nodes;

  std::string ToJson() const;
};

struct TreeOptions {
  uint32_t workers = 1;
  uint32_t max_nodes = 64;
  uint64_t node_budget = 1000;  // execs per node
  uint64_t rng_seed = 0;
  uint32_t havoc_ops = 16;
  // Written to: images/node_<id>.ckfz, crashes/, tree.json.
  std::filesystem::path out_dir;
};

// Throws Error{kInvalidArgument} when workers is 0 or seeds are empty.
// A node whose image fails to load or attach is marked failed.
TreeManifest TreeRun(std::shared_ptr<const TargetProgram> program,
                     const std::filesystem::path& root_image, const std::vector<ByteArray>& seeds,
                     const TreeOptions& options);

}  // namespace ckfuzz

#endif  // CKFUZZ_TREE_H_
