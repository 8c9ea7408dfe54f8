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

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <utility>

#include "ckfuzz/checkpoint.h"
#include "json.hpp"

namespace ckfuzz {
namespace {

struct NodeJob {
  TreeNode node;
  VirginMap virgin;
  std::vector<CrashRecord> crashes;
  // Discovered (pattern hash, image), first occurrence order.
  std::vector<std::pair<uint64_t, CheckpointImage>> children;
};

void FuzzNode(const std::shared_ptr<const TargetProgram>& program,
              const std::vector<ByteArray>& seeds, const std::set<uint64_t>& known_patterns,
              const TreeOptions& options, NodeJob& job) {
  try {
    CheckpointImage image = ReadImage(job.node.image_path);
    RestoreOptions restore;
    restore.fuzzer_attach = true;
    restore.extra_plugins.push_back(MakePlugin("reset"));
    Session session = Restore(image, program, std::move(restore));

    std::set<uint64_t> local;
    uint64_t counter = 0;
    session.options().on_child_checkpoint = [&](Session& child, uint64_t hash) {
      if (known_patterns.count(hash) != 0 || !local.insert(hash).second) return;
      job.children.emplace_back(hash, TakeCheckpoint(child, hash, ++counter));
    };
    ForkserverClient client = AttachInProcess(session);
    FuzzOptions fuzz;
    fuzz.budget = options.node_budget;
    fuzz.rng_seed = options.rng_seed + job.node.node_id * 0x9E3779B97F4A7C15ULL;
    fuzz.havoc_ops = options.havoc_ops;
    CampaignResult result = FuzzLoop(client, seeds, job.virgin, fuzz);
    client.Close();
    job.node.stats = result.stats;
    job.crashes = std::move(result.crashes);
  } catch (const Error& e) {
    job.node.failed = true;
    job.node.error = std::string(ErrorCodeName(e.code())) + ": " + e.what();
    job.children.clear();
  }
}

}  // namespace

std::string TreeManifest::ToJson() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const TreeNode& n : nodes) {
    nlohmann::ordered_json j;
    j["node_id"] = n.node_id;
    j["parent"] = n.parent ? nlohmann::ordered_json(*n.parent) : nlohmann::ordered_json(nullptr);
    j["pattern_hash"] = Hex64(n.pattern_hash);
    j["image"] = n.image_path;
    j["execs"] = n.stats.execs;
    j["edges_found"] = n.stats.edges_found;
    j["crashes_unique"] = n.stats.crashes_unique;
    j["status"] = n.failed ? "failed" : "ok";
    if (n.failed) j["error"] = n.error;
    out.push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

TreeManifest TreeRun(std::shared_ptr<const TargetProgram> program,
                     const std::filesystem::path& root_image, const std::vector<ByteArray>& seeds,
                     const TreeOptions& options) {
  namespace fs = std::filesystem;
  if (options.workers == 0) throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "no seeds");
  fs::create_directories(options.out_dir / "images");
  fs::create_directories(options.out_dir / "crashes");

  TreeManifest manifest;
  VirginMap global;
  std::set<uint64_t> known_patterns;
  std::set<uint64_t> crash_hashes;

  TreeNode root;
  root.image_path = root_image.string();
  try {
    root.pattern_hash = ReadImage(root_image).pattern_hash;
  } catch (const Error&) {
    // Reported when the node is fuzzed.
  }
  known_patterns.insert(root.pattern_hash);
  manifest.nodes.push_back(root);

  std::vector<size_t> level = {0};
  while (!level.empty()) {
    std::vector<NodeJob> jobs(level.size());
    for (size_t i = 0; i < level.size(); ++i) {
      jobs[i].node = manifest.nodes[level[i]];
      jobs[i].virgin = global;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i = next++; i < jobs.size(); i = next++) {
        FuzzNode(program, seeds, known_patterns, options, jobs[i]);
      }
    };
    const size_t threads = std::min<size_t>(options.workers, jobs.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }

    std::vector<size_t> next_level;
    for (NodeJob& job : jobs) {
      manifest.nodes[job.node.node_id] = job.node;
      if (job.node.failed) continue;
      global.MergeFrom(job.virgin);
      for (const CrashRecord& crash : job.crashes) {
        if (crash_hashes.insert(crash.dedup_hash).second) {
          WriteFileBytes(options.out_dir / "crashes" / (Hex64(crash.dedup_hash) + ".bin"),
                         crash.input);
        }
      }
      for (auto& [hash, image] : job.children) {
        if (manifest.nodes.size() >= options.max_nodes) break;
        if (!known_patterns.insert(hash).second) continue;
        TreeNode child;
        child.node_id = manifest.nodes.size();
        child.parent = job.node.node_id;
        child.pattern_hash = hash;
        image.created_counter = child.node_id;
        const fs::path path =
            options.out_dir / "images" / ("node_" + std::to_string(child.node_id) + ".ckfz");
        WriteImage(image, path);
        child.image_path = path.string();
        next_level.push_back(child.node_id);
        manifest.nodes.push_back(std::move(child));
      }
    }
    level = std::move(next_level);
  }

  std::ofstream out(options.out_dir / "tree.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write tree.json");
  out << manifest.ToJson();
  return manifest;
}

}  // namespace ckfuzz
