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


// The fuzzing loop: seed dry run, deterministic stages, havoc and splice
// per queue entry, novelty accounting against a virgin map, crash
// deduplication and periodic stats.

#ifndef CKFUZZ_CAMPAIGN_H_
#define CKFUZZ_CAMPAIGN_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ckfuzz/common.h"
#include "ckfuzz/control.h"
#include "ckfuzz/coverage.h"
#include "ckfuzz/forkserver.h"
#include "ckfuzz/mutator.h"
#include "ckfuzz/target_vm.h"

namespace ckfuzz {

struct QueueEntry {
  uint64_t id = 0;
  ByteArray input;
  std::string discovered_by;  // "seed" or a stage name
  uint64_t exec_steps = 0;
  // Set for entries that brought a new edge.
  bool favored = false;
};

struct CrashRecord {
  ByteArray input;
  uint32_t site = 0;
  uint64_t dedup_hash = 0;
};

struct CampaignStats {
  uint64_t execs = 0;
  double execs_per_sec = 0;
  uint32_t edges_found = 0;
  uint32_t crashes_unique = 0;
  uint32_t queue_len = 0;
  uint64_t elapsed_ms = 0;
};

struct Verdict {
  enum class Kind : uint8_t { kInteresting, kCrash, kBoring, kHang };

  Kind kind = Kind::kBoring;
  NewCoverage novelty = NewCoverage::kNone;  // kInteresting
  CrashRecord crash;                         // kCrash
  RunStatus status;
  uint64_t exec_steps = 0;
};

// FNV-1a 64 over the classified map, then the site as u32 LE.
uint64_t CrashDedupHash(ConstMapSpan classified, uint32_t site);

// Runs one input and classifies the result. Crashes and hangs leave the
// virgin map alone. Throws Error{kTargetLost}.
Verdict Evaluate(ForkserverClient& client, VirginMap& virgin, ByteSpan input);

// has_new_bits on the campaign-global map; callers hold the lock.
inline NewCoverage MergeCoverage(VirginMap& global, ConstMapSpan classified) {
  return HasNewBits(global, classified);
}

struct FuzzOptions {
  uint64_t budget = 1;  // execs
  uint64_t rng_seed = 0;
  uint32_t havoc_ops = 16;
  uint32_t havoc_rounds = 256;
  uint32_t splice_rounds = 32;
  // Wall-clock cap on top of the exec budget.
  std::optional<std::chrono::milliseconds> time_budget;
  std::chrono::milliseconds stats_interval{250};
  // Called for every stats row.
  std::function<void(const CampaignStats&)> on_stats;
};

struct CampaignResult {
  std::vector<QueueEntry> queue;
  std::vector<CrashRecord> crashes;
  CampaignStats stats;
  std::vector<CampaignStats> stats_rows;
};

// Deterministic given (target, seeds, options) unless a time budget cuts
// it short. Throws Error{kInvalidArgument} on an empty seed list or zero
// budget and Error{kSetup} when every dry-run seed crashes or hangs.
CampaignResult FuzzLoop(ForkserverClient& client, const std::vector<ByteArray>& seeds,
                        VirginMap& virgin, const FuzzOptions& options);

// Library-mode attach: gives `session` an in-process control point and
// returns a client that drives it by pumping.
ForkserverClient AttachInProcess(Session& session,
                                 std::chrono::milliseconds timeout = kDefaultAttachTimeout);

inline constexpr const char* kStatsHeader =
    "elapsed_ms,execs,execs_per_sec,edges_found,crashes_unique,queue_len";

std::string FormatStatsRow(const CampaignStats& stats);

// Writes queue/, crashes/<hash>.bin and stats.csv under `out_dir`.
void WriteCampaignOutput(const CampaignResult& result, const std::filesystem::path& out_dir);

// Every regular file in `dir`, sorted by name.
std::vector<ByteArray> LoadSeeds(const std::filesystem::path& dir);

}  // namespace ckfuzz

#endif  // CKFUZZ_CAMPAIGN_H_
