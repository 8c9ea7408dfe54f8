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


#include "ckfuzz/campaign.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>
#include <utility>

namespace ckfuzz {
namespace {

using Clock = std::chrono::steady_clock;

class Fuzzer {
 public:
  Fuzzer(ForkserverClient& client, VirginMap& virgin, const FuzzOptions& options)
      : client_(client), virgin_(virgin), options_(options), rng_(options.rng_seed) {}

  CampaignResult Run(const std::vector<ByteArray>& seeds) {
    start_ = Clock::now();
    next_row_ = options_.stats_interval;

    bool any_usable = false;
    for (const ByteArray& seed : seeds) {
      if (Exhausted()) break;
      const Verdict v = Execute(seed, "seed", /*admit_boring=*/true);
      any_usable |= v.kind == Verdict::Kind::kInteresting || v.kind == Verdict::Kind::kBoring;
    }
    if (!any_usable) {
      throw Error(ErrorCode::kSetup, "every seed crashes or hangs the target");
    }
    std::vector<bool> deterministic_done;
    size_t cursor = 0;
    while (!Exhausted()) {
      deterministic_done.resize(result_.queue.size(), false);
      const ByteArray input = result_.queue[cursor].input;
      if (!deterministic_done[cursor]) {
        deterministic_done[cursor] = true;
        ForEachDeterministicMutant(input, [this](const MutationPlan& plan, ByteSpan mutant) {
          if (Exhausted()) return false;
          Execute(mutant, StageName(plan.stage));
          return true;
        });
      }
      for (uint32_t r = 0; r < options_.havoc_rounds && !Exhausted(); ++r) {
        Execute(Havoc(input, rng_, options_.havoc_ops), "havoc");
      }
      if (result_.queue.size() >= 2 && input.size() >= 2) {
        for (uint32_t r = 0; r < options_.splice_rounds && !Exhausted(); ++r) {
          const size_t other = rng_.Below(result_.queue.size());
          const ByteArray& partner = result_.queue[other].input;
          if (other == cursor || partner.size() < 2) continue;
          ByteArray spliced = Splice(input, partner, rng_);
          Execute(Havoc(spliced, rng_, options_.havoc_ops), "splice");
        }
      }
      cursor = (cursor + 1) % result_.queue.size();
    }
    Snapshot();
    result_.stats_rows.push_back(result_.stats);
    if (options_.on_stats) options_.on_stats(result_.stats);
    return std::move(result_);
  }

 private:
  bool Exhausted() {
    if (execs_ >= options_.budget) return true;
    return options_.time_budget && Clock::now() - start_ >= *options_.time_budget;
  }

  Verdict Execute(ByteSpan input, std::string_view stage, bool admit_boring = false) {
    Verdict v = Evaluate(client_, virgin_, input);
    ++execs_;
    switch (v.kind) {
      case Verdict::Kind::kInteresting:
        Admit(input, stage, v);
        break;
      case Verdict::Kind::kBoring:
        if (admit_boring) Admit(input, stage, v);
        break;
      case Verdict::Kind::kCrash:
        if (crash_hashes_.insert(v.crash.dedup_hash).second) result_.crashes.push_back(v.crash);
        break;
      case Verdict::Kind::kHang:
        break;
    }
    MaybeEmitRow();
    return v;
  }

  void Admit(ByteSpan input, std::string_view stage, const Verdict& v) {
    QueueEntry entry;
    entry.id = result_.queue.size();
    entry.input.assign(input.begin(), input.end());
    entry.discovered_by = std::string(stage);
    entry.exec_steps = v.exec_steps;
    entry.favored = v.novelty == NewCoverage::kNewEdge;
    result_.queue.push_back(std::move(entry));
  }

  void Snapshot() {
    CampaignStats& s = result_.stats;
    const auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start_);
    s.execs = execs_;
    s.elapsed_ms = static_cast<uint64_t>(elapsed.count() / 1000);
    s.execs_per_sec = elapsed.count() > 0 ? execs_ * 1e6 / static_cast<double>(elapsed.count()) : 0;
    s.edges_found = virgin_.CountTouchedSlots();
    s.crashes_unique = static_cast<uint32_t>(result_.crashes.size());
    s.queue_len = static_cast<uint32_t>(result_.queue.size());
  }

  void MaybeEmitRow() {
    if (Clock::now() - start_ < next_row_) return;
    Snapshot();
    result_.stats_rows.push_back(result_.stats);
    if (options_.on_stats) options_.on_stats(result_.stats);
    while (next_row_ <= Clock::now() - start_) next_row_ += options_.stats_interval;
  }

  ForkserverClient& client_;
  VirginMap& virgin_;
  const FuzzOptions& options_;
  MutatorRng rng_;
  CampaignResult result_;
  std::unordered_set<uint64_t> crash_hashes_;
  uint64_t execs_ = 0;
  Clock::time_point start_;
  Clock::duration next_row_{};
};

}  // namespace

uint64_t CrashDedupHash(ConstMapSpan classified, uint32_t site) {
  Fnv1a64 h;
  h.Update(ByteSpan(classified.data(), classified.size()));
  for (int i = 0; i < 4; ++i) h.Update(static_cast<uint8_t>(site >> (8 * i)));
  return h.digest();
}

Verdict Evaluate(ForkserverClient& client, VirginMap& virgin, ByteSpan input) {
  Verdict v;
  v.status = client.RunOne(input);
  v.exec_steps = client.last_exec_steps();
  MapSpan map = client.coverage();
  ClassifyInPlace(map);
  switch (v.status.kind) {
    case RunStatus::Kind::kCrashed: {
      v.kind = Verdict::Kind::kCrash;
      v.crash.input.assign(input.begin(), input.end());
      v.crash.site = static_cast<uint32_t>(v.status.value);
      v.crash.dedup_hash = CrashDedupHash(map, v.crash.site);
      return v;
    }
    case RunStatus::Kind::kTimedOut:
      v.kind = Verdict::Kind::kHang;
      return v;
    default:
      break;
  }
  v.novelty = HasNewBits(virgin, map);
  v.kind = v.novelty == NewCoverage::kNone ? Verdict::Kind::kBoring : Verdict::Kind::kInteresting;
  return v;
}

CampaignResult FuzzLoop(ForkserverClient& client, const std::vector<ByteArray>& seeds,
                        VirginMap& virgin, const FuzzOptions& options) {
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "no seeds");
  if (options.budget == 0) throw Error(ErrorCode::kInvalidArgument, "budget must be >= 1");
  if (options.havoc_ops == 0) throw Error(ErrorCode::kInvalidArgument, "havoc ops must be >= 1");
  return Fuzzer(client, virgin, options).Run(seeds);
}

ForkserverClient AttachInProcess(Session& session, std::chrono::milliseconds timeout) {
  auto point = InProcessControlPoint::Create();
  session.options().control = point->locator();
  return ForkserverClient::Attach(*point, timeout, [&session] { session.Pump(); });
}

std::string FormatStatsRow(const CampaignStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%llu,%llu,%.2f,%u,%u,%u",
                static_cast<unsigned long long>(s.elapsed_ms),
                static_cast<unsigned long long>(s.execs), s.execs_per_sec, s.edges_found,
                s.crashes_unique, s.queue_len);
  return buf;
}

void WriteCampaignOutput(const CampaignResult& result, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "queue");
  fs::create_directories(out_dir / "crashes");
  for (const QueueEntry& entry : result.queue) {
    char name[64];
    std::snprintf(name, sizeof(name), "id_%06llu_%s", static_cast<unsigned long long>(entry.id),
                  entry.discovered_by.c_str());
    WriteFileBytes(out_dir / "queue" / name, entry.input);
  }
  for (const CrashRecord& crash : result.crashes) {
    WriteFileBytes(out_dir / "crashes" / (Hex64(crash.dedup_hash) + ".bin"), crash.input);
  }
  std::ofstream stats(out_dir / "stats.csv", std::ios::trunc);
  if (!stats) throw Error(ErrorCode::kIo, "cannot write " + (out_dir / "stats.csv").string());
  stats << kStatsHeader << "\n";
  for (const CampaignStats& row : result.stats_rows) stats << FormatStatsRow(row) << "\n";
}

std::vector<ByteArray> LoadSeeds(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ByteArray> seeds;
  for (const auto& path : files) seeds.push_back(ReadFileBytes(path));
  return seeds;
}

}  // namespace ckfuzz
