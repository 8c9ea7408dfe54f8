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


// Checkpoint images: a bit-exact, self-describing snapshot of a Session
// (VM state, virtual resources, plugin state, forkserver flag).
//
// On disk (.ckfz), little-endian:
//   "CKFZ" | version u32 | created_counter u64 | pattern_hash u64 |
//   forkserver_flag u8 | 7 zero bytes |
//   sections, ascending id: id u32 | length u64 | payload
//     1 VM_STATE   snapshot bytes, then the program hash u64
//     2 RESOURCES  count u32, then (vid u32, kind u8, offset u64,
//                  binding length u32, binding)
//     3 HOOKS      count u32, then (name length u32, name,
//                  blob length u64, blob)

#ifndef CKFUZZ_CHECKPOINT_H_
#define CKFUZZ_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ckfuzz/common.h"
#include "ckfuzz/forkserver.h"
#include "ckfuzz/hooks.h"
#include "ckfuzz/resources.h"
#include "ckfuzz/target_vm.h"

namespace ckfuzz {

inline constexpr uint32_t kImageVersion = 1;
inline constexpr size_t kImageHeaderSize = 32;

enum class SectionId : uint32_t { kVmState = 1, kResources = 2, kHooks = 3 };

struct CheckpointImage {
  uint32_t version = kImageVersion;
  uint64_t created_counter = 0;
  uint64_t pattern_hash = 0;
  ByteArray vm_payload;  // SnapshotState output
  uint64_t program_hash = 0;
  ResourceTable resources;
  // Plugin name and blob, in registration order.
  std::vector<std::pair<std::string, ByteArray>> hook_blobs;
  uint8_t forkserver_flag = 0;

  friend bool operator==(const CheckpointImage&, const CheckpointImage&) = default;
};

// Captures `session` as it stands. The caller has already dispatched
// PreCheckpoint.
CheckpointImage Checkpoint(Session& session, uint64_t pattern_hash, uint64_t created_counter);

// PreCheckpoint, Checkpoint, PostCheckpoint. Plugin actions raised by the
// two lifecycle events are dropped.
CheckpointImage TakeCheckpoint(Session& session, uint64_t pattern_hash, uint64_t created_counter);

ByteArray EncodeImage(const CheckpointImage& image);
// Throws Error{kNotAnImage}, Error{kUnsupportedVersion} or
// Error{kCorruptImage}.
CheckpointImage DecodeImage(ByteSpan bytes);

void WriteImage(const CheckpointImage& image, const std::filesystem::path& path);
// As DecodeImage; Error{kIo} when the file cannot be read.
CheckpointImage ReadImage(const std::filesystem::path& path);

struct RestoreOptions {
  // Rebind the input stream to the fuzzer's test case at offset 0.
  bool fuzzer_attach = false;
  // Contents of the input stream when not attaching.
  ByteArray input;
  // Plugins not present in the image; those whose name is already in the
  // image are dropped.
  std::vector<std::unique_ptr<Plugin>> extra_plugins;
};

// Rebuilds a Session from `image`: plugins from the image blobs (in image
// order) then the extras, VM state, resources and the forkserver flag.
// Then dispatches PostRestart and applies the resulting actions.
// Throws Error{kProgramMismatch} or Error{kCorruptImage}.
Session Restore(const CheckpointImage& image, std::shared_ptr<const TargetProgram> program,
                RestoreOptions options);

}  // namespace ckfuzz

#endif  // CKFUZZ_CHECKPOINT_H_
