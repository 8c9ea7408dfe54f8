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

// Virtual descriptor table. The target only ever sees virtual ids; what
// they are bound to (a launch-time input file, the fuzzer's test case, an
// output sink) can change across a checkpoint/restore without the target
// noticing.

#ifndef CKFUZZ_RESOURCES_H_
#define CKFUZZ_RESOURCES_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ckfuzz {

enum class ResourceKind : uint8_t { kInputStream = 0, kOutputSink = 1 };

struct VirtualResource {
  uint32_t vid = 0;
  ResourceKind kind = ResourceKind::kInputStream;
  uint64_t offset = 0;
  std::string binding;

  friend bool operator==(const VirtualResource&, const VirtualResource&) = default;
};

inline constexpr uint32_t kInputVid = 0;
inline constexpr uint32_t kOutputVid = 1;
inline constexpr std::string_view kFuzzerBinding = "fuzzer";

class ResourceTable {
 public:
  // Throws Error{kInvalidArgument} on a duplicate vid.
  void Add(VirtualResource resource);

  VirtualResource* Find(uint32_t vid);
  const VirtualResource* Find(uint32_t vid) const;

  const std::vector<VirtualResource>& entries() const { return entries_; }

  // Standard table: vid 0 input stream, vid 1 output sink.
  static ResourceTable Default(std::string input_binding, std::string output_binding = "discard");

  friend bool operator==(const ResourceTable&, const ResourceTable&) = default;

 private:
  std::vector<VirtualResource> entries_;
};

}  // namespace ckfuzz

#endif  // CKFUZZ_RESOURCES_H_
