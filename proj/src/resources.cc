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


#include "ckfuzz/resources.h"

#include <algorithm>
#include <utility>

#include "ckfuzz/common.h"

namespace ckfuzz {

void ResourceTable::Add(VirtualResource resource) {
  if (Find(resource.vid) != nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate virtual resource id " + std::to_string(resource.vid));
  }
  entries_.push_back(std::move(resource));
}

VirtualResource* ResourceTable::Find(uint32_t vid) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [vid](const VirtualResource& r) { return r.vid == vid; });
  return it == entries_.end() ? nullptr : &*it;
}

const VirtualResource* ResourceTable::Find(uint32_t vid) const {
  return const_cast<ResourceTable*>(this)->Find(vid);
}

ResourceTable ResourceTable::Default(std::string input_binding, std::string output_binding) {
  ResourceTable table;
  table.Add({kInputVid, ResourceKind::kInputStream, 0, std::move(input_binding)});
  table.Add({kOutputVid, ResourceKind::kOutputSink, 0, std::move(output_binding)});
  return table;
}

}  // namespace ckfuzz
