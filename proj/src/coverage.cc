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

#include "ckfuzz/coverage.h"

#include <bit>
#include <cstring>

namespace ckfuzz {
namespace {

constexpr std::array<uint8_t, 256> MakeBucketTable() {
  std::array<uint8_t, 256> table{};
  for (int c = 0; c < 256; ++c) {
    uint8_t b = 0;
    if (c == 0) b = 0x00;
    else if (c == 1) b = 0x01;
    else if (c == 2) b = 0x02;
    else if (c == 3) b = 0x04;
    else if (c <= 7) b = 0x08;
    else if (c <= 15) b = 0x10;
    else if (c <= 31) b = 0x20;
    else if (c <= 127) b = 0x40;
    else b = 0x80;
    table[c] = b;
  }
  return table;
}

constexpr std::array<uint8_t, 256> kBuckets = MakeBucketTable();

// Most maps are sparse; walk them a word at a time and skip zero words.
inline uint64_t LoadWord(const uint8_t* p) {
  uint64_t w;
  std::memcpy(&w, p, sizeof w);
  return w;
}

}  // namespace

uint8_t BucketOf(uint8_t count) { return kBuckets[count]; }

void ClassifyInPlace(MapSpan slots) {
  uint8_t* p = slots.data();
  for (size_t i = 0; i < kMapSize; i += 8) {
    if (LoadWord(p + i) == 0) continue;
    for (size_t j = i; j < i + 8; ++j) p[j] = kBuckets[p[j]];
  }
}

CoverageMap Classify(const CoverageMap& map) {
  CoverageMap out = map;
  ClassifyInPlace(out.slots());
  return out;
}

const char* NewCoverageName(NewCoverage value) {
  switch (value) {
    case NewCoverage::kNone: return "none";
    case NewCoverage::kNewCount: return "new-count";
    case NewCoverage::kNewEdge: return "new-edge";
  }
  return "?";
}

NewCoverage HasNewBits(VirginMap& virgin, ConstMapSpan classified) {
  NewCoverage result = NewCoverage::kNone;
  const uint8_t* cur = classified.data();
  uint8_t* vir = virgin.slots_.data();
  for (size_t i = 0; i < kMapSize; i += 8) {
    uint64_t c = LoadWord(cur + i);
    if (c == 0) continue;
    uint64_t v = LoadWord(vir + i);
    if ((c & v) == 0) continue;
    for (size_t j = i; j < i + 8; ++j) {
      if ((cur[j] & vir[j]) == 0) continue;
      if (vir[j] == 0xFF) {
        result = NewCoverage::kNewEdge;
      } else if (result == NewCoverage::kNone) {
        result = NewCoverage::kNewCount;
      }
      vir[j] &= static_cast<uint8_t>(~cur[j]);
    }
  }
  return result;
}

uint32_t VirginMap::CountTouchedSlots() const {
  uint32_t n = 0;
  for (uint8_t v : slots_) n += (v != 0xFF);
  return n;
}

uint64_t VirginMap::CountClearedBits() const {
  uint64_t n = 0;
  for (uint8_t v : slots_) n += 8 - std::popcount(v);
  return n;
}

void VirginMap::MergeFrom(const VirginMap& other) {
  for (size_t i = 0; i < kMapSize; ++i) slots_[i] &= other.slots_[i];
}

uint32_t CountNonZero(ConstMapSpan slots) {
  uint32_t n = 0;
  for (uint8_t s : slots) n += (s != 0);
  return n;
}

}  // namespace ckfuzz
