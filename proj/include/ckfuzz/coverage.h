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

// Edge-coverage bitmap in the classic AFL layout: one saturating 8-bit
// counter per (prev_loc XOR cur_loc) slot, hit-count bucketing, and a
// fuzzer-side virgin map that remembers which (slot, bucket) bits were
// ever observed.

#ifndef CKFUZZ_COVERAGE_H_
#define CKFUZZ_COVERAGE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace ckfuzz {

inline constexpr size_t kMapSize = 65536;

using MapSpan = std::span<uint8_t, kMapSize>;
using ConstMapSpan = std::span<const uint8_t, kMapSize>;

// Deterministic block id: low 16 bits of block_index * 0x9E3779B1.
constexpr uint16_t LocId(uint32_t block_index) {
  return static_cast<uint16_t>(static_cast<uint32_t>(block_index * 0x9E3779B1u));
}

// Bumps the (prev ^ cur) slot, saturating at 255, and returns the next
// prev_loc (cur >> 1).
inline uint16_t RecordEdge(MapSpan slots, uint16_t prev_loc, uint16_t cur_loc) {
  uint8_t& slot = slots[prev_loc ^ cur_loc];
  if (slot != 0xFF) ++slot;
  return static_cast<uint16_t>(cur_loc >> 1);
}

// Hit-count bucket for a raw counter value.
uint8_t BucketOf(uint8_t count);

class CoverageMap {
 public:
  CoverageMap() { Reset(); }

  void Reset() { slots_.fill(0); }

  uint8_t operator[](size_t i) const { return slots_[i]; }
  uint8_t& operator[](size_t i) { return slots_[i]; }

  MapSpan slots() { return MapSpan(slots_); }
  ConstMapSpan slots() const { return ConstMapSpan(slots_); }

  friend bool operator==(const CoverageMap&, const CoverageMap&) = default;

 private:
  std::array<uint8_t, kMapSize> slots_;
};

// Replaces every counter by its bucket bitmask, in place.
void ClassifyInPlace(MapSpan slots);

// Returns a classified copy.
CoverageMap Classify(const CoverageMap& map);

enum class NewCoverage : uint8_t { kNone = 0, kNewCount = 1, kNewEdge = 2 };

const char* NewCoverageName(NewCoverage value);

class VirginMap {
 public:
  VirginMap() { slots_.fill(0xFF); }

  uint8_t operator[](size_t i) const { return slots_[i]; }

  ConstMapSpan slots() const { return ConstMapSpan(slots_); }

  // Slots that have lost at least one virgin bit.
  uint32_t CountTouchedSlots() const;
  // Zero bits across the whole map; non-decreasing over a campaign.
  uint64_t CountClearedBits() const;

  // AND with another virgin map (union of observed coverage).
  void MergeFrom(const VirginMap& other);

  friend bool operator==(const VirginMap&, const VirginMap&) = default;

 private:
  friend NewCoverage HasNewBits(VirginMap& virgin, ConstMapSpan classified);

  std::array<uint8_t, kMapSize> slots_;
};

// `classified` must already be bucketed. Clears the observed bits in
// `virgin` and reports whether any were still set.
NewCoverage HasNewBits(VirginMap& virgin, ConstMapSpan classified);

inline NewCoverage HasNewBits(VirginMap& virgin, const CoverageMap& classified) {
  return HasNewBits(virgin, classified.slots());
}

// Number of non-zero slots.
uint32_t CountNonZero(ConstMapSpan slots);

}  // namespace ckfuzz

#endif  // CKFUZZ_COVERAGE_H_
