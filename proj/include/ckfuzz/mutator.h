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


// Input mutation: AFL-style deterministic stages, stacked havoc, and
// splice. Every stream is a pure function of its inputs and the RNG seed.

#ifndef CKFUZZ_MUTATOR_H_
#define CKFUZZ_MUTATOR_H_

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "ckfuzz/common.h"

namespace ckfuzz {

// splitmix64.
class MutatorRng {
 public:
  explicit MutatorRng(uint64_t seed = 0) : state_(seed) {}

  uint64_t Next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  // Uniform-ish in [0, n); n must be > 0.
  uint64_t Below(uint64_t n) { return Next() % n; }
  uint8_t Byte() { return static_cast<uint8_t>(Next()); }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

enum class Stage : uint8_t {
  kBitFlip1,
  kBitFlip2,
  kBitFlip4,
  kByteFlip1,
  kArith8,
  kInterest8,
  kHavoc,
  kSplice,
};

std::string_view StageName(Stage stage);

inline constexpr int kArithMax = 35;
inline constexpr size_t kHavocMaxLength = 4096;
inline constexpr std::array<int8_t, 9> kInteresting8 = {-128, -1, 0, 1, 16, 32, 64, 100, 127};

// Where a deterministic mutant came from. For bit stages `position` is the
// first flipped bit index (bit i of the input is byte i/8, mask 0x80>>(i%8));
// for byte stages it is the byte index. `parameter` is the signed delta
// (Arith8) or the interest value (Interest8).
struct MutationPlan {
  Stage stage = Stage::kBitFlip1;
  uint32_t position = 0;
  int32_t parameter = 0;
};

// True when XOR-ing a byte with `xor_value` matches one of the bit or byte
// flip stages.
bool CouldBeBitflip(uint32_t xor_value);

// Calls `visit` for each deterministic mutant in stage order, positions
// ascending. The span is only valid during the call. Returning false stops
// the walk. Empty input yields nothing.
using MutantVisitor = std::function<bool(const MutationPlan& plan, ByteSpan mutant)>;
void ForEachDeterministicMutant(ByteSpan input, const MutantVisitor& visit);

std::vector<ByteArray> DeterministicMutants(ByteSpan input);

// 1 + rng % max_ops stacked random operations. Throws
// Error{kInvalidArgument} when max_ops is 0.
ByteArray Havoc(ByteSpan input, MutatorRng& rng, uint32_t max_ops);

// a[0, i) + b[j, len b) with i in [1, len a - 1], j in [1, len b - 1].
// Throws Error{kInvalidArgument} when either input is shorter than 2.
ByteArray Splice(ByteSpan a, ByteSpan b, MutatorRng& rng);

}  // namespace ckfuzz

#endif  // CKFUZZ_MUTATOR_H_
