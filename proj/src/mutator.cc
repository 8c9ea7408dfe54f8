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


#include "ckfuzz/mutator.h"

#include <algorithm>

namespace ckfuzz {
namespace {

constexpr uint32_t kHavocBlockMax = 32;

enum HavocOp : uint8_t {
  kFlipBit,
  kRandomByte,
  kInterestByte,
  kArithByte,
  kDeleteBlock,
  kDuplicateBlock,
  kOverwriteBlock,
  kInsertByte,
  kNumHavocOps,
};

bool Applicable(HavocOp op, size_t len) {
  switch (op) {
    case kInsertByte: return len < kHavocMaxLength;
    case kDeleteBlock:
    case kOverwriteBlock: return len >= 2;
    case kDuplicateBlock: return len >= 1 && len < kHavocMaxLength;
    default: return len >= 1;
  }
}

uint32_t BlockLength(MutatorRng& rng, size_t limit) {
  return 1 + static_cast<uint32_t>(rng.Below(std::min<size_t>(limit, kHavocBlockMax)));
}

void FlipBit(ByteArray& buf, uint64_t bit) {
  buf[bit >> 3] ^= static_cast<uint8_t>(0x80 >> (bit & 7));
}

}  // namespace

std::string_view StageName(Stage stage) {
  switch (stage) {
    case Stage::kBitFlip1: return "bitflip1";
    case Stage::kBitFlip2: return "bitflip2";
    case Stage::kBitFlip4: return "bitflip4";
    case Stage::kByteFlip1: return "byteflip1";
    case Stage::kArith8: return "arith8";
    case Stage::kInterest8: return "interest8";
    case Stage::kHavoc: return "havoc";
    case Stage::kSplice: return "splice";
  }
  return "?";
}

bool CouldBeBitflip(uint32_t xor_value) {
  if (xor_value == 0) return true;
  uint32_t shift = 0;
  while ((xor_value & 1) == 0) {
    ++shift;
    xor_value >>= 1;
  }
  if (xor_value == 1 || xor_value == 3 || xor_value == 15) return true;
  if (shift & 7) return false;
  return xor_value == 0xff || xor_value == 0xffff || xor_value == 0xffffffff;
}

void ForEachDeterministicMutant(ByteSpan input, const MutantVisitor& visit) {
  if (input.empty()) return;
  ByteArray buf(input.begin(), input.end());
  const uint64_t bits = static_cast<uint64_t>(buf.size()) * 8;

  for (const auto& [stage, run] : {std::pair{Stage::kBitFlip1, 1u}, std::pair{Stage::kBitFlip2, 2u},
                                   std::pair{Stage::kBitFlip4, 4u}}) {
    for (uint64_t bit = 0; bit + run <= bits; ++bit) {
      for (uint32_t k = 0; k < run; ++k) FlipBit(buf, bit + k);
      const bool more = visit({stage, static_cast<uint32_t>(bit), 0}, buf);
      for (uint32_t k = 0; k < run; ++k) FlipBit(buf, bit + k);
      if (!more) return;
    }
  }

  for (size_t i = 0; i < buf.size(); ++i) {
    buf[i] ^= 0xFF;
    const bool more = visit({Stage::kByteFlip1, static_cast<uint32_t>(i), 0}, buf);
    buf[i] ^= 0xFF;
    if (!more) return;
  }

  for (size_t i = 0; i < buf.size(); ++i) {
    const uint8_t orig = buf[i];
    for (int d = 1; d <= kArithMax; ++d) {
      for (int sign : {1, -1}) {
        const uint8_t value = static_cast<uint8_t>(orig + sign * d);
        if (CouldBeBitflip(static_cast<uint32_t>(orig ^ value))) continue;
        buf[i] = value;
        const bool more = visit({Stage::kArith8, static_cast<uint32_t>(i), sign * d}, buf);
        buf[i] = orig;
        if (!more) return;
      }
    }
  }

  for (size_t i = 0; i < buf.size(); ++i) {
    const uint8_t orig = buf[i];
    for (int8_t interesting : kInteresting8) {
      const uint8_t value = static_cast<uint8_t>(interesting);
      if (value == orig) continue;
      buf[i] = value;
      const bool more = visit({Stage::kInterest8, static_cast<uint32_t>(i), interesting}, buf);
      buf[i] = orig;
      if (!more) return;
    }
  }
}

std::vector<ByteArray> DeterministicMutants(ByteSpan input) {
  std::vector<ByteArray> out;
  ForEachDeterministicMutant(input, [&out](const MutationPlan&, ByteSpan mutant) {
    out.emplace_back(mutant.begin(), mutant.end());
    return true;
  });
  return out;
}

ByteArray Havoc(ByteSpan input, MutatorRng& rng, uint32_t max_ops) {
  if (max_ops == 0) throw Error(ErrorCode::kInvalidArgument, "havoc needs max_ops >= 1");
  ByteArray buf(input.begin(), input.end());
  if (buf.size() > kHavocMaxLength) buf.resize(kHavocMaxLength);
  const uint64_t ops = 1 + rng.Below(max_ops);
  for (uint64_t n = 0; n < ops; ++n) {
    HavocOp op;
    do {
      op = static_cast<HavocOp>(rng.Below(kNumHavocOps));
    } while (!Applicable(op, buf.size()));
    const size_t len = buf.size();
    switch (op) {
      case kFlipBit:
        FlipBit(buf, rng.Below(len * 8));
        break;
      case kRandomByte:
        buf[rng.Below(len)] = rng.Byte();
        break;
      case kInterestByte:
        buf[rng.Below(len)] = static_cast<uint8_t>(kInteresting8[rng.Below(kInteresting8.size())]);
        break;
      case kArithByte: {
        const size_t pos = rng.Below(len);
        const int delta = 1 + static_cast<int>(rng.Below(kArithMax));
        buf[pos] = static_cast<uint8_t>(rng.Below(2) ? buf[pos] + delta : buf[pos] - delta);
        break;
      }
      case kDeleteBlock: {
        const uint32_t block = BlockLength(rng, len - 1);
        const size_t from = rng.Below(len - block + 1);
        buf.erase(buf.begin() + from, buf.begin() + from + block);
        break;
      }
      case kDuplicateBlock: {
        const uint32_t block = BlockLength(rng, std::min(len, kHavocMaxLength - len));
        const size_t from = rng.Below(len - block + 1);
        const size_t to = rng.Below(len + 1);
        ByteArray chunk(buf.begin() + from, buf.begin() + from + block);
        buf.insert(buf.begin() + to, chunk.begin(), chunk.end());
        break;
      }
      case kOverwriteBlock: {
        const uint32_t block = BlockLength(rng, len - 1);
        const size_t from = rng.Below(len - block + 1);
        const size_t to = rng.Below(len - block + 1);
        const ByteArray chunk(buf.begin() + from, buf.begin() + from + block);
        std::copy(chunk.begin(), chunk.end(), buf.begin() + to);
        break;
      }
      case kInsertByte:
        buf.insert(buf.begin() + rng.Below(len + 1), rng.Byte());
        break;
      case kNumHavocOps:
        break;
    }
  }
  return buf;
}

ByteArray Splice(ByteSpan a, ByteSpan b, MutatorRng& rng) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "splice needs two inputs of length >= 2");
  }
  const size_t cut_a = 1 + rng.Below(a.size() - 1);
  const size_t cut_b = 1 + rng.Below(b.size() - 1);
  ByteArray out(a.begin(), a.begin() + cut_a);
  out.insert(out.end(), b.begin() + cut_b, b.end());
  return out;
}

}  // namespace ckfuzz
