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

// Shared vocabulary: byte buffers, the error type, little-endian
// encoding helpers and the FNV-1a hash used for pattern and crash ids.

#ifndef CKFUZZ_COMMON_H_
#define CKFUZZ_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ckfuzz {

using ByteArray = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

enum class ErrorCode {
  kInvalidArgument,
  kSyntax,
  kUndefinedLabel,
  kRegisterOutOfRange,
  kCorruptProgram,
  kCorruptState,
  kNotAnImage,
  kUnsupportedVersion,
  kCorruptImage,
  kProgramMismatch,
  kDuplicatePlugin,
  kAttachFailed,
  kTargetLost,
  kSetup,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// 64-bit FNV-1a, incremental.
class Fnv1a64 {
 public:
  static constexpr uint64_t kOffsetBasis = 0xcbf29ce484222325ULL;
  static constexpr uint64_t kPrime = 0x100000001b3ULL;

  Fnv1a64() = default;
  explicit Fnv1a64(uint64_t state) : state_(state) {}

  void Update(uint8_t byte) {
    state_ ^= byte;
    state_ *= kPrime;
  }
  void Update(ByteSpan bytes) {
    for (uint8_t b : bytes) Update(b);
  }
  void Update(std::string_view text) {
    for (char c : text) Update(static_cast<uint8_t>(c));
  }
  void UpdateU64(uint64_t value) {
    for (int i = 0; i < 8; ++i) Update(static_cast<uint8_t>(value >> (8 * i)));
  }

  uint64_t digest() const { return state_; }

 private:
  uint64_t state_ = kOffsetBasis;
};

inline uint64_t HashBytes(ByteSpan bytes) {
  Fnv1a64 h;
  h.Update(bytes);
  return h.digest();
}

inline uint64_t HashText(std::string_view text) {
  Fnv1a64 h;
  h.Update(text);
  return h.digest();
}

// Appends little-endian integers and raw bytes to a growing buffer.
class ByteWriter {
 public:
  void U8(uint8_t v) { out_.push_back(v); }
  void U16(uint16_t v) { Le(v, 2); }
  void U32(uint32_t v) { Le(v, 4); }
  void U64(uint64_t v) { Le(v, 8); }
  void Bytes(ByteSpan bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  void Text(std::string_view text) { out_.insert(out_.end(), text.begin(), text.end()); }
  void Zeros(size_t n) { out_.insert(out_.end(), n, 0); }

  size_t size() const { return out_.size(); }
  ByteArray& buffer() { return out_; }
  ByteArray Take() { return std::move(out_); }

 private:
  void Le(uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }

  ByteArray out_;
};

// Bounds-checked little-endian cursor. Running past the end throws
// Error with the code supplied at construction.
class ByteReader {
 public:
  ByteReader(ByteSpan data, ErrorCode truncation_code)
      : data_(data), truncation_code_(truncation_code) {}

  uint8_t U8() { return static_cast<uint8_t>(Le(1)); }
  uint16_t U16() { return static_cast<uint16_t>(Le(2)); }
  uint32_t U32() { return static_cast<uint32_t>(Le(4)); }
  uint64_t U64() { return Le(8); }
  ByteSpan Bytes(size_t n);
  std::string Text(size_t n);

  size_t remaining() const { return data_.size() - pos_; }
  size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  uint64_t Le(int width);
  void Need(size_t n) const;

  ByteSpan data_;
  size_t pos_ = 0;
  ErrorCode truncation_code_;
};

ByteArray ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, ByteSpan bytes);

// Lowercase, zero-padded 16-digit hex.
std::string Hex64(uint64_t value);

}  // namespace ckfuzz

#endif  // CKFUZZ_COMMON_H_
