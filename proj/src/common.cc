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

#include "ckfuzz/common.h"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace ckfuzz {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kSyntax: return "syntax";
    case ErrorCode::kUndefinedLabel: return "undefined-label";
    case ErrorCode::kRegisterOutOfRange: return "register-out-of-range";
    case ErrorCode::kCorruptProgram: return "corrupt-program";
    case ErrorCode::kCorruptState: return "corrupt-state";
    case ErrorCode::kNotAnImage: return "not-an-image";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kCorruptImage: return "corrupt-image";
    case ErrorCode::kProgramMismatch: return "program-mismatch";
    case ErrorCode::kDuplicatePlugin: return "duplicate-plugin";
    case ErrorCode::kAttachFailed: return "attach-failed";
    case ErrorCode::kTargetLost: return "target-lost";
    case ErrorCode::kSetup: return "setup";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

void ByteReader::Need(size_t n) const {
  if (data_.size() - pos_ < n) {
    throw Error(truncation_code_,
                "truncated data: need " + std::to_string(n) + " bytes at offset " +
                    std::to_string(pos_) + ", have " +
                    std::to_string(data_.size() - pos_));
  }
}

uint64_t ByteReader::Le(int width) {
  Need(width);
  uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= uint64_t{data_[pos_ + i]} << (8 * i);
  pos_ += width;
  return v;
}

ByteSpan ByteReader::Bytes(size_t n) {
  Need(n);
  ByteSpan out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::Text(size_t n) {
  ByteSpan raw = Bytes(n);
  return std::string(raw.begin(), raw.end());
}

ByteArray ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return ByteArray(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::filesystem::path& path, ByteSpan bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

std::string Hex64(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace ckfuzz
