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


// Shared fixtures for the ckfuzz tests.

#ifndef CKFUZZ_TESTS_TEST_UTIL_H_
#define CKFUZZ_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ckfuzz/common.h"
#include "ckfuzz/target_vm.h"

namespace ckfuzz::testing {

inline std::filesystem::path TargetPath(const std::string& name) {
  return std::filesystem::path(CKFUZZ_TARGETS_DIR) / name;
}

inline std::filesystem::path GoldenPath(const std::string& name) {
  return std::filesystem::path(CKFUZZ_GOLDEN_DIR) / name;
}

inline std::shared_ptr<const TargetProgram> LoadTarget(const std::string& name) {
  return std::make_shared<const TargetProgram>(LoadProgramFile(TargetPath(name).string()));
}

inline std::shared_ptr<const TargetProgram> AssembleShared(std::string_view source) {
  return std::make_shared<const TargetProgram>(Assemble(source));
}

inline ByteArray Bytes(std::string_view text) { return ByteArray(text.begin(), text.end()); }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ckfuzz-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Records every edge and host call, in order.
class RecordingObserver : public ExecObserver {
 public:
  struct Event {
    bool edge = false;
    uint16_t loc = 0;
    HostCallEvent call;

    friend bool operator==(const Event&, const Event&) = default;
  };

  bool OnEdge(const VmState&, uint16_t cur_loc) override {
    events.push_back({true, cur_loc, {}});
    return true;
  }
  void OnHostCall(const VmState&, const HostCallEvent& e) override {
    events.push_back({false, 0, e});
  }

  std::vector<Event> events;
};

// Reference FNV-1a 64, written out longhand.
inline uint64_t OracleFnv(const std::vector<uint8_t>& bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t OracleFnv(const std::string& text) {
  return OracleFnv(std::vector<uint8_t>(text.begin(), text.end()));
}

// Little-endian appender independent of ByteWriter.
inline void PutLe(std::vector<uint8_t>& out, uint64_t value, int width) {
  for (int i = 0; i < width; ++i) out.push_back(static_cast<uint8_t>((value >> (8 * i)) & 0xFF));
}

}  // namespace ckfuzz::testing

namespace ckfuzz {

inline void PrintTo(const RunStatus& status, std::ostream* os) { *os << ToString(status); }

}  // namespace ckfuzz

#endif  // CKFUZZ_TESTS_TEST_UTIL_H_
