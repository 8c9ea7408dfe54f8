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

// Fuzzer <-> forkserver control plane: the wire messages, duplex channels
// that carry them (in-process queue or unix stream socket), the coverage
// region both sides map, and the rendezvous points a fuzzer publishes for
// the target to find.
//
// Handshake: the fuzzer sends Hello("FZR1"), the target answers with its
// own Hello. After that the fuzzer sends Go per test and reads one Status
// back; Bye (or closing the channel) ends the serve loop.

#ifndef CKFUZZ_CONTROL_H_
#define CKFUZZ_CONTROL_H_

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "ckfuzz/common.h"
#include "ckfuzz/coverage.h"
#include "ckfuzz/target_vm.h"

namespace ckfuzz {

using std::chrono::milliseconds;

inline constexpr std::array<uint8_t, 4> kHelloMagic = {'F', 'Z', 'R', '1'};
inline constexpr milliseconds kDefaultAttachTimeout{5000};

// Environment variables naming the control socket and the coverage shm
// object in socket mode.
inline constexpr const char* kControlEnv = "FZ_CTRL";
inline constexpr const char* kShmEnv = "FZ_SHM";

enum class StatusCode : uint32_t {
  kExited = 0,
  kCrashed = 1,
  kTimedOut = 2,
  kCheckpointRequested = 3,
};

struct ControlMessage {
  enum class Kind : uint8_t { kHello = 0, kGo = 1, kStatus = 2, kBye = 3 };

  Kind kind = Kind::kBye;
  std::array<uint8_t, 4> magic{};  // kHello
  uint32_t test_id = 0;            // kGo
  ByteArray input;                 // kGo
  uint32_t status_code = 0;        // kStatus
  uint32_t status_value = 0;       // kStatus: exit code, site, or limit

  static ControlMessage Hello(std::array<uint8_t, 4> magic = kHelloMagic);
  static ControlMessage Go(uint32_t test_id, ByteSpan input);
  static ControlMessage Status(const RunStatus& status);
  static ControlMessage Bye();

  // Meaningful for kStatus only.
  RunStatus ToRunStatus() const;

  friend bool operator==(const ControlMessage&, const ControlMessage&) = default;
};

// Tag u8, then fields in declaration order, integers little-endian.
ByteArray EncodeMessage(const ControlMessage& message);
// Throws Error{kInvalidArgument} on malformed or trailing bytes.
ControlMessage DecodeMessage(ByteSpan bytes);

enum class RecvResult : uint8_t { kOk, kTimeout, kClosed };

// One end of a duplex message channel.
class ControlChannel {
 public:
  virtual ~ControlChannel() = default;

  // False once the peer is gone.
  virtual bool Send(const ControlMessage& message) = 0;
  virtual RecvResult Receive(ControlMessage& out, milliseconds timeout) = 0;
  virtual void Close() = 0;
};

// Two connected in-process endpoints.
std::pair<std::unique_ptr<ControlChannel>, std::unique_ptr<ControlChannel>> MakeChannelPair();

// Wraps a connected stream socket. Owns the fd.
class SocketChannel final : public ControlChannel {
 public:
  explicit SocketChannel(int fd) : fd_(fd) {}
  ~SocketChannel() override;
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;

  bool Send(const ControlMessage& message) override;
  RecvResult Receive(ControlMessage& out, milliseconds timeout) override;
  void Close() override;

 private:
  int fd_;
};

// Connects to a listening unix socket; nullptr when nobody is listening.
std::unique_ptr<ControlChannel> ConnectUnixSocket(const std::string& path);

// The memory the target's edges are recorded into and the fuzzer reads
// after each test: the map plus the step count of the last child.
class CoverageRegion {
 public:
  // Private heap memory, for in-process use.
  static std::shared_ptr<CoverageRegion> CreatePrivate();
  // POSIX shared memory object; the creator unlinks it on destruction.
  static std::shared_ptr<CoverageRegion> CreateShared(const std::string& name);
  static std::shared_ptr<CoverageRegion> OpenShared(const std::string& name);

  ~CoverageRegion();
  CoverageRegion(const CoverageRegion&) = delete;
  CoverageRegion& operator=(const CoverageRegion&) = delete;

  MapSpan map() { return MapSpan(layout_->map, kMapSize); }
  ConstMapSpan map() const { return ConstMapSpan(layout_->map, kMapSize); }
  uint64_t exec_steps() const { return layout_->exec_steps; }
  void set_exec_steps(uint64_t steps) { layout_->exec_steps = steps; }

  // Zeroes the map and the step count.
  void Reset();

  const std::string& shm_name() const { return shm_name_; }

 private:
  struct Layout {
    uint8_t map[kMapSize];
    uint64_t exec_steps;
  };

  CoverageRegion() = default;

  Layout* layout_ = nullptr;
  std::unique_ptr<Layout> owned_;
  std::string shm_name_;
  bool unlink_on_destroy_ = false;
};

// How a target finds its fuzzer. Empty means no fuzzer: the forkserver
// records ABORT and the program runs uninstrumented.
class ControlPoint;
struct ControlLocator {
  std::shared_ptr<ControlPoint> point;  // library mode
  std::string socket_path;              // socket mode
  std::string shm_name;                 // socket mode coverage region

  bool empty() const { return point == nullptr && socket_path.empty(); }

  // Socket-mode locator from FZ_CTRL / FZ_SHM; empty when FZ_CTRL unset.
  static ControlLocator FromEnvironment();
};

// Target-side view of a successful connection.
struct TargetLink {
  std::unique_ptr<ControlChannel> channel;
  std::shared_ptr<CoverageRegion> coverage;
};

// Fuzzer-published rendezvous. A point accepts exactly one target
// connection and one fuzzer attach.
class ControlPoint {
 public:
  virtual ~ControlPoint() = default;

  // Target side; nullopt when the point is unusable or already taken.
  virtual std::optional<TargetLink> ConnectTarget() = 0;

  // Fuzzer side: waits up to `timeout` for the target's connection.
  // Throws Error{kAttachFailed} on timeout or on a second attach.
  virtual std::unique_ptr<ControlChannel> AcceptFuzzer(milliseconds timeout) = 0;

  virtual std::shared_ptr<CoverageRegion> coverage() = 0;
  virtual ControlLocator locator() = 0;
};

// Resolves a locator from the target side; nullopt when no fuzzer is
// reachable there.
std::optional<TargetLink> ConnectTarget(const ControlLocator& locator);

// Library mode: channel pair and private coverage region.
class InProcessControlPoint final : public ControlPoint,
                                    public std::enable_shared_from_this<InProcessControlPoint> {
 public:
  static std::shared_ptr<InProcessControlPoint> Create();

  std::optional<TargetLink> ConnectTarget() override;
  std::unique_ptr<ControlChannel> AcceptFuzzer(milliseconds timeout) override;
  std::shared_ptr<CoverageRegion> coverage() override { return coverage_; }
  ControlLocator locator() override;

 private:
  InProcessControlPoint() = default;

  std::mutex mu_;
  std::unique_ptr<ControlChannel> fuzzer_end_;
  std::unique_ptr<ControlChannel> target_end_;
  bool fuzzer_taken_ = false;
  bool target_taken_ = false;
  std::shared_ptr<CoverageRegion> coverage_;
};

// Socket mode: listening unix socket plus a POSIX shm coverage region.
class UnixControlPoint final : public ControlPoint {
 public:
  // Throws Error{kIo} when the socket or shm object cannot be created.
  UnixControlPoint(std::string socket_path, std::string shm_name);
  ~UnixControlPoint() override;

  std::optional<TargetLink> ConnectTarget() override;
  std::unique_ptr<ControlChannel> AcceptFuzzer(milliseconds timeout) override;
  std::shared_ptr<CoverageRegion> coverage() override { return coverage_; }
  ControlLocator locator() override;

 private:
  std::string socket_path_;
  std::string shm_name_;
  int listen_fd_ = -1;
  bool fuzzer_taken_ = false;
  std::shared_ptr<CoverageRegion> coverage_;
};

}  // namespace ckfuzz

#endif  // CKFUZZ_CONTROL_H_
