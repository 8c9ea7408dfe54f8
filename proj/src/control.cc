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

#include "ckfuzz/control.h"

#include <fcntl.h>
#include <poll.h>
#include <sys/mman.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>

namespace ckfuzz {
namespace {

using Clock = std::chrono::steady_clock;

// Shared state behind an in-process channel pair. Queue i carries
// messages towards endpoint i.
struct PipeState {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<ControlMessage> queues[2];
  bool closed = false;
};

class InProcessChannel final : public ControlChannel {
 public:
  InProcessChannel(std::shared_ptr<PipeState> state, int side)
      : state_(std::move(state)), side_(side) {}
  ~InProcessChannel() override { Close(); }

  bool Send(const ControlMessage& message) override {
    {
      std::lock_guard<std::mutex> lock(state_->mu);
      if (state_->closed) return false;
      state_->queues[1 - side_].push_back(message);
    }
    state_->cv.notify_all();
    return true;
  }

  RecvResult Receive(ControlMessage& out, milliseconds timeout) override {
    std::unique_lock<std::mutex> lock(state_->mu);
    auto& queue = state_->queues[side_];
    bool ready = state_->cv.wait_for(lock, timeout, [&] { return !queue.empty() || state_->closed; });
    if (!queue.empty()) {
      out = std::move(queue.front());
      queue.pop_front();
      return RecvResult::kOk;
    }
    return ready ? RecvResult::kClosed : RecvResult::kTimeout;
  }

  void Close() override {
    {
      std::lock_guard<std::mutex> lock(state_->mu);
      state_->closed = true;
    }
    state_->cv.notify_all();
  }

 private:
  std::shared_ptr<PipeState> state_;
  int side_;
};

// Waits for `fd` to become ready for `events` until `deadline`.
// Returns false on timeout.
bool WaitFd(int fd, short events, Clock::time_point deadline) {
  while (true) {
    auto left = std::chrono::duration_cast<milliseconds>(deadline - Clock::now()).count();
    if (left < 0) left = 0;
    pollfd p{fd, events, 0};
    int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) return true;  // Let the following read/write report it.
  }
}

enum class IoResult { kOk, kTimeout, kClosed };

IoResult ReadExact(int fd, uint8_t* buf, size_t n, Clock::time_point deadline) {
  size_t got = 0;
  while (got < n) {
    if (!WaitFd(fd, POLLIN, deadline)) return IoResult::kTimeout;
    ssize_t rc = ::read(fd, buf + got, n - got);
    if (rc == 0) return IoResult::kClosed;
    if (rc < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      return IoResult::kClosed;
    }
    got += static_cast<size_t>(rc);
  }
  return IoResult::kOk;
}

bool WriteAll(int fd, const uint8_t* buf, size_t n) {
  size_t put = 0;
  while (put < n) {
    ssize_t rc = ::send(fd, buf + put, n - put, MSG_NOSIGNAL);
    if (rc < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      return false;
    }
    put += static_cast<size_t>(rc);
  }
  return true;
}

sockaddr_un UnixAddress(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) {
    throw Error(ErrorCode::kIo, "socket path too long: " + path);
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

std::optional<TargetLink> ConnectLocator(const ControlLocator& locator) {
  if (locator.point != nullptr) return locator.point->ConnectTarget();
  if (locator.socket_path.empty()) return std::nullopt;
  std::unique_ptr<ControlChannel> channel = ConnectUnixSocket(locator.socket_path);
  if (channel == nullptr) return std::nullopt;
  std::shared_ptr<CoverageRegion> coverage;
  if (!locator.shm_name.empty()) {
    try {
      coverage = CoverageRegion::OpenShared(locator.shm_name);
    } catch (const Error&) {
      return std::nullopt;
    }
  } else {
    coverage = CoverageRegion::CreatePrivate();
  }
  return TargetLink{std::move(channel), std::move(coverage)};
}

}  // namespace

ControlMessage ControlMessage::Hello(std::array<uint8_t, 4> magic) {
  ControlMessage m;
  m.kind = Kind::kHello;
  m.magic = magic;
  return m;
}

ControlMessage ControlMessage::Go(uint32_t test_id, ByteSpan input) {
  ControlMessage m;
  m.kind = Kind::kGo;
  m.test_id = test_id;
  m.input.assign(input.begin(), input.end());
  return m;
}

ControlMessage ControlMessage::Status(const RunStatus& status) {
  ControlMessage m;
  m.kind = Kind::kStatus;
  switch (status.kind) {
    case RunStatus::Kind::kExited: m.status_code = uint32_t(StatusCode::kExited); break;
    case RunStatus::Kind::kCrashed: m.status_code = uint32_t(StatusCode::kCrashed); break;
    case RunStatus::Kind::kTimedOut: m.status_code = uint32_t(StatusCode::kTimedOut); break;
    case RunStatus::Kind::kCheckpointRequested:
      m.status_code = uint32_t(StatusCode::kCheckpointRequested);
      break;
  }
  m.status_value = static_cast<uint32_t>(std::min<uint64_t>(status.value, UINT32_MAX));
  return m;
}

ControlMessage ControlMessage::Bye() { return ControlMessage{}; }

RunStatus ControlMessage::ToRunStatus() const {
  switch (static_cast<StatusCode>(status_code)) {
    case StatusCode::kExited: return RunStatus::Exited(static_cast<uint8_t>(status_value));
    case StatusCode::kCrashed: return RunStatus::Crashed(status_value);
    case StatusCode::kTimedOut: return RunStatus::TimedOut(status_value);
    case StatusCode::kCheckpointRequested: return RunStatus::CheckpointRequested(status_value);
  }
  throw Error(ErrorCode::kInvalidArgument, "bad status code " + std::to_string(status_code));
}

ByteArray EncodeMessage(const ControlMessage& message) {
  ByteWriter w;
  w.U8(static_cast<uint8_t>(message.kind));
  switch (message.kind) {
    case ControlMessage::Kind::kHello:
      w.Bytes(message.magic);
      break;
    case ControlMessage::Kind::kGo:
      w.U32(message.test_id);
      w.U32(static_cast<uint32_t>(message.input.size()));
      w.Bytes(message.input);
      break;
    case ControlMessage::Kind::kStatus:
      w.U32(message.status_code);
      w.U32(message.status_value);
      break;
    case ControlMessage::Kind::kBye:
      break;
  }
  return w.Take();
}

ControlMessage DecodeMessage(ByteSpan bytes) {
  ByteReader r(bytes, ErrorCode::kInvalidArgument);
  ControlMessage m;
  uint8_t tag = r.U8();
  switch (tag) {
    case 0: {
      m.kind = ControlMessage::Kind::kHello;
      ByteSpan magic = r.Bytes(4);
      std::copy(magic.begin(), magic.end(), m.magic.begin());
      break;
    }
    case 1: {
      m.kind = ControlMessage::Kind::kGo;
      m.test_id = r.U32();
      uint32_t len = r.U32();
      ByteSpan input = r.Bytes(len);
      m.input.assign(input.begin(), input.end());
      break;
    }
    case 2:
      m.kind = ControlMessage::Kind::kStatus;
      m.status_code = r.U32();
      m.status_value = r.U32();
      if (m.status_code > uint32_t(StatusCode::kCheckpointRequested)) {
        throw Error(ErrorCode::kInvalidArgument, "bad status code");
      }
      break;
    case 3:
      m.kind = ControlMessage::Kind::kBye;
      break;
    default:
      throw Error(ErrorCode::kInvalidArgument, "bad message tag " + std::to_string(tag));
  }
  if (!r.done()) throw Error(ErrorCode::kInvalidArgument, "trailing bytes after message");
  return m;
}

std::pair<std::unique_ptr<ControlChannel>, std::unique_ptr<ControlChannel>> MakeChannelPair() {
  auto state = std::make_shared<PipeState>();
  return {std::make_unique<InProcessChannel>(state, 0), std::make_unique<InProcessChannel>(state, 1)};
}

SocketChannel::~SocketChannel() { Close(); }

bool SocketChannel::Send(const ControlMessage& message) {
  if (fd_ < 0) return false;
  ByteArray bytes = EncodeMessage(message);
  return WriteAll(fd_, bytes.data(), bytes.size());
}

RecvResult SocketChannel::Receive(ControlMessage& out, milliseconds timeout) {
  if (fd_ < 0) return RecvResult::kClosed;
  const Clock::time_point deadline = Clock::now() + timeout;
  uint8_t tag = 0;
  switch (ReadExact(fd_, &tag, 1, deadline)) {
    case IoResult::kTimeout: return RecvResult::kTimeout;
    case IoResult::kClosed: return RecvResult::kClosed;
    case IoResult::kOk: break;
  }
  // Once a tag has arrived the rest of the frame follows promptly; a peer
  // that stalls mid-frame is treated as gone.
  const Clock::time_point body_deadline = std::max(deadline, Clock::now() + kDefaultAttachTimeout);
  ByteArray frame = {tag};
  size_t fixed = 0;
  switch (tag) {
    case 0: fixed = 4; break;
    case 1: fixed = 8; break;
    case 2: fixed = 8; break;
    case 3: fixed = 0; break;
    default: return RecvResult::kClosed;
  }
  frame.resize(1 + fixed);
  if (fixed > 0 && ReadExact(fd_, frame.data() + 1, fixed, body_deadline) != IoResult::kOk) {
    return RecvResult::kClosed;
  }
  if (tag == 1) {
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= uint32_t{frame[5 + i]} << (8 * i);
    frame.resize(1 + fixed + len);
    if (len > 0 && ReadExact(fd_, frame.data() + 1 + fixed, len, body_deadline) != IoResult::kOk) {
      return RecvResult::kClosed;
    }
  }
  try {
    out = DecodeMessage(frame);
  } catch (const Error&) {
    return RecvResult::kClosed;
  }
  return RecvResult::kOk;
}

void SocketChannel::Close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<ControlChannel> ConnectUnixSocket(const std::string& path) {
  int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return nullptr;
  sockaddr_un addr = UnixAddress(path);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    return nullptr;
  }
  return std::make_unique<SocketChannel>(fd);
}

std::shared_ptr<CoverageRegion> CoverageRegion::CreatePrivate() {
  std::shared_ptr<CoverageRegion> region(new CoverageRegion());
  region->owned_ = std::make_unique<Layout>();
  region->layout_ = region->owned_.get();
  region->Reset();
  return region;
}

std::shared_ptr<CoverageRegion> CoverageRegion::CreateShared(const std::string& name) {
  int fd = ::shm_open(name.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
  if (fd < 0) throw Error(ErrorCode::kIo, "shm_open(" + name + "): " + std::strerror(errno));
  if (::ftruncate(fd, sizeof(Layout)) != 0) {
    ::close(fd);
    ::shm_unlink(name.c_str());
    throw Error(ErrorCode::kIo, "ftruncate(" + name + ") failed");
  }
  void* p = ::mmap(nullptr, sizeof(Layout), PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) {
    ::shm_unlink(name.c_str());
    throw Error(ErrorCode::kIo, "mmap(" + name + ") failed");
  }
  std::shared_ptr<CoverageRegion> region(new CoverageRegion());
  region->layout_ = static_cast<Layout*>(p);
  region->shm_name_ = name;
  region->unlink_on_destroy_ = true;
  region->Reset();
  return region;
}

std::shared_ptr<CoverageRegion> CoverageRegion::OpenShared(const std::string& name) {
  int fd = ::shm_open(name.c_str(), O_RDWR, 0600);
  if (fd < 0) throw Error(ErrorCode::kIo, "shm_open(" + name + "): " + std::strerror(errno));
  void* p = ::mmap(nullptr, sizeof(Layout), PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) throw Error(ErrorCode::kIo, "mmap(" + name + ") failed");
  std::shared_ptr<CoverageRegion> region(new CoverageRegion());
  region->layout_ = static_cast<Layout*>(p);
  region->shm_name_ = name;
  return region;
}

CoverageRegion::~CoverageRegion() {
  if (owned_ == nullptr && layout_ != nullptr) ::munmap(layout_, sizeof(Layout));
  if (unlink_on_destroy_) ::shm_unlink(shm_name_.c_str());
}

void CoverageRegion::Reset() {
  std::memset(layout_->map, 0, kMapSize);
  layout_->exec_steps = 0;
}

ControlLocator ControlLocator::FromEnvironment() {
  ControlLocator locator;
  if (const char* ctrl = std::getenv(kControlEnv); ctrl != nullptr) locator.socket_path = ctrl;
  if (const char* shm = std::getenv(kShmEnv); shm != nullptr) locator.shm_name = shm;
  return locator;
}

std::shared_ptr<InProcessControlPoint> InProcessControlPoint::Create() {
  std::shared_ptr<InProcessControlPoint> point(new InProcessControlPoint());
  auto [fuzzer_end, target_end] = MakeChannelPair();
  point->fuzzer_end_ = std::move(fuzzer_end);
  point->target_end_ = std::move(target_end);
  point->coverage_ = CoverageRegion::CreatePrivate();
  return point;
}

std::optional<TargetLink> InProcessControlPoint::ConnectTarget() {
  std::lock_guard<std::mutex> lock(mu_);
  if (target_taken_) return std::nullopt;
  target_taken_ = true;
  return TargetLink{std::move(target_end_), coverage_};
}

std::unique_ptr<ControlChannel> InProcessControlPoint::AcceptFuzzer(milliseconds /*timeout*/) {
  std::lock_guard<std::mutex> lock(mu_);
  if (fuzzer_taken_) throw Error(ErrorCode::kAttachFailed, "a fuzzer is already attached");
  fuzzer_taken_ = true;
  // The queue buffers messages until the target connects, so the fuzzer
  // end is usable immediately.
  return std::move(fuzzer_end_);
}

ControlLocator InProcessControlPoint::locator() {
  ControlLocator locator;
  locator.point = shared_from_this();
  return locator;
}

UnixControlPoint::UnixControlPoint(std::string socket_path, std::string shm_name)
    : socket_path_(std::move(socket_path)), shm_name_(std::move(shm_name)) {
  coverage_ = CoverageRegion::CreateShared(shm_name_);
  listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::kIo, "socket() failed");
  ::unlink(socket_path_.c_str());
  sockaddr_un addr = UnixAddress(socket_path_);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 1) != 0) {
    int err = errno;
    ::close(listen_fd_);
    throw Error(ErrorCode::kIo, "cannot listen on " + socket_path_ + ": " + std::strerror(err));
  }
}

UnixControlPoint::~UnixControlPoint() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
  ::unlink(socket_path_.c_str());
}

std::optional<TargetLink> UnixControlPoint::ConnectTarget() { return ConnectLocator(locator()); }

std::unique_ptr<ControlChannel> UnixControlPoint::AcceptFuzzer(milliseconds timeout) {
  if (fuzzer_taken_) throw Error(ErrorCode::kAttachFailed, "a fuzzer is already attached");
  fuzzer_taken_ = true;
  if (!WaitFd(listen_fd_, POLLIN, Clock::now() + timeout)) {
    throw Error(ErrorCode::kAttachFailed, "target did not connect to " + socket_path_);
  }
  int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) throw Error(ErrorCode::kAttachFailed, "accept() failed");
  return std::make_unique<SocketChannel>(fd);
}

ControlLocator UnixControlPoint::locator() {
  ControlLocator locator;
  locator.socket_path = socket_path_;
  locator.shm_name = shm_name_;
  return locator;
}

std::optional<TargetLink> ConnectTarget(const ControlLocator& locator) {
  return ConnectLocator(locator);
}

}  // namespace ckfuzz
