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

// Target process model and the forkserver protocol.
//
// A Session is one running instance of the target: VM state, plugins,
// virtual resources, and the forkserver flag. The first edge after launch
// or restore runs the lazy init (maybe-log): with a reachable fuzzer the
// session shakes hands and becomes the forkserver parent, otherwise it
// records ABORT and keeps running uninstrumented. While serving, every Go
// clones the parent state into a child that runs the test case; the parent
// itself never advances.
//
// ForkserverClient is the fuzzer's end: attach, then RunOne per input.

#ifndef CKFUZZ_FORKSERVER_H_
#define CKFUZZ_FORKSERVER_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ckfuzz/common.h"
#include "ckfuzz/control.h"
#include "ckfuzz/coverage.h"
#include "ckfuzz/hooks.h"
#include "ckfuzz/resources.h"
#include "ckfuzz/target_vm.h"

namespace ckfuzz {

enum class ForkserverMode : uint8_t { kUninitialized = 0, kActive = 1, kAborted = 2 };

const char* ForkserverModeName(ForkserverMode mode);

class Session;

// Invoked inside a fuzz child when a plugin asks for a checkpoint.
using ChildCheckpointFn = std::function<void(Session& child, uint64_t pattern_hash)>;

struct SessionOptions {
  ControlLocator control;
  uint64_t child_step_limit = 10'000'000;
  // Plugin checkpoint requests honored per fuzz child.
  uint32_t child_checkpoint_burst = 1;
  milliseconds handshake_timeout = kDefaultAttachTimeout;
  ChildCheckpointFn on_child_checkpoint;
};

struct AdvanceResult {
  enum class Kind : uint8_t { kHalted, kCheckpoint, kServing, kStepBudget };

  Kind kind = Kind::kHalted;
  RunStatus status;           // kHalted
  uint64_t pattern_hash = 0;  // kCheckpoint; 0 for a CKPT instruction
};

// One observed instrumentation or host-call event, for tracing.
struct TraceEvent {
  enum class Kind : uint8_t { kEdge, kHostCall };

  Kind kind = Kind::kEdge;
  uint16_t loc = 0;
  HostCallEvent call;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

class Session {
 public:
  Session(std::shared_ptr<const TargetProgram> program, VmState state, HookRegistry hooks,
          ResourceTable resources, ForkserverMode mode = ForkserverMode::kUninitialized);

  // Fresh process at pc 0 reading `input`.
  static Session Launch(std::shared_ptr<const TargetProgram> program, HookRegistry hooks,
                        ByteArray input, std::string input_binding = "stdin");

  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;
  ~Session();

  // Deep copy of the process (state, plugins, resources); the copy has no
  // fuzzer link.
  Session Fork() const;

  const TargetProgram& program() const { return *program_; }
  const std::shared_ptr<const TargetProgram>& shared_program() const { return program_; }
  const VmState& state() const { return state_; }
  VmState& mutable_state() { return state_; }
  ForkserverMode forkserver_mode() const { return mode_; }
  void set_forkserver_mode(ForkserverMode mode) { mode_ = mode; }
  HookRegistry& hooks() { return hooks_; }
  const HookRegistry& hooks() const { return hooks_; }
  ResourceTable& resources() { return resources_; }
  const ResourceTable& resources() const { return resources_; }
  SessionOptions& options() { return options_; }

  ByteSpan input() const { return input_; }
  // Replaces the input stream contents and its binding; the cursor is
  // left alone.
  void BindInput(ByteArray input, std::string binding);

  // WRITE output is collected here when capture is on.
  void set_capture_output(bool capture) { capture_output_ = capture; }
  const ByteArray& output() const { return output_; }
  uint64_t output_bytes() const { return output_bytes_; }
  void set_output_bytes(uint64_t n) { output_bytes_ = n; }

  // Records every executed edge and host call while set.
  void set_trace(std::vector<TraceEvent>* trace) { trace_ = trace; }

  // Runs every plugin on `event`; returns their actions.
  std::vector<Action> DispatchHook(const HookEvent& event);

  // Applies the reset-plugin transition: a restored Aborted or Active flag
  // goes back to Uninitialized so the next edge retries the handshake.
  void ResetForkserver();

  // The lazy forkserver init, run on the first edge while Uninitialized.
  ForkserverMode MaybeLogInit();

  // Runs the live process until it halts, a checkpoint is requested (CKPT
  // or plugin), the forkserver starts serving, or `max_steps` pass.
  AdvanceResult Advance(uint64_t max_steps);

  enum class ServeResult : uint8_t { kServed, kIdle, kEnded };

  // Handles at most one control message.
  ServeResult ServeOne(milliseconds timeout);
  // Serves until Bye or the channel closes.
  void Serve();
  bool serving() const { return serving_; }

  // Library-mode driver: advances to the forkserver if not serving yet,
  // otherwise handles one pending message without blocking.
  void Pump();

  // Executes this session as a fuzz child, recording edges into `coverage`.
  // CKPT is a no-op here; plugin checkpoint requests go to `on_checkpoint`
  // (up to `burst` per run).
  RunStatus RunAsChild(MapSpan coverage, uint64_t step_limit, const ChildCheckpointFn& on_checkpoint,
                       uint32_t burst);

  // FNV-1a over the VM snapshot, forkserver flag and plugin states.
  uint64_t StateHash() const;

  // Copies the input cursor and output byte count into the resource table.
  void SyncResourceOffsets();

 private:
  class LiveObserver;
  class ChildObserver;
  struct Link;

  void EndServing();

  std::shared_ptr<const TargetProgram> program_;
  VmState state_;
  ForkserverMode mode_;
  HookRegistry hooks_;
  ResourceTable resources_;
  ByteArray input_;
  ByteArray output_;
  uint64_t output_bytes_ = 0;
  bool capture_output_ = false;
  std::vector<TraceEvent>* trace_ = nullptr;
  SessionOptions options_;

  std::unique_ptr<Link> link_;
  bool serving_ = false;
  std::unique_ptr<Session> scratch_child_;
};

class ForkserverClient {
 public:
  using Pump = std::function<void()>;

  // Completes the Hello handshake through `point`. With a pump (library
  // mode) the target is driven synchronously and no waiting happens.
  // Throws Error{kAttachFailed}.
  static ForkserverClient Attach(ControlPoint& point, milliseconds timeout = kDefaultAttachTimeout,
                                 Pump pump = {});

  ForkserverClient(ForkserverClient&&) noexcept = default;
  ForkserverClient& operator=(ForkserverClient&&) noexcept = default;
  ~ForkserverClient();

  // Zeroes the coverage region, sends Go, waits for Status. Coverage of
  // the run stays in coverage() until the next call.
  // Throws Error{kTargetLost}.
  RunStatus RunOne(ByteSpan input);

  MapSpan coverage() { return region_->map(); }
  uint64_t last_exec_steps() const { return region_->exec_steps(); }
  uint32_t tests_run() const { return next_test_id_; }

  // Sends Bye; further RunOne calls fail.
  void Close();

 private:
  ForkserverClient() = default;

  std::unique_ptr<ControlChannel> channel_;
  std::shared_ptr<CoverageRegion> region_;
  Pump pump_;
  uint32_t next_test_id_ = 0;
  milliseconds reply_timeout_{60'000};
};

}  // namespace ckfuzz

#endif  // CKFUZZ_FORKSERVER_H_
