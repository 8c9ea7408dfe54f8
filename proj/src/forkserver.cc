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

#include "ckfuzz/forkserver.h"

#include <utility>

namespace ckfuzz {

const char* ForkserverModeName(ForkserverMode mode) {
  switch (mode) {
    case ForkserverMode::kUninitialized: return "uninitialized";
    case ForkserverMode::kActive: return "active";
    case ForkserverMode::kAborted: return "aborted";
  }
  return "?";
}

struct Session::Link {
  std::unique_ptr<ControlChannel> channel;
  std::shared_ptr<CoverageRegion> coverage;
};

// Observer for the live (parent) process: runs the lazy forkserver init on
// the first edge and turns plugin checkpoint requests into stops.
class Session::LiveObserver final : public ExecObserver {
 public:
  explicit LiveObserver(Session& session) : session_(session) {}

  bool OnEdge(const VmState& state, uint16_t cur_loc) override {
    if (session_.mode_ == ForkserverMode::kUninitialized &&
        session_.MaybeLogInit() == ForkserverMode::kActive) {
      return false;
    }
    if (session_.serving_) return false;
    if (session_.trace_ != nullptr) {
      session_.trace_->push_back({TraceEvent::Kind::kEdge, cur_loc, {}});
    }
    if (session_.hooks_.wants_edges()) Handle(session_.hooks_, HookEvent::EdgeHit(cur_loc), state);
    return true;
  }

  void OnHostCall(const VmState& state, const HostCallEvent& event) override {
    if (event.kind == HostCallKind::kWrite) session_.output_bytes_ += event.result;
    if (session_.trace_ != nullptr) {
      session_.trace_->push_back({TraceEvent::Kind::kHostCall, 0, event});
    }
    if (!session_.hooks_.empty()) Handle(session_.hooks_, HookEvent::HostCall(event), state);
  }

  std::optional<uint64_t> pending_checkpoint;

 private:
  void Handle(HookRegistry& hooks, const HookEvent& event, const VmState& state) {
    actions_.clear();
    hooks.Dispatch(event, HookContext{state}, actions_);
    for (const Action& action : actions_) {
      if (action.kind == Action::Kind::kRequestCheckpoint && !pending_checkpoint) {
        pending_checkpoint = action.pattern_hash;
        stop_after_step = true;
      } else if (action.kind == Action::Kind::kResetForkserver) {
        session_.ResetForkserver();
      }
    }
  }

  Session& session_;
  std::vector<Action> actions_;
};

// Observer for a fuzz child: records edges into the shared map.
class Session::ChildObserver final : public ExecObserver {
 public:
  ChildObserver(Session& child, MapSpan coverage, uint32_t burst)
      : child_(child), coverage_(coverage), burst_left_(burst) {}

  bool OnEdge(const VmState& state, uint16_t cur_loc) override {
    RecordEdge(coverage_, state.prev_loc, cur_loc);
    if (child_.hooks_.wants_edges()) Handle(HookEvent::EdgeHit(cur_loc), state);
    return true;
  }

  void OnHostCall(const VmState& state, const HostCallEvent& event) override {
    if (!child_.hooks_.empty()) Handle(HookEvent::HostCall(event), state);
  }

  std::optional<uint64_t> pending_checkpoint;

 private:
  void Handle(const HookEvent& event, const VmState& state) {
    actions_.clear();
    child_.hooks_.Dispatch(event, HookContext{state}, actions_);
    for (const Action& action : actions_) {
      if (action.kind != Action::Kind::kRequestCheckpoint) continue;
      if (burst_left_ == 0 || pending_checkpoint) continue;
      --burst_left_;
      pending_checkpoint = action.pattern_hash;
      stop_after_step = true;
    }
  }

  Session& child_;
  MapSpan coverage_;
  uint32_t burst_left_;
  std::vector<Action> actions_;
};

Session::Session(std::shared_ptr<const TargetProgram> program, VmState state, HookRegistry hooks,
                 ResourceTable resources, ForkserverMode mode)
    : program_(std::move(program)),
      state_(std::move(state)),
      mode_(mode),
      hooks_(std::move(hooks)),
      resources_(std::move(resources)) {}

Session Session::Launch(std::shared_ptr<const TargetProgram> program, HookRegistry hooks,
                        ByteArray input, std::string input_binding) {
  Session session(std::move(program), VmState{}, std::move(hooks),
                  ResourceTable::Default(std::move(input_binding)));
  session.input_ = std::move(input);
  return session;
}

Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;

Session::~Session() { EndServing(); }

Session Session::Fork() const {
  Session child(program_, state_, hooks_, resources_, mode_);
  child.input_ = input_;
  child.output_bytes_ = output_bytes_;
  child.options_ = options_;
  child.options_.control = ControlLocator{};
  return child;
}

void Session::BindInput(ByteArray input, std::string binding) {
  input_ = std::move(input);
  if (VirtualResource* r = resources_.Find(kInputVid)) r->binding = std::move(binding);
}

std::vector<Action> Session::DispatchHook(const HookEvent& event) {
  std::vector<Action> actions;
  hooks_.Dispatch(event, HookContext{state_}, actions);
  return actions;
}

void Session::ResetForkserver() {
  if (serving_) return;
  if (mode_ == ForkserverMode::kAborted || mode_ == ForkserverMode::kActive) {
    mode_ = ForkserverMode::kUninitialized;
  }
}

ForkserverMode Session::MaybeLogInit() {
  if (mode_ != ForkserverMode::kUninitialized) return mode_;
  std::optional<TargetLink> target = ConnectTarget(options_.control);
  if (!target || target->channel == nullptr || target->coverage == nullptr) {
    mode_ = ForkserverMode::kAborted;
    return mode_;
  }
  ControlMessage hello;
  if (target->channel->Receive(hello, options_.handshake_timeout) != RecvResult::kOk ||
      hello.kind != ControlMessage::Kind::kHello || hello.magic != kHelloMagic ||
      !target->channel->Send(ControlMessage::Hello())) {
    target->channel->Close();
    mode_ = ForkserverMode::kAborted;
    return mode_;
  }
  link_ = std::make_unique<Link>(Link{std::move(target->channel), std::move(target->coverage)});
  mode_ = ForkserverMode::kActive;
  serving_ = true;
  return mode_;
}

AdvanceResult Session::Advance(uint64_t max_steps) {
  if (serving_) return {AdvanceResult::Kind::kServing, {}, 0};
  LiveObserver observer(*this);
  const ExecIo io{input_, capture_output_ ? &output_ : nullptr};
  const uint64_t start = state_.steps;
  while (true) {
    if (state_.halted) {
      if (state_.halted->kind == RunStatus::Kind::kCheckpointRequested) {
        ResumeAfterCheckpoint(*program_, state_);
        return {AdvanceResult::Kind::kCheckpoint, {}, 0};
      }
      return {AdvanceResult::Kind::kHalted, *state_.halted, 0};
    }
    const uint64_t used = state_.steps - start;
    if (used >= max_steps) return {AdvanceResult::Kind::kStepBudget, {}, 0};
    switch (Execute(*program_, state_, io, max_steps - used, &observer)) {
      case ExecEnd::kHalted:
        break;
      case ExecEnd::kStepBudget:
        return {AdvanceResult::Kind::kStepBudget, {}, 0};
      case ExecEnd::kSuspended:
        return {AdvanceResult::Kind::kServing, {}, 0};
      case ExecEnd::kObserverStop:
        observer.stop_after_step = false;
        if (observer.pending_checkpoint) {
          return {AdvanceResult::Kind::kCheckpoint, {}, *observer.pending_checkpoint};
        }
        break;
    }
  }
}

Session::ServeResult Session::ServeOne(milliseconds timeout) {
  if (!serving_) return ServeResult::kEnded;
  ControlMessage message;
  switch (link_->channel->Receive(message, timeout)) {
    case RecvResult::kTimeout:
      return ServeResult::kIdle;
    case RecvResult::kClosed:
      EndServing();
      return ServeResult::kEnded;
    case RecvResult::kOk:
      break;
  }
  if (message.kind == ControlMessage::Kind::kBye) {
    EndServing();
    return ServeResult::kEnded;
  }
  if (message.kind != ControlMessage::Kind::kGo) return ServeResult::kServed;

  // "fork": reuse one child buffer so the 64 KiB copy needs no allocation.
  if (scratch_child_ == nullptr) {
    scratch_child_ = std::make_unique<Session>(Fork());
  } else {
    Session& child = *scratch_child_;
    child.state_ = state_;
    child.hooks_ = hooks_;
    child.resources_ = resources_;
    child.mode_ = mode_;
    child.output_bytes_ = output_bytes_;
  }
  Session& child = *scratch_child_;
  child.input_ = std::move(message.input);
  child.state_.input_cursor = 0;
  if (VirtualResource* r = child.resources_.Find(kInputVid)) {
    r->binding = std::string(kFuzzerBinding);
    r->offset = 0;
  }

  const uint64_t steps_before = child.state_.steps;
  RunStatus status = child.RunAsChild(link_->coverage->map(), options_.child_step_limit,
                                      options_.on_child_checkpoint, options_.child_checkpoint_burst);
  link_->coverage->set_exec_steps(child.state_.steps - steps_before);
  if (!link_->channel->Send(ControlMessage::Status(status))) {
    EndServing();
    return ServeResult::kEnded;
  }
  return ServeResult::kServed;
}

void Session::Serve() {
  while (ServeOne(milliseconds(1000)) != ServeResult::kEnded) {
  }
}

void Session::Pump() {
  if (!serving_) {
    while (true) {
      AdvanceResult r = Advance(options_.child_step_limit);
      if (r.kind != AdvanceResult::Kind::kCheckpoint) break;
    }
    return;
  }
  ServeOne(milliseconds(0));
}

RunStatus Session::RunAsChild(MapSpan coverage, uint64_t step_limit,
                              const ChildCheckpointFn& on_checkpoint, uint32_t burst) {
  if (step_limit == 0) throw Error(ErrorCode::kInvalidArgument, "step_limit must be > 0");
  ChildObserver observer(*this, coverage, on_checkpoint ? burst : 0);
  const ExecIo io{input_, nullptr};
  const uint64_t start = state_.steps;
  while (true) {
    if (state_.halted) {
      if (state_.halted->kind != RunStatus::Kind::kCheckpointRequested) return *state_.halted;
      ResumeAfterCheckpoint(*program_, state_);
      continue;
    }
    const uint64_t used = state_.steps - start;
    if (used >= step_limit) {
      state_.halted = RunStatus::TimedOut(step_limit);
      return *state_.halted;
    }
    ExecEnd end = Execute(*program_, state_, io, step_limit - used, &observer);
    if (end == ExecEnd::kObserverStop) {
      observer.stop_after_step = false;
      if (observer.pending_checkpoint) {
        uint64_t hash = *observer.pending_checkpoint;
        observer.pending_checkpoint.reset();
        on_checkpoint(*this, hash);
      }
    }
  }
}

uint64_t Session::StateHash() const {
  Fnv1a64 h;
  h.Update(SnapshotState(state_));
  h.Update(static_cast<uint8_t>(mode_));
  for (const auto& plugin : hooks_.plugins()) {
    h.Update(plugin->name());
    h.Update(plugin->Serialize());
  }
  return h.digest();
}

void Session::SyncResourceOffsets() {
  if (VirtualResource* r = resources_.Find(kInputVid)) r->offset = state_.input_cursor;
  if (VirtualResource* r = resources_.Find(kOutputVid)) r->offset = output_bytes_;
}

void Session::EndServing() {
  serving_ = false;
  if (link_ != nullptr && link_->channel != nullptr) link_->channel->Close();
}

ForkserverClient ForkserverClient::Attach(ControlPoint& point, milliseconds timeout, Pump pump) {
  ForkserverClient client;
  client.channel_ = point.AcceptFuzzer(timeout);
  client.region_ = point.coverage();
  client.pump_ = std::move(pump);
  if (!client.channel_->Send(ControlMessage::Hello())) {
    throw Error(ErrorCode::kAttachFailed, "control channel closed before handshake");
  }
  milliseconds wait = timeout;
  if (client.pump_) {
    client.pump_();
    wait = milliseconds(0);
  }
  ControlMessage reply;
  RecvResult rc = client.channel_->Receive(reply, wait);
  if (rc != RecvResult::kOk) {
    client.channel_->Close();
    throw Error(ErrorCode::kAttachFailed, rc == RecvResult::kTimeout
                                              ? "target did not answer the handshake in time"
                                              : "control channel closed during handshake");
  }
  if (reply.kind != ControlMessage::Kind::kHello || reply.magic != kHelloMagic) {
    client.channel_->Close();
    throw Error(ErrorCode::kAttachFailed, "malformed handshake reply");
  }
  return client;
}

ForkserverClient::~ForkserverClient() { Close(); }

RunStatus ForkserverClient::RunOne(ByteSpan input) {
  if (channel_ == nullptr) throw Error(ErrorCode::kTargetLost, "client is closed");
  region_->Reset();
  if (!channel_->Send(ControlMessage::Go(next_test_id_++, input))) {
    throw Error(ErrorCode::kTargetLost, "control channel closed");
  }
  if (pump_) pump_();
  ControlMessage reply;
  RecvResult rc = channel_->Receive(reply, pump_ ? milliseconds(0) : reply_timeout_);
  if (rc != RecvResult::kOk || reply.kind != ControlMessage::Kind::kStatus) {
    throw Error(ErrorCode::kTargetLost, "forkserver did not report a status");
  }
  return reply.ToRunStatus();
}

void ForkserverClient::Close() {
  if (channel_ != nullptr) {
    channel_->Send(ControlMessage::Bye());
    if (pump_) pump_();
    channel_->Close();
    channel_.reset();
  }
}

}  // namespace ckfuzz
