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

// Checkpointer plugins. A plugin sees lifecycle events (pre/post
// checkpoint, post restart) and the target's host calls and edges, and
// may answer with an Action. Plugins only observe; the session applies
// their actions between VM steps.
//
// Three plugins ship with the framework:
//   pattern:<read|write|seek>=N  checkpoint after the N-th call of a kind
//   analysis[:window=N]          checkpoint on every unseen call pattern
//   reset                        re-arm the forkserver after a restore

#ifndef CKFUZZ_HOOKS_H_
#define CKFUZZ_HOOKS_H_

#include <cstdint>
#include <deque>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ckfuzz/common.h"
#include "ckfuzz/target_vm.h"

namespace ckfuzz {

struct HookEvent {
  enum class Kind : uint8_t { kPreCheckpoint, kPostCheckpoint, kPostRestart, kHostCall, kEdgeHit };

  Kind kind = Kind::kPreCheckpoint;
  HostCallEvent host_call;  // kHostCall
  uint16_t loc = 0;         // kEdgeHit

  static HookEvent PreCheckpoint() { return {Kind::kPreCheckpoint, {}, 0}; }
  static HookEvent PostCheckpoint() { return {Kind::kPostCheckpoint, {}, 0}; }
  static HookEvent PostRestart() { return {Kind::kPostRestart, {}, 0}; }
  static HookEvent HostCall(const HostCallEvent& e) { return {Kind::kHostCall, e, 0}; }
  static HookEvent EdgeHit(uint16_t loc) { return {Kind::kEdgeHit, {}, loc}; }
};

struct Action {
  enum class Kind : uint8_t { kNone, kRequestCheckpoint, kResetForkserver };

  Kind kind = Kind::kNone;
  uint64_t pattern_hash = 0;

  static Action None() { return {}; }
  static Action RequestCheckpoint(uint64_t hash) { return {Kind::kRequestCheckpoint, hash}; }
  static Action ResetForkserver() { return {Kind::kResetForkserver, 0}; }

  friend bool operator==(const Action&, const Action&) = default;
};

struct HookContext {
  const VmState& state;
};

class Plugin {
 public:
  virtual ~Plugin() = default;

  // Unique within a registry; also the specifier that recreates it.
  virtual const std::string& name() const = 0;
  virtual Action OnEvent(const HookEvent& event, const HookContext& context) = 0;
  virtual ByteArray Serialize() const = 0;
  // Throws Error{kCorruptImage} on a malformed blob.
  virtual void Deserialize(ByteSpan blob) = 0;
  virtual std::unique_ptr<Plugin> Clone() const = 0;
  // EdgeHit is only delivered to plugins that ask for it.
  virtual bool WantsEdges() const { return false; }
};

// Ordered set of plugins; events are delivered in registration order.
class HookRegistry {
 public:
  HookRegistry() = default;
  HookRegistry(const HookRegistry& other);
  HookRegistry& operator=(const HookRegistry& other);
  HookRegistry(HookRegistry&&) noexcept = default;
  HookRegistry& operator=(HookRegistry&&) noexcept = default;

  // Throws Error{kDuplicatePlugin}.
  void Register(std::unique_ptr<Plugin> plugin);

  // Appends every non-None action to `actions`.
  void Dispatch(const HookEvent& event, const HookContext& context, std::vector<Action>& actions);

  Plugin* Find(std::string_view name);
  const Plugin* Find(std::string_view name) const;

  size_t size() const { return plugins_.size(); }
  bool empty() const { return plugins_.empty(); }
  bool wants_edges() const { return edge_listeners_ > 0; }
  const std::vector<std::unique_ptr<Plugin>>& plugins() const { return plugins_; }

 private:
  std::vector<std::unique_ptr<Plugin>> plugins_;
  size_t edge_listeners_ = 0;
};

struct PatternSpec {
  HostCallKind call_kind = HostCallKind::kRead;
  uint32_t count = 1;
};

// FNV-1a 64 of "pattern:<kind>:<count>".
uint64_t PatternHash(const PatternSpec& spec);

// floor(log2(length + 1)), exact for the whole u64 range.
uint8_t LengthBucket(uint64_t length);

class PatternPlugin final : public Plugin {
 public:
  // Throws Error{kInvalidArgument} when count is 0.
  explicit PatternPlugin(PatternSpec spec);

  const std::string& name() const override { return name_; }
  Action OnEvent(const HookEvent& event, const HookContext& context) override;
  ByteArray Serialize() const override;
  void Deserialize(ByteSpan blob) override;
  std::unique_ptr<Plugin> Clone() const override { return std::make_unique<PatternPlugin>(*this); }

  uint64_t seen() const { return seen_; }
  bool fired() const { return fired_; }

 private:
  PatternSpec spec_;
  std::string name_;
  uint64_t seen_ = 0;
  bool fired_ = false;
};

// Hashes the (kind, length bucket) sequence of the last `window` host
// calls, or of every call so far when window is 0, and requests a
// checkpoint the first time each hash shows up.
class AnalysisPlugin final : public Plugin {
 public:
  explicit AnalysisPlugin(uint32_t window = 0);

  const std::string& name() const override { return name_; }
  Action OnEvent(const HookEvent& event, const HookContext& context) override;
  ByteArray Serialize() const override;
  void Deserialize(ByteSpan blob) override;
  std::unique_ptr<Plugin> Clone() const override { return std::make_unique<AnalysisPlugin>(*this); }

  uint32_t window() const { return window_; }
  const std::set<uint64_t>& seen() const { return seen_; }

 private:
  uint32_t window_;
  std::string name_;
  uint64_t calls_ = 0;
  uint64_t prefix_state_ = Fnv1a64::kOffsetBasis;
  std::deque<std::pair<uint8_t, uint8_t>> recent_;
  std::set<uint64_t> seen_;
};

class ResetPlugin final : public Plugin {
 public:
  ResetPlugin();

  const std::string& name() const override { return name_; }
  Action OnEvent(const HookEvent& event, const HookContext& context) override;
  ByteArray Serialize() const override { return {}; }
  void Deserialize(ByteSpan blob) override;
  std::unique_ptr<Plugin> Clone() const override { return std::make_unique<ResetPlugin>(*this); }

 private:
  std::string name_;
};

// Parses a plugin specifier ("pattern:read=5", "analysis",
// "analysis:window=4", "reset"). Throws Error{kInvalidArgument}.
std::unique_ptr<Plugin> MakePlugin(std::string_view specifier);

}  // namespace ckfuzz

#endif  // CKFUZZ_HOOKS_H_
