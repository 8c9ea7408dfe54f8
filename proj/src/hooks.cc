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

#include "ckfuzz/hooks.h"

#include <bit>
#include <charconv>
#include <utility>

namespace ckfuzz {
namespace {

std::optional<HostCallKind> ParseCallKind(std::string_view text) {
  if (text == "read") return HostCallKind::kRead;
  if (text == "write") return HostCallKind::kWrite;
  if (text == "seek") return HostCallKind::kSeek;
  return std::nullopt;
}

std::optional<uint32_t> ParseU32(std::string_view text) {
  uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

void CheckDone(const ByteReader& r, std::string_view plugin) {
  if (!r.done()) {
    throw Error(ErrorCode::kCorruptImage, "trailing bytes in " + std::string(plugin) + " state");
  }
}

}  // namespace

HookRegistry::HookRegistry(const HookRegistry& other) : edge_listeners_(other.edge_listeners_) {
  plugins_.reserve(other.plugins_.size());
  for (const auto& p : other.plugins_) plugins_.push_back(p->Clone());
}

HookRegistry& HookRegistry::operator=(const HookRegistry& other) {
  if (this != &other) {
    HookRegistry copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void HookRegistry::Register(std::unique_ptr<Plugin> plugin) {
  if (Find(plugin->name()) != nullptr) {
    throw Error(ErrorCode::kDuplicatePlugin, "plugin already registered: " + plugin->name());
  }
  if (plugin->WantsEdges()) ++edge_listeners_;
  plugins_.push_back(std::move(plugin));
}

void HookRegistry::Dispatch(const HookEvent& event, const HookContext& context,
                            std::vector<Action>& actions) {
  const bool edge = event.kind == HookEvent::Kind::kEdgeHit;
  for (const auto& plugin : plugins_) {
    if (edge && !plugin->WantsEdges()) continue;
    Action action = plugin->OnEvent(event, context);
    if (action.kind != Action::Kind::kNone) actions.push_back(action);
  }
}

Plugin* HookRegistry::Find(std::string_view name) {
  for (const auto& p : plugins_) {
    if (p->name() == name) return p.get();
  }
  return nullptr;
}

const Plugin* HookRegistry::Find(std::string_view name) const {
  return const_cast<HookRegistry*>(this)->Find(name);
}

uint64_t PatternHash(const PatternSpec& spec) {
  std::string text = "pattern:";
  text += HostCallName(spec.call_kind);
  text += ':';
  text += std::to_string(spec.count);
  return HashText(text);
}

uint8_t LengthBucket(uint64_t length) {
  if (length == UINT64_MAX) return 64;
  return static_cast<uint8_t>(std::bit_width(length + 1) - 1);
}

PatternPlugin::PatternPlugin(PatternSpec spec) : spec_(spec) {
  if (spec.count == 0) throw Error(ErrorCode::kInvalidArgument, "pattern count must be >= 1");
  name_ = "pattern:" + std::string(HostCallName(spec.call_kind)) + "=" + std::to_string(spec.count);
}

Action PatternPlugin::OnEvent(const HookEvent& event, const HookContext& /*context*/) {
  if (event.kind != HookEvent::Kind::kHostCall || event.host_call.kind != spec_.call_kind) {
    return Action::None();
  }
  ++seen_;
  if (!fired_ && seen_ >= spec_.count) {
    fired_ = true;
    return Action::RequestCheckpoint(PatternHash(spec_));
  }
  return Action::None();
}

ByteArray PatternPlugin::Serialize() const {
  ByteWriter w;
  w.U8(static_cast<uint8_t>(spec_.call_kind));
  w.U32(spec_.count);
  w.U64(seen_);
  w.U8(fired_ ? 1 : 0);
  return w.Take();
}

void PatternPlugin::Deserialize(ByteSpan blob) {
  ByteReader r(blob, ErrorCode::kCorruptImage);
  uint8_t kind = r.U8();
  uint32_t count = r.U32();
  uint64_t seen = r.U64();
  uint8_t fired = r.U8();
  CheckDone(r, name_);
  if (kind != static_cast<uint8_t>(spec_.call_kind) || count != spec_.count || fired > 1) {
    throw Error(ErrorCode::kCorruptImage, "state does not belong to " + name_);
  }
  seen_ = seen;
  fired_ = fired == 1;
}

AnalysisPlugin::AnalysisPlugin(uint32_t window)
    : window_(window), name_(window == 0 ? "analysis" : "analysis:window=" + std::to_string(window)) {}

Action AnalysisPlugin::OnEvent(const HookEvent& event, const HookContext& /*context*/) {
  if (event.kind != HookEvent::Kind::kHostCall) return Action::None();
  const uint8_t kind = static_cast<uint8_t>(event.host_call.kind);
  const uint8_t bucket = LengthBucket(event.host_call.length_or_offset);
  ++calls_;

  uint64_t hash;
  if (window_ == 0) {
    Fnv1a64 h(prefix_state_);
    h.Update(kind);
    h.Update(bucket);
    prefix_state_ = h.digest();
    hash = prefix_state_;
  } else {
    recent_.emplace_back(kind, bucket);
    if (recent_.size() > window_) recent_.pop_front();
    Fnv1a64 h;
    for (auto [k, b] : recent_) {
      h.Update(k);
      h.Update(b);
    }
    hash = h.digest();
  }

  if (seen_.insert(hash).second) return Action::RequestCheckpoint(hash);
  return Action::None();
}

ByteArray AnalysisPlugin::Serialize() const {
  ByteWriter w;
  w.U32(window_);
  w.U64(calls_);
  w.U64(prefix_state_);
  w.U32(static_cast<uint32_t>(recent_.size()));
  for (auto [k, b] : recent_) {
    w.U8(k);
    w.U8(b);
  }
  w.U32(static_cast<uint32_t>(seen_.size()));
  for (uint64_t h : seen_) w.U64(h);
  return w.Take();
}

void AnalysisPlugin::Deserialize(ByteSpan blob) {
  ByteReader r(blob, ErrorCode::kCorruptImage);
  if (r.U32() != window_) throw Error(ErrorCode::kCorruptImage, "state does not belong to " + name_);
  uint64_t calls = r.U64();
  uint64_t prefix = r.U64();
  uint32_t n_recent = r.U32();
  if (window_ == 0 ? n_recent != 0 : n_recent > window_) {
    throw Error(ErrorCode::kCorruptImage, "bad call window in " + name_);
  }
  std::deque<std::pair<uint8_t, uint8_t>> recent;
  for (uint32_t i = 0; i < n_recent; ++i) {
    uint8_t k = r.U8();
    uint8_t b = r.U8();
    recent.emplace_back(k, b);
  }
  uint32_t n_seen = r.U32();
  if (n_seen > r.remaining() / 8) throw Error(ErrorCode::kCorruptImage, "truncated seen set");
  std::set<uint64_t> seen;
  for (uint32_t i = 0; i < n_seen; ++i) seen.insert(r.U64());
  CheckDone(r, name_);
  calls_ = calls;
  prefix_state_ = prefix;
  recent_ = std::move(recent);
  seen_ = std::move(seen);
}

ResetPlugin::ResetPlugin() : name_("reset") {}

Action ResetPlugin::OnEvent(const HookEvent& event, const HookContext& /*context*/) {
  if (event.kind == HookEvent::Kind::kPostRestart) return Action::ResetForkserver();
  return Action::None();
}

void ResetPlugin::Deserialize(ByteSpan blob) {
  if (!blob.empty()) throw Error(ErrorCode::kCorruptImage, "reset plugin carries no state");
}

std::unique_ptr<Plugin> MakePlugin(std::string_view specifier) {
  auto bad = [&]() -> Error {
    return Error(ErrorCode::kInvalidArgument, "bad plugin specifier '" + std::string(specifier) + "'");
  };
  if (specifier == "reset") return std::make_unique<ResetPlugin>();
  if (specifier == "analysis") return std::make_unique<AnalysisPlugin>(0);
  constexpr std::string_view kAnalysis = "analysis:window=";
  if (specifier.starts_with(kAnalysis)) {
    auto window = ParseU32(specifier.substr(kAnalysis.size()));
    if (!window) throw bad();
    return std::make_unique<AnalysisPlugin>(*window);
  }
  constexpr std::string_view kPattern = "pattern:";
  if (specifier.starts_with(kPattern)) {
    std::string_view rest = specifier.substr(kPattern.size());
    size_t eq = rest.find('=');
    if (eq == std::string_view::npos) throw bad();
    auto kind = ParseCallKind(rest.substr(0, eq));
    auto count = ParseU32(rest.substr(eq + 1));
    if (!kind || !count || *count == 0) throw bad();
    return std::make_unique<PatternPlugin>(PatternSpec{*kind, *count});
  }
  throw bad();
}

}  // namespace ckfuzz
