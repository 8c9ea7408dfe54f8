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


#include "ckfuzz/checkpoint.h"

#include <array>
#include <utility>

namespace ckfuzz {
namespace {

constexpr std::array<uint8_t, 4> kImageMagic = {'C', 'K', 'F', 'Z'};

Error Corrupt(const std::string& what) { return Error(ErrorCode::kCorruptImage, what); }

void WriteSection(ByteWriter& out, SectionId id, ByteSpan payload) {
  out.U32(static_cast<uint32_t>(id));
  out.U64(payload.size());
  out.Bytes(payload);
}

ByteSpan ReadSection(ByteReader& in, SectionId expected) {
  const uint32_t id = in.U32();
  if (id != static_cast<uint32_t>(expected)) {
    throw Corrupt("expected section " + std::to_string(static_cast<uint32_t>(expected)) +
                  ", found " + std::to_string(id));
  }
  const uint64_t length = in.U64();
  if (length > in.remaining()) throw Corrupt("truncated section " + std::to_string(id));
  return in.Bytes(static_cast<size_t>(length));
}

}  // namespace

CheckpointImage Checkpoint(Session& session, uint64_t pattern_hash, uint64_t created_counter) {
  session.SyncResourceOffsets();
  CheckpointImage image;
  image.created_counter = created_counter;
  image.pattern_hash = pattern_hash;
  image.vm_payload = SnapshotState(session.state());
  image.program_hash = session.program().Hash();
  image.resources = session.resources();
  for (const auto& plugin : session.hooks().plugins()) {
    image.hook_blobs.emplace_back(plugin->name(), plugin->Serialize());
  }
  image.forkserver_flag = static_cast<uint8_t>(session.forkserver_mode());
  return image;
}

CheckpointImage TakeCheckpoint(Session& session, uint64_t pattern_hash, uint64_t created_counter) {
  session.DispatchHook(HookEvent::PreCheckpoint());
  CheckpointImage image = Checkpoint(session, pattern_hash, created_counter);
  session.DispatchHook(HookEvent::PostCheckpoint());
  return image;
}

ByteArray EncodeImage(const CheckpointImage& image) {
  ByteWriter out;
  out.Bytes(kImageMagic);
  out.U32(image.version);
  out.U64(image.created_counter);
  out.U64(image.pattern_hash);
  out.U8(image.forkserver_flag);
  out.Zeros(7);

  ByteWriter vm;
  vm.Bytes(image.vm_payload);
  vm.U64(image.program_hash);
  WriteSection(out, SectionId::kVmState, vm.buffer());

  ByteWriter res;
  res.U32(static_cast<uint32_t>(image.resources.entries().size()));
  for (const VirtualResource& r : image.resources.entries()) {
    res.U32(r.vid);
    res.U8(static_cast<uint8_t>(r.kind));
    res.U64(r.offset);
    res.U32(static_cast<uint32_t>(r.binding.size()));
    res.Text(r.binding);
  }
  WriteSection(out, SectionId::kResources, res.buffer());

  ByteWriter hooks;
  hooks.U32(static_cast<uint32_t>(image.hook_blobs.size()));
  for (const auto& [name, blob] : image.hook_blobs) {
    hooks.U32(static_cast<uint32_t>(name.size()));
    hooks.Text(name);
    hooks.U64(blob.size());
    hooks.Bytes(blob);
  }
  WriteSection(out, SectionId::kHooks, hooks.buffer());
  return out.Take();
}

CheckpointImage DecodeImage(ByteSpan bytes) {
  if (bytes.size() < kImageMagic.size() ||
      !std::equal(kImageMagic.begin(), kImageMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::kNotAnImage, "missing CKFZ magic");
  }
  ByteReader in(bytes.subspan(kImageMagic.size()), ErrorCode::kCorruptImage);
  CheckpointImage image;
  image.version = in.U32();
  if (image.version != kImageVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "image version " + std::to_string(image.version) + " is not supported");
  }
  image.created_counter = in.U64();
  image.pattern_hash = in.U64();
  image.forkserver_flag = in.U8();
  if (image.forkserver_flag > static_cast<uint8_t>(ForkserverMode::kAborted)) {
    throw Corrupt("bad forkserver flag");
  }
  for (int i = 0; i < 7; ++i) {
    if (in.U8() != 0) throw Corrupt("nonzero header padding");
  }

  ByteSpan vm = ReadSection(in, SectionId::kVmState);
  if (vm.size() != kSnapshotSize + 8) throw Corrupt("VM_STATE section has the wrong size");
  image.vm_payload.assign(vm.begin(), vm.begin() + kSnapshotSize);
  try {
    RestoreState(image.vm_payload);
  } catch (const Error& e) {
    throw Corrupt(std::string("VM_STATE: ") + e.what());
  }
  ByteReader trailer(vm.subspan(kSnapshotSize), ErrorCode::kCorruptImage);
  image.program_hash = trailer.U64();

  ByteReader res(ReadSection(in, SectionId::kResources), ErrorCode::kCorruptImage);
  const uint32_t resource_count = res.U32();
  for (uint32_t i = 0; i < resource_count; ++i) {
    VirtualResource r;
    r.vid = res.U32();
    const uint8_t kind = res.U8();
    if (kind > static_cast<uint8_t>(ResourceKind::kOutputSink)) throw Corrupt("bad resource kind");
    r.kind = static_cast<ResourceKind>(kind);
    r.offset = res.U64();
    r.binding = res.Text(res.U32());
    try {
      image.resources.Add(std::move(r));
    } catch (const Error&) {
      throw Corrupt("duplicate resource id");
    }
  }
  if (!res.done()) throw Corrupt("trailing bytes in RESOURCES");

  ByteReader hooks(ReadSection(in, SectionId::kHooks), ErrorCode::kCorruptImage);
  const uint32_t hook_count = hooks.U32();
  for (uint32_t i = 0; i < hook_count; ++i) {
    std::string name = hooks.Text(hooks.U32());
    const uint64_t length = hooks.U64();
    if (length > hooks.remaining()) throw Corrupt("truncated hook blob");
    ByteSpan blob = hooks.Bytes(static_cast<size_t>(length));
    image.hook_blobs.emplace_back(std::move(name), ByteArray(blob.begin(), blob.end()));
  }
  if (!hooks.done()) throw Corrupt("trailing bytes in HOOKS");
  if (!in.done()) throw Corrupt("trailing bytes after the last section");
  return image;
}

void WriteImage(const CheckpointImage& image, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeImage(image));
}

CheckpointImage ReadImage(const std::filesystem::path& path) {
  return DecodeImage(ReadFileBytes(path));
}

Session Restore(const CheckpointImage& image, std::shared_ptr<const TargetProgram> program,
                RestoreOptions options) {
  if (image.program_hash != program->Hash()) {
    throw Error(ErrorCode::kProgramMismatch,
                "image was taken from program " + Hex64(image.program_hash) + ", got " +
                    Hex64(program->Hash()));
  }
  VmState state;
  try {
    state = RestoreState(image.vm_payload);
  } catch (const Error& e) {
    throw Corrupt(std::string("VM_STATE: ") + e.what());
  }
  if (state.pc > program->size()) throw Corrupt("pc outside the program");
  if (image.forkserver_flag > static_cast<uint8_t>(ForkserverMode::kAborted)) {
    throw Corrupt("bad forkserver flag");
  }

  HookRegistry hooks;
  for (const auto& [name, blob] : image.hook_blobs) {
    std::unique_ptr<Plugin> plugin;
    try {
      plugin = MakePlugin(name);
    } catch (const Error&) {
      throw Corrupt("unknown plugin '" + name + "'");
    }
    plugin->Deserialize(blob);
    try {
      hooks.Register(std::move(plugin));
    } catch (const Error&) {
      throw Corrupt("duplicate plugin '" + name + "'");
    }
  }
  for (auto& plugin : options.extra_plugins) {
    if (hooks.Find(plugin->name()) == nullptr) hooks.Register(std::move(plugin));
  }

  ResourceTable resources = image.resources;
  VirtualResource* input = resources.Find(kInputVid);
  if (input == nullptr) throw Corrupt("image has no input stream resource");
  ByteArray stream;
  if (options.fuzzer_attach) {
    input->binding = std::string(kFuzzerBinding);
    input->offset = 0;
    state.input_cursor = 0;
  } else {
    stream = std::move(options.input);
    if (input->offset > stream.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "input stream is shorter than the checkpointed offset");
    }
  }

  Session session(std::move(program), std::move(state), std::move(hooks), std::move(resources),
                  static_cast<ForkserverMode>(image.forkserver_flag));
  session.BindInput(std::move(stream), session.resources().Find(kInputVid)->binding);
  if (const VirtualResource* out = session.resources().Find(kOutputVid)) {
    session.set_output_bytes(out->offset);
  }
  for (const Action& action : session.DispatchHook(HookEvent::PostRestart())) {
    if (action.kind == Action::Kind::kResetForkserver) session.ResetForkserver();
  }
  return session;
}

}  // namespace ckfuzz
