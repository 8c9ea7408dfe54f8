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

// The system under test: a small deterministic bytecode machine with
// eight 64-bit registers, 64 KiB of byte memory, an input stream with a
// cursor, and three host calls (read, write, seek). Basic-block entries
// are the instrumentation points; every time execution is about to run
// the first instruction of a block an edge event is raised, which is where
// the forkserver hooks in.
//
// Text assembly (.fza), one instruction per line:
//
//   ; comment
//   label:  LOADI r1, 0x41        ; imm: decimal, 0x hex, 'c', or -n
//           LOADB r2, r3, 16      ; r2 <- mem[r3 + 16]
//           CMPJNE r1, r2, label  ; also CMPJEQ / CMPJLT (unsigned)
//           READ r4, r5           ; mem[r4..] <- input, len r5
//           SEEK r1, 0            ; 0 = absolute, 1 = relative
//           EXIT r0
//
// Binary (.fzb): "FZBC", u32 version = 1, u32 count, then 8-byte
// instructions: opcode, a, b, pad, imm (u32 LE).

#ifndef CKFUZZ_TARGET_VM_H_
#define CKFUZZ_TARGET_VM_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ckfuzz/common.h"

namespace ckfuzz {

inline constexpr size_t kVmMemorySize = 65536;
inline constexpr int kNumRegisters = 8;
inline constexpr size_t kInstructionSize = 8;

enum class Opcode : uint8_t {
  kNop = 0,
  kLoadi = 1,
  kMov = 2,
  kAdd = 3,
  kSub = 4,
  kLoadb = 5,
  kStoreb = 6,
  kCmpjeq = 7,
  kCmpjne = 8,
  kCmpjlt = 9,
  kJmp = 10,
  kRead = 11,
  kWrite = 12,
  kSeek = 13,
  kCkpt = 14,
  kCrash = 15,
  kExit = 16,
};

inline constexpr uint8_t kMaxOpcode = 16;

std::string_view OpcodeName(Opcode op);

struct Instruction {
  Opcode opcode = Opcode::kNop;
  uint8_t a = 0;
  uint8_t b = 0;
  uint32_t imm = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

bool IsConditionalJump(Opcode op);
bool IsJump(Opcode op);

class TargetProgram {
 public:
  // Validates jump targets and register indices, then derives the block
  // entries: index 0, every jump target, and every instruction following a
  // conditional jump.
  static TargetProgram FromInstructions(std::vector<Instruction> instructions,
                                        std::string source_name);

  const std::vector<Instruction>& instructions() const { return instructions_; }
  const std::vector<uint32_t>& block_entries() const { return block_entries_; }
  const std::string& source_name() const { return source_name_; }
  size_t size() const { return instructions_.size(); }

  bool IsBlockEntry(uint32_t pc) const { return block_ordinal_[pc] >= 0; }
  // Coverage location of the block starting at `pc`; pc must be an entry.
  uint16_t BlockLoc(uint32_t pc) const { return block_loc_[pc]; }

  // FNV-1a 64 over the binary encoding; identifies the program inside
  // checkpoint images.
  uint64_t Hash() const;

 private:
  TargetProgram() = default;

  std::vector<Instruction> instructions_;
  std::vector<uint32_t> block_entries_;
  std::string source_name_;
  std::vector<int32_t> block_ordinal_;
  std::vector<uint16_t> block_loc_;
};

// Throws Error{kSyntax | kUndefinedLabel | kRegisterOutOfRange}; messages
// carry the 1-based line number.
TargetProgram Assemble(std::string_view source, std::string source_name = "<text>");

ByteArray EncodeProgram(const TargetProgram& program);
// Throws Error{kCorruptProgram}.
TargetProgram DecodeProgram(ByteSpan bytes, std::string source_name = "<binary>");

// Picks the decoder by content: "FZBC" magic means binary, else assembly.
TargetProgram LoadProgramFile(const std::string& path);

struct RunStatus {
  enum class Kind : uint8_t {
    kExited = 1,
    kCrashed = 2,
    kTimedOut = 3,
    kCheckpointRequested = 4,
  };

  Kind kind = Kind::kExited;
  // Exit code, crash/checkpoint site, or step limit, by kind.
  uint64_t value = 0;

  static RunStatus Exited(uint8_t code) { return {Kind::kExited, code}; }
  static RunStatus Crashed(uint32_t site) { return {Kind::kCrashed, site}; }
  static RunStatus TimedOut(uint64_t limit) { return {Kind::kTimedOut, limit}; }
  static RunStatus CheckpointRequested(uint32_t site) {
    return {Kind::kCheckpointRequested, site};
  }

  friend bool operator==(const RunStatus&, const RunStatus&) = default;
};

std::string ToString(const RunStatus& status);

enum class HostCallKind : uint8_t { kRead = 0, kWrite = 1, kSeek = 2 };

std::string_view HostCallName(HostCallKind kind);

struct HostCallEvent {
  HostCallKind kind = HostCallKind::kRead;
  // Requested length for read/write, requested offset for seek.
  uint64_t length_or_offset = 0;
  // Bytes moved, or the resulting cursor for seek.
  uint64_t result = 0;
  // Value of the step counter when the call executed.
  uint64_t step_at = 0;

  friend bool operator==(const HostCallEvent&, const HostCallEvent&) = default;
};

struct VmState {
  uint32_t pc = 0;
  std::array<uint64_t, kNumRegisters> regs{};
  std::vector<uint8_t> memory = std::vector<uint8_t>(kVmMemorySize, 0);
  uint16_t prev_loc = 0;
  uint64_t steps = 0;
  uint64_t input_cursor = 0;
  std::optional<RunStatus> halted;

  friend bool operator==(const VmState&, const VmState&) = default;
};

inline constexpr size_t kSnapshotSize = 4 + 8 * kNumRegisters + 2 + 8 + 8 + 1 + 8 + kVmMemorySize;

ByteArray SnapshotState(const VmState& state);
// Throws Error{kCorruptState} on any size or tag mismatch.
VmState RestoreState(ByteSpan bytes);

// Receives the VM's instrumentation and host-call events.
class ExecObserver {
 public:
  virtual ~ExecObserver() = default;

  // Raised before the first instruction of a block runs. Returning false
  // suspends execution: the step is abandoned with no state change, and the
  // same edge is raised again when execution resumes.
  virtual bool OnEdge(const VmState& state, uint16_t cur_loc) {
    (void)state;
    (void)cur_loc;
    return true;
  }
  virtual void OnHostCall(const VmState& state, const HostCallEvent& event) {
    (void)state;
    (void)event;
  }

  // Set by an observer to end Execute() once the current step completes.
  bool stop_after_step = false;
};

struct ExecIo {
  ByteSpan input;
  // Destination for WRITE; null discards.
  ByteArray* output = nullptr;
};

enum class StepResult : uint8_t { kExecuted, kSuspended };

// Executes one instruction. Requires !state.halted.
StepResult Step(const TargetProgram& program, VmState& state, const ExecIo& io,
                ExecObserver* observer = nullptr);

enum class ExecEnd : uint8_t { kHalted, kStepBudget, kSuspended, kObserverStop };

// Steps until halted, `max_steps` executed, suspension, or an observer
// stop request.
ExecEnd Execute(const TargetProgram& program, VmState& state, const ExecIo& io,
                uint64_t max_steps, ExecObserver* observer = nullptr);

// Runs to a RunStatus. On hitting `step_limit` steps in this call the
// state is marked TimedOut(step_limit). Observers must not suspend.
RunStatus Run(const TargetProgram& program, VmState& state, const ExecIo& io,
              uint64_t step_limit, ExecObserver* observer = nullptr);

// Acknowledges a CKPT halt: clears it and moves past the CKPT instruction.
// The checkpointing call "returns" in both the original and any restored
// copy, so execution continues identically from here.
void ResumeAfterCheckpoint(const TargetProgram& program, VmState& state);

}  // namespace ckfuzz

#endif  // CKFUZZ_TARGET_VM_H_
