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

#include "ckfuzz/target_vm.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <utility>

#include "ckfuzz/coverage.h"

namespace ckfuzz {
namespace {

constexpr std::string_view kProgramMagic = "FZBC";
constexpr uint32_t kProgramVersion = 1;

struct OpInfo {
  std::string_view name;
  Opcode op;
};

constexpr OpInfo kOps[] = {
    {"NOP", Opcode::kNop},       {"LOADI", Opcode::kLoadi},   {"MOV", Opcode::kMov},
    {"ADD", Opcode::kAdd},       {"SUB", Opcode::kSub},       {"LOADB", Opcode::kLoadb},
    {"STOREB", Opcode::kStoreb}, {"CMPJEQ", Opcode::kCmpjeq}, {"CMPJNE", Opcode::kCmpjne},
    {"CMPJLT", Opcode::kCmpjlt}, {"JMP", Opcode::kJmp},       {"READ", Opcode::kRead},
    {"WRITE", Opcode::kWrite},   {"SEEK", Opcode::kSeek},     {"CKPT", Opcode::kCkpt},
    {"CRASH", Opcode::kCrash},   {"EXIT", Opcode::kExit},
};

[[noreturn]] void Fail(ErrorCode code, size_t line, const std::string& what) {
  throw Error(code, "line " + std::to_string(line) + ": " + what);
}

std::string Upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool IsLabelName(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) {
    return false;
  }
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Drops a trailing ';' comment, ignoring ';' inside a char literal.
std::string_view StripComment(std::string_view line) {
  bool in_char = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_char) {
      if (c == '\\') ++i;
      else if (c == '\'') in_char = false;
    } else if (c == '\'') {
      in_char = true;
    } else if (c == ';') {
      return line.substr(0, i);
    }
  }
  return line;
}

// Splits operands on commas and whitespace, keeping char literals whole.
std::vector<std::string_view> SplitOperands(std::string_view text) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ',' || std::isspace(static_cast<unsigned char>(text[i])))) {
      ++i;
    }
    if (i >= text.size()) break;
    size_t start = i;
    if (text[i] == '\'') {
      ++i;
      while (i < text.size() && text[i] != '\'') {
        if (text[i] == '\\') ++i;
        ++i;
      }
      ++i;
    } else {
      while (i < text.size() && text[i] != ',' &&
             !std::isspace(static_cast<unsigned char>(text[i]))) {
        ++i;
      }
    }
    out.push_back(text.substr(start, std::min(i, text.size()) - start));
  }
  return out;
}

uint8_t ParseRegister(std::string_view tok, size_t line) {
  if (tok.size() < 2 || (tok[0] != 'r' && tok[0] != 'R')) {
    Fail(ErrorCode::kSyntax, line, "expected register, got '" + std::string(tok) + "'");
  }
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    Fail(ErrorCode::kSyntax, line, "bad register '" + std::string(tok) + "'");
  }
  if (value >= kNumRegisters) {
    Fail(ErrorCode::kRegisterOutOfRange, line, "register out of range: " + std::string(tok));
  }
  return static_cast<uint8_t>(value);
}

std::optional<uint32_t> ParseImmediate(std::string_view tok) {
  if (tok.size() >= 3 && tok.front() == '\'' && tok.back() == '\'') {
    std::string_view body = tok.substr(1, tok.size() - 2);
    if (body.size() == 1 && body[0] != '\\') return static_cast<uint8_t>(body[0]);
    if (body.size() == 2 && body[0] == '\\') {
      switch (body[1]) {
        case 'n': return uint32_t{'\n'};
        case 't': return uint32_t{'\t'};
        case '0': return uint32_t{0};
        case '\\': return uint32_t{'\\'};
        case '\'': return uint32_t{'\''};
        default: return std::nullopt;
      }
    }
    return std::nullopt;
  }
  bool negative = false;
  if (!tok.empty() && tok[0] == '-') {
    negative = true;
    tok.remove_prefix(1);
  }
  int base = 10;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    base = 16;
    tok.remove_prefix(2);
  }
  if (tok.empty()) return std::nullopt;
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value, base);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  if (negative) {
    if (value > 0x80000000ULL) return std::nullopt;
    return static_cast<uint32_t>(0u - static_cast<uint32_t>(value));
  }
  if (value > 0xFFFFFFFFULL) return std::nullopt;
  return static_cast<uint32_t>(value);
}

struct PendingLine {
  size_t line;
  Opcode op;
  std::vector<std::string> operands;
};

}  // namespace

std::string_view OpcodeName(Opcode op) {
  for (const OpInfo& info : kOps) {
    if (info.op == op) return info.name;
  }
  return "?";
}

bool IsConditionalJump(Opcode op) {
  return op == Opcode::kCmpjeq || op == Opcode::kCmpjne || op == Opcode::kCmpjlt;
}

bool IsJump(Opcode op) { return IsConditionalJump(op) || op == Opcode::kJmp; }

TargetProgram TargetProgram::FromInstructions(std::vector<Instruction> instructions,
                                              std::string source_name) {
  if (instructions.empty()) {
    throw Error(ErrorCode::kCorruptProgram, "program has no instructions");
  }
  const size_t n = instructions.size();
  if (n > 0xFFFFFFFFULL) throw Error(ErrorCode::kCorruptProgram, "program too large");
  std::set<uint32_t> entries = {0};
  for (size_t i = 0; i < n; ++i) {
    const Instruction& in = instructions[i];
    if (static_cast<uint8_t>(in.opcode) > kMaxOpcode) {
      throw Error(ErrorCode::kCorruptProgram, "bad opcode at " + std::to_string(i));
    }
    if (in.a >= kNumRegisters || in.b >= kNumRegisters) {
      throw Error(ErrorCode::kRegisterOutOfRange, "register out of range at " + std::to_string(i));
    }
    if (IsJump(in.opcode)) {
      if (in.imm >= n) {
        throw Error(ErrorCode::kCorruptProgram, "jump target out of range at " + std::to_string(i));
      }
      entries.insert(in.imm);
    }
    if (IsConditionalJump(in.opcode) && i + 1 < n) entries.insert(static_cast<uint32_t>(i + 1));
    if (in.opcode == Opcode::kSeek && in.imm > 1) {
      throw Error(ErrorCode::kCorruptProgram, "bad seek mode at " + std::to_string(i));
    }
  }

  TargetProgram program;
  program.instructions_ = std::move(instructions);
  program.block_entries_.assign(entries.begin(), entries.end());
  program.source_name_ = std::move(source_name);
  program.block_ordinal_.assign(n, -1);
  program.block_loc_.assign(n, 0);
  for (size_t ordinal = 0; ordinal < program.block_entries_.size(); ++ordinal) {
    uint32_t pc = program.block_entries_[ordinal];
    program.block_ordinal_[pc] = static_cast<int32_t>(ordinal);
    program.block_loc_[pc] = LocId(static_cast<uint32_t>(ordinal));
  }
  return program;
}

uint64_t TargetProgram::Hash() const { return HashBytes(EncodeProgram(*this)); }

TargetProgram Assemble(std::string_view source, std::string source_name) {
  std::map<std::string, uint32_t, std::less<>> labels;
  std::vector<PendingLine> pending;

  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= source.size()) {
    size_t eol = source.find('\n', pos);
    if (eol == std::string_view::npos) eol = source.size();
    std::string_view line = Trim(StripComment(source.substr(pos, eol - pos)));
    pos = eol + 1;
    ++line_no;

    // Any number of leading "label:" prefixes.
    while (true) {
      size_t colon = line.find(':');
      if (colon == std::string_view::npos) break;
      std::string_view name = Trim(line.substr(0, colon));
      if (!IsLabelName(name)) break;
      if (!labels.emplace(std::string(name), static_cast<uint32_t>(pending.size())).second) {
        Fail(ErrorCode::kSyntax, line_no, "duplicate label '" + std::string(name) + "'");
      }
      line = Trim(line.substr(colon + 1));
    }
    if (line.empty()) continue;

    size_t split = 0;
    while (split < line.size() && !std::isspace(static_cast<unsigned char>(line[split]))) ++split;
    std::string mnemonic = Upper(line.substr(0, split));
    auto it = std::find_if(std::begin(kOps), std::end(kOps),
                           [&](const OpInfo& info) { return info.name == mnemonic; });
    if (it == std::end(kOps)) {
      Fail(ErrorCode::kSyntax, line_no, "unknown mnemonic '" + mnemonic + "'");
    }
    PendingLine p{line_no, it->op, {}};
    for (std::string_view tok : SplitOperands(line.substr(split))) p.operands.emplace_back(tok);
    pending.push_back(std::move(p));
  }

  if (pending.empty()) throw Error(ErrorCode::kSyntax, "line 1: empty program");

  auto expect = [](const PendingLine& p, size_t min_count, size_t max_count) {
    if (p.operands.size() < min_count || p.operands.size() > max_count) {
      Fail(ErrorCode::kSyntax, p.line,
           std::string(OpcodeName(p.op)) + " takes " + std::to_string(min_count) +
               (min_count == max_count ? "" : "-" + std::to_string(max_count)) + " operand(s)");
    }
  };
  auto imm = [](const PendingLine& p, const std::string& tok) {
    std::optional<uint32_t> v = ParseImmediate(tok);
    if (!v) Fail(ErrorCode::kSyntax, p.line, "bad immediate '" + tok + "'");
    return *v;
  };
  auto target = [&](const PendingLine& p, const std::string& tok) -> uint32_t {
    if (auto v = ParseImmediate(tok)) {
      if (*v >= pending.size()) {
        Fail(ErrorCode::kSyntax, p.line, "jump target out of range: " + tok);
      }
      return *v;
    }
    auto found = labels.find(tok);
    if (found == labels.end()) {
      if (!IsLabelName(tok)) Fail(ErrorCode::kSyntax, p.line, "bad jump target '" + tok + "'");
      Fail(ErrorCode::kUndefinedLabel, p.line, "undefined label '" + tok + "'");
    }
    if (found->second >= pending.size()) {
      Fail(ErrorCode::kSyntax, p.line, "label '" + tok + "' points past the last instruction");
    }
    return found->second;
  };

  std::vector<Instruction> out;
  out.reserve(pending.size());
  for (const PendingLine& p : pending) {
    Instruction in;
    in.opcode = p.op;
    const auto& ops = p.operands;
    switch (p.op) {
      case Opcode::kNop:
      case Opcode::kCkpt:
      case Opcode::kCrash:
        expect(p, 0, 0);
        break;
      case Opcode::kLoadi:
        expect(p, 2, 2);
        in.a = ParseRegister(ops[0], p.line);
        in.imm = imm(p, ops[1]);
        break;
      case Opcode::kMov:
      case Opcode::kAdd:
      case Opcode::kSub:
      case Opcode::kRead:
      case Opcode::kWrite:
        expect(p, 2, 2);
        in.a = ParseRegister(ops[0], p.line);
        in.b = ParseRegister(ops[1], p.line);
        break;
      case Opcode::kLoadb:
      case Opcode::kStoreb:
        expect(p, 2, 3);
        in.a = ParseRegister(ops[0], p.line);
        in.b = ParseRegister(ops[1], p.line);
        if (ops.size() == 3) in.imm = imm(p, ops[2]);
        break;
      case Opcode::kCmpjeq:
      case Opcode::kCmpjne:
      case Opcode::kCmpjlt:
        expect(p, 3, 3);
        in.a = ParseRegister(ops[0], p.line);
        in.b = ParseRegister(ops[1], p.line);
        in.imm = target(p, ops[2]);
        break;
      case Opcode::kJmp:
        expect(p, 1, 1);
        in.imm = target(p, ops[0]);
        break;
      case Opcode::kSeek: {
        expect(p, 1, 2);
        in.a = ParseRegister(ops[0], p.line);
        if (ops.size() == 2) {
          std::string mode = Upper(ops[1]);
          if (mode == "ABS") in.imm = 0;
          else if (mode == "REL") in.imm = 1;
          else in.imm = imm(p, ops[1]);
          if (in.imm > 1) Fail(ErrorCode::kSyntax, p.line, "seek mode must be 0 or 1");
        }
        break;
      }
      case Opcode::kExit:
        expect(p, 1, 1);
        in.a = ParseRegister(ops[0], p.line);
        break;
    }
    out.push_back(in);
  }
  return TargetProgram::FromInstructions(std::move(out), std::move(source_name));
}

ByteArray EncodeProgram(const TargetProgram& program) {
  ByteWriter w;
  w.Text(kProgramMagic);
  w.U32(kProgramVersion);
  w.U32(static_cast<uint32_t>(program.size()));
  for (const Instruction& in : program.instructions()) {
    w.U8(static_cast<uint8_t>(in.opcode));
    w.U8(in.a);
    w.U8(in.b);
    w.U8(0);
    w.U32(in.imm);
  }
  return w.Take();
}

TargetProgram DecodeProgram(ByteSpan bytes, std::string source_name) {
  ByteReader r(bytes, ErrorCode::kCorruptProgram);
  if (r.Text(4) != kProgramMagic) throw Error(ErrorCode::kCorruptProgram, "bad program magic");
  uint32_t version = r.U32();
  if (version != kProgramVersion) {
    throw Error(ErrorCode::kCorruptProgram, "unsupported program version " + std::to_string(version));
  }
  uint32_t count = r.U32();
  if (r.remaining() != uint64_t{count} * kInstructionSize) {
    throw Error(ErrorCode::kCorruptProgram, "instruction count does not match payload size");
  }
  std::vector<Instruction> instructions(count);
  for (Instruction& in : instructions) {
    uint8_t op = r.U8();
    if (op > kMaxOpcode) throw Error(ErrorCode::kCorruptProgram, "bad opcode " + std::to_string(op));
    in.opcode = static_cast<Opcode>(op);
    in.a = r.U8();
    in.b = r.U8();
    if (r.U8() != 0) throw Error(ErrorCode::kCorruptProgram, "non-zero pad byte");
    in.imm = r.U32();
  }
  try {
    return TargetProgram::FromInstructions(std::move(instructions), std::move(source_name));
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptProgram, e.what());
  }
}

TargetProgram LoadProgramFile(const std::string& path) {
  ByteArray bytes = ReadFileBytes(path);
  if (bytes.size() >= 4 && std::equal(kProgramMagic.begin(), kProgramMagic.end(), bytes.begin())) {
    return DecodeProgram(bytes, path);
  }
  return Assemble(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path);
}

std::string ToString(const RunStatus& status) {
  switch (status.kind) {
    case RunStatus::Kind::kExited: return "Exited(" + std::to_string(status.value) + ")";
    case RunStatus::Kind::kCrashed: return "Crashed(" + std::to_string(status.value) + ")";
    case RunStatus::Kind::kTimedOut: return "TimedOut(" + std::to_string(status.value) + ")";
    case RunStatus::Kind::kCheckpointRequested:
      return "CheckpointRequested(" + std::to_string(status.value) + ")";
  }
  return "?";
}

std::string_view HostCallName(HostCallKind kind) {
  switch (kind) {
    case HostCallKind::kRead: return "read";
    case HostCallKind::kWrite: return "write";
    case HostCallKind::kSeek: return "seek";
  }
  return "?";
}

ByteArray SnapshotState(const VmState& state) {
  ByteWriter w;
  w.buffer().reserve(kSnapshotSize);
  w.U32(state.pc);
  for (uint64_t reg : state.regs) w.U64(reg);
  w.U16(state.prev_loc);
  w.U64(state.steps);
  w.U64(state.input_cursor);
  if (state.halted) {
    w.U8(static_cast<uint8_t>(state.halted->kind));
    w.U64(state.halted->value);
  } else {
    w.U8(0);
    w.U64(0);
  }
  w.Bytes(state.memory);
  return w.Take();
}

VmState RestoreState(ByteSpan bytes) {
  if (bytes.size() != kSnapshotSize) {
    throw Error(ErrorCode::kCorruptState, "state payload is " + std::to_string(bytes.size()) +
                                              " bytes, expected " + std::to_string(kSnapshotSize));
  }
  ByteReader r(bytes, ErrorCode::kCorruptState);
  VmState state;
  state.pc = r.U32();
  for (uint64_t& reg : state.regs) reg = r.U64();
  state.prev_loc = r.U16();
  state.steps = r.U64();
  state.input_cursor = r.U64();
  uint8_t tag = r.U8();
  uint64_t payload = r.U64();
  if (tag == 0) {
    if (payload != 0) throw Error(ErrorCode::kCorruptState, "payload without halt tag");
  } else if (tag <= static_cast<uint8_t>(RunStatus::Kind::kCheckpointRequested)) {
    RunStatus::Kind kind = static_cast<RunStatus::Kind>(tag);
    if (kind == RunStatus::Kind::kExited && payload > 0xFF) {
      throw Error(ErrorCode::kCorruptState, "exit code out of range");
    }
    state.halted = RunStatus{kind, payload};
  } else {
    throw Error(ErrorCode::kCorruptState, "bad halt tag " + std::to_string(tag));
  }
  ByteSpan mem = r.Bytes(kVmMemorySize);
  std::copy(mem.begin(), mem.end(), state.memory.begin());
  return state;
}

StepResult Step(const TargetProgram& program, VmState& state, const ExecIo& io,
                ExecObserver* observer) {
  const uint32_t pc = state.pc;
  if (pc >= program.size()) {
    state.pc = static_cast<uint32_t>(program.size());
    state.halted = RunStatus::Exited(0);
    return StepResult::kExecuted;
  }
  if (program.IsBlockEntry(pc)) {
    const uint16_t cur = program.BlockLoc(pc);
    if (observer != nullptr && !observer->OnEdge(state, cur)) return StepResult::kSuspended;
    state.prev_loc = static_cast<uint16_t>(cur >> 1);
  }

  const Instruction in = program.instructions()[pc];
  auto& r = state.regs;
  uint8_t* mem = state.memory.data();
  uint32_t next = pc + 1;

  switch (in.opcode) {
    case Opcode::kNop:
      break;
    case Opcode::kLoadi:
      r[in.a] = in.imm;
      break;
    case Opcode::kMov:
      r[in.a] = r[in.b];
      break;
    case Opcode::kAdd:
      r[in.a] += r[in.b];
      break;
    case Opcode::kSub:
      r[in.a] -= r[in.b];
      break;
    case Opcode::kLoadb:
      r[in.a] = mem[(r[in.b] + in.imm) & 0xFFFF];
      break;
    case Opcode::kStoreb:
      mem[(r[in.b] + in.imm) & 0xFFFF] = static_cast<uint8_t>(r[in.a]);
      break;
    case Opcode::kCmpjeq:
      if (r[in.a] == r[in.b]) next = in.imm;
      break;
    case Opcode::kCmpjne:
      if (r[in.a] != r[in.b]) next = in.imm;
      break;
    case Opcode::kCmpjlt:
      if (r[in.a] < r[in.b]) next = in.imm;
      break;
    case Opcode::kJmp:
      next = in.imm;
      break;
    case Opcode::kRead: {
      const uint64_t addr = r[in.a];
      const uint64_t want = r[in.b];
      const uint64_t size = io.input.size();
      const uint64_t remaining = state.input_cursor < size ? size - state.input_cursor : 0;
      const uint64_t n = std::min(want, remaining);
      for (uint64_t i = 0; i < n; ++i) {
        mem[(addr + i) & 0xFFFF] = io.input[state.input_cursor + i];
      }
      state.input_cursor += n;
      r[0] = n;
      if (observer != nullptr) {
        observer->OnHostCall(state, {HostCallKind::kRead, want, n, state.steps});
      }
      break;
    }
    case Opcode::kWrite: {
      const uint64_t addr = r[in.a];
      const uint64_t want = r[in.b];
      const uint64_t n = std::min<uint64_t>(want, kVmMemorySize);
      if (io.output != nullptr) {
        for (uint64_t i = 0; i < n; ++i) io.output->push_back(mem[(addr + i) & 0xFFFF]);
      }
      r[0] = n;
      if (observer != nullptr) {
        observer->OnHostCall(state, {HostCallKind::kWrite, want, n, state.steps});
      }
      break;
    }
    case Opcode::kSeek: {
      const uint64_t arg = r[in.a];
      const uint64_t size = io.input.size();
      uint64_t cursor = std::min(state.input_cursor, size);
      if (in.imm == 0) {
        cursor = std::min(arg, size);
      } else {
        const int64_t delta = static_cast<int64_t>(arg);
        if (delta < 0) {
          const uint64_t back = static_cast<uint64_t>(-(delta + 1)) + 1;
          cursor = back > cursor ? 0 : cursor - back;
        } else {
          cursor = static_cast<uint64_t>(delta) > size - cursor ? size : cursor + delta;
        }
      }
      state.input_cursor = cursor;
      if (observer != nullptr) {
        observer->OnHostCall(state, {HostCallKind::kSeek, arg, cursor, state.steps});
      }
      break;
    }
    case Opcode::kCkpt:
      state.halted = RunStatus::CheckpointRequested(pc);
      break;
    case Opcode::kCrash:
      state.halted = RunStatus::Crashed(pc);
      break;
    case Opcode::kExit:
      state.halted = RunStatus::Exited(static_cast<uint8_t>(r[in.a]));
      break;
  }

  ++state.steps;
  if (!state.halted) {
    state.pc = next;
    if (next == program.size()) state.halted = RunStatus::Exited(0);
  }
  return StepResult::kExecuted;
}

ExecEnd Execute(const TargetProgram& program, VmState& state, const ExecIo& io,
                uint64_t max_steps, ExecObserver* observer) {
  for (uint64_t n = 0; n < max_steps; ++n) {
    if (state.halted) return ExecEnd::kHalted;
    if (Step(program, state, io, observer) == StepResult::kSuspended) return ExecEnd::kSuspended;
    if (observer != nullptr && observer->stop_after_step) return ExecEnd::kObserverStop;
  }
  return state.halted ? ExecEnd::kHalted : ExecEnd::kStepBudget;
}

RunStatus Run(const TargetProgram& program, VmState& state, const ExecIo& io,
              uint64_t step_limit, ExecObserver* observer) {
  if (step_limit == 0) throw Error(ErrorCode::kInvalidArgument, "step_limit must be > 0");
  const uint64_t start = state.steps;
  while (true) {
    if (state.halted) return *state.halted;
    const uint64_t used = state.steps - start;
    switch (Execute(program, state, io, step_limit - used, observer)) {
      case ExecEnd::kHalted:
        return *state.halted;
      case ExecEnd::kStepBudget:
        state.halted = RunStatus::TimedOut(step_limit);
        return *state.halted;
      case ExecEnd::kObserverStop:
        observer->stop_after_step = false;
        break;
      case ExecEnd::kSuspended:
        throw Error(ErrorCode::kInvalidArgument, "observer suspended a plain run");
    }
  }
}

void ResumeAfterCheckpoint(const TargetProgram& program, VmState& state) {
  if (!state.halted || state.halted->kind != RunStatus::Kind::kCheckpointRequested) {
    throw Error(ErrorCode::kInvalidArgument, "state is not halted at a checkpoint request");
  }
  state.halted.reset();
  state.pc += 1;
  if (state.pc >= program.size()) {
    state.pc = static_cast<uint32_t>(program.size());
    state.halted = RunStatus::Exited(0);
  }
}

}  // namespace ckfuzz
