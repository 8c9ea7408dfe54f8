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

#include <gtest/gtest.h>

#include <random>

#include "ckfuzz/coverage.h"
#include "test_util.h"

namespace ckfuzz {
namespace {

using testing::Bytes;
using testing::RecordingObserver;

RunStatus RunSource(std::string_view source, ByteSpan input, VmState* out = nullptr,
                    uint64_t limit = 100000) {
  TargetProgram program = Assemble(source);
  VmState state;
  RunStatus status = ckfuzz::Run(program, state, ExecIo{input, nullptr}, limit);
  if (out != nullptr) *out = state;
  return status;
}

TEST(AssembleTest, SingleExit) {
  TargetProgram p = Assemble("EXIT r0");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p.block_entries(), std::vector<uint32_t>({0}));
  EXPECT_EQ(p.instructions()[0], (Instruction{Opcode::kExit, 0, 0, 0}));
}

TEST(AssembleTest, JumpTargetStartsBlock) {
  TargetProgram p = Assemble("JMP L\nL: EXIT r0");
  EXPECT_EQ(p.block_entries(), std::vector<uint32_t>({0, 1}));
}

TEST(AssembleTest, ConditionalFallthroughStartsBlock) {
  TargetProgram p = Assemble(
      "NOP\nNOP\nNOP\n"
      "CMPJEQ r0, r1, L\n"
      "NOP\nNOP\nNOP\n"
      "L: EXIT r0\n");
  const auto& entries = p.block_entries();
  for (uint32_t pc : {0u, 4u, 7u}) {
    EXPECT_NE(std::find(entries.begin(), entries.end(), pc), entries.end()) << pc;
  }
  EXPECT_TRUE(std::is_sorted(entries.begin(), entries.end()));
}

TEST(AssembleTest, OperandForms) {
  TargetProgram p = Assemble(
      "start: LOADI r1, 0x10   ; hex\n"
      "LOADI r2 'a'\n"
      "LOADI r3, ';'\n"
      "LOADI r4, -1\n"
      "SEEK r1, rel\n"
      "LOADB r5, r1\n"
      "JMP start\n");
  EXPECT_EQ(p.instructions()[0].imm, 0x10u);
  EXPECT_EQ(p.instructions()[1].imm, static_cast<uint32_t>('a'));
  EXPECT_EQ(p.instructions()[2].imm, static_cast<uint32_t>(';'));
  EXPECT_EQ(p.instructions()[3].imm, 0xFFFFFFFFu);
  EXPECT_EQ(p.instructions()[4].imm, 1u);
  EXPECT_EQ(p.instructions()[5].imm, 0u);
  EXPECT_EQ(p.instructions()[6].imm, 0u);
}

TEST(AssembleTest, Errors) {
  try {
    Assemble("NOP\nBOGUS r1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSyntax);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  try {
    Assemble("JMP nowhere\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefinedLabel);
  }
  try {
    Assemble("LOADI r8, 1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRegisterOutOfRange);
  }
  EXPECT_THROW(Assemble("JMP 5\nEXIT r0"), Error);
}

TEST(ProgramFormatTest, EncodeLayout) {
  TargetProgram p = Assemble("LOADI r1, 0x01020304\nEXIT r1");
  std::vector<uint8_t> expected = {'F', 'Z', 'B', 'C'};
  testing::PutLe(expected, 1, 4);
  testing::PutLe(expected, 2, 4);
  expected.insert(expected.end(), {1, 1, 0, 0, 0x04, 0x03, 0x02, 0x01});
  expected.insert(expected.end(), {16, 1, 0, 0, 0, 0, 0, 0});
  EXPECT_EQ(EncodeProgram(p), expected);
  TargetProgram back = DecodeProgram(expected);
  EXPECT_EQ(back.instructions(), p.instructions());
  EXPECT_EQ(back.block_entries(), p.block_entries());
}

TEST(ProgramFormatTest, RejectsMalformed) {
  ByteArray good = EncodeProgram(Assemble("EXIT r0"));
  ByteArray bad_magic = good;
  bad_magic[0] = 'X';
  ByteArray short_body(good.begin(), good.end() - 1);
  ByteArray bad_opcode = good;
  bad_opcode[12] = 99;
  ByteArray bad_pad = good;
  bad_pad[15] = 1;
  for (const ByteArray& bytes : {bad_magic, short_body, bad_opcode, bad_pad}) {
    try {
      DecodeProgram(bytes);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCorruptProgram);
    }
  }
}

TEST(StepTest, ReadOnEmptyInputIsShortRead) {
  VmState s;
  RunSource("LOADI r1, 100\nLOADI r2, 8\nREAD r1, r2\nEXIT r0", {}, &s);
  EXPECT_EQ(s.regs[0], 0u);
  EXPECT_EQ(s.input_cursor, 0u);
}

TEST(StepTest, SeekAbsolute) {
  VmState s;
  ByteArray input(10, 0);
  RunSource("LOADI r1, 3\nSEEK r1, 0\nEXIT r0", input, &s);
  EXPECT_EQ(s.input_cursor, 3u);
}

TEST(StepTest, SeekClamps) {
  VmState s;
  ByteArray input(10, 0);
  RunSource("LOADI r1, 50\nSEEK r1, abs\nEXIT r0", input, &s);
  EXPECT_EQ(s.input_cursor, 10u);
  // Negative relative offsets need a full 64-bit register value.
  RunSource("LOADI r1, 4\nSEEK r1, abs\nLOADI r1, 0\nLOADI r2, 6\nSUB r1, r2\nSEEK r1, rel\nEXIT r0",
            input, &s);
  EXPECT_EQ(s.input_cursor, 0u);
  RunSource("LOADI r1, 4\nSEEK r1, abs\nLOADI r1, 0\nLOADI r2, 2\nSUB r1, r2\nSEEK r1, rel\nEXIT r0",
            input, &s);
  EXPECT_EQ(s.input_cursor, 2u);
  // LOADI zero-extends, so -2 is a large positive delta.
  RunSource("LOADI r1, 4\nSEEK r1, abs\nLOADI r1, -2\nSEEK r1, rel\nEXIT r0", input, &s);
  EXPECT_EQ(s.input_cursor, 10u);
}

TEST(StepTest, ReadCopiesBytes) {
  VmState s;
  RunSource("LOADI r1, 100\nLOADI r2, 2\nREAD r1, r2\nEXIT r0", Bytes("AB"), &s);
  EXPECT_EQ(s.memory[100], 0x41);
  EXPECT_EQ(s.memory[101], 0x42);
  EXPECT_EQ(s.regs[0], 2u);
  EXPECT_EQ(s.input_cursor, 2u);
}

TEST(StepTest, ArithmeticAndMemoryWrap) {
  VmState s;
  RunSource(
      "LOADI r1, 0\nLOADI r2, 1\nSUB r1, r2\n"   // r1 = 2^64 - 1
      "LOADI r3, 0x1FF\nLOADI r4, 0xFFFF\n"
      "STOREB r3, r4, 2\n"                      // memory[1] = 0xFF
      "LOADB r5, r4, 2\nEXIT r5",
      {}, &s);
  EXPECT_EQ(s.regs[1], ~uint64_t{0});
  EXPECT_EQ(s.memory[1], 0xFF);
  EXPECT_EQ(s.regs[5], 0xFFu);
  EXPECT_EQ(s.halted, RunStatus::Exited(0xFF));
}

TEST(StepTest, WriteGoesToOutput) {
  TargetProgram p = Assemble("LOADI r1, 7\nLOADI r2, 'z'\nSTOREB r2, r1\nLOADI r3, 1\nWRITE r1, r3\nEXIT r0");
  VmState s;
  ByteArray out;
  ckfuzz::Run(p, s, ExecIo{{}, &out}, 100);
  EXPECT_EQ(out, Bytes("z"));
  EXPECT_EQ(s.regs[0], 1u);
}

TEST(RunTest, ExitAndTimeout) {
  EXPECT_EQ(RunSource("EXIT r0", {}), RunStatus::Exited(0));
  EXPECT_EQ(RunSource("L: JMP L", {}, nullptr, 1000), RunStatus::TimedOut(1000));
  EXPECT_EQ(RunSource("NOP\nCRASH", {}), RunStatus::Crashed(1));
  EXPECT_EQ(RunSource("NOP", {}), RunStatus::Exited(0));
  TargetProgram p = Assemble("EXIT r0");
  VmState s;
  EXPECT_THROW(ckfuzz::Run(p, s, {}, 0), Error);
}

TEST(RunTest, FiveReadsThenCheckpoint) {
  TargetProgram p = Assemble(
      "LOADI r1, 0\nLOADI r2, 1\n"
      "READ r1, r2\nREAD r1, r2\nREAD r1, r2\nREAD r1, r2\nREAD r1, r2\n"
      "CKPT\nEXIT r0");
  VmState s;
  RecordingObserver obs;
  RunStatus status = ckfuzz::Run(p, s, ExecIo{Bytes("12345"), nullptr}, 1000, &obs);
  EXPECT_EQ(status, RunStatus::CheckpointRequested(7));
  int reads = 0;
  for (const auto& e : obs.events) reads += !e.edge && e.call.kind == HostCallKind::kRead;
  EXPECT_EQ(reads, 5);
  ResumeAfterCheckpoint(p, s);
  EXPECT_EQ(s.pc, 8u);
  EXPECT_FALSE(s.halted);
  EXPECT_EQ(ckfuzz::Run(p, s, {}, 1000), RunStatus::Exited(1)) << "r0 holds the last read count";
}

TEST(RunTest, EdgesFireAtBlockEntries) {
  TargetProgram p = Assemble("LOADI r1, 1\nCMPJEQ r0, r1, L\nNOP\nL: EXIT r0");
  VmState s;
  RecordingObserver obs;
  ckfuzz::Run(p, s, {}, 100, &obs);
  std::vector<uint16_t> locs;
  for (const auto& e : obs.events) locs.push_back(e.loc);
  // Entry block, the fallthrough block, then L.
  EXPECT_EQ(locs, std::vector<uint16_t>({p.BlockLoc(0), p.BlockLoc(2), p.BlockLoc(3)}));
  EXPECT_EQ(p.BlockLoc(2), ckfuzz::LocId(1));
  EXPECT_EQ(s.prev_loc, p.BlockLoc(3) >> 1);
}

TEST(RunTest, Deterministic) {
  auto program = testing::LoadTarget("five_read.fza");
  VmState a, b;
  RecordingObserver oa, ob;
  ckfuzz::Run(*program, a, ExecIo{Bytes("hello world")}, 1000, &oa);
  ckfuzz::Run(*program, b, ExecIo{Bytes("hello world")}, 1000, &ob);
  EXPECT_EQ(a, b);
  EXPECT_EQ(oa.events, ob.events);
}

TEST(SnapshotTest, FreshRoundTrip) {
  VmState s;
  ByteArray bytes = SnapshotState(s);
  EXPECT_EQ(bytes.size(), kSnapshotSize);
  EXPECT_EQ(RestoreState(bytes), s);
  EXPECT_EQ(SnapshotState(RestoreState(bytes)), bytes);
}

TEST(SnapshotTest, RandomStepsRoundTrip) {
  std::mt19937_64 rng(7);
  std::string src;
  for (int i = 0; i < 60; ++i) {
    switch (rng() % 6) {
      case 0: src += "LOADI r" + std::to_string(rng() % 8) + ", " + std::to_string(rng() % 100000) + "\n"; break;
      case 1: src += "ADD r" + std::to_string(rng() % 8) + ", r" + std::to_string(rng() % 8) + "\n"; break;
      case 2: src += "STOREB r" + std::to_string(rng() % 8) + ", r" + std::to_string(rng() % 8) + ", " + std::to_string(rng() % 65536) + "\n"; break;
      case 3: src += "READ r" + std::to_string(rng() % 8) + ", r" + std::to_string(rng() % 8) + "\n"; break;
      case 4: src += "SUB r" + std::to_string(rng() % 8) + ", r" + std::to_string(rng() % 8) + "\n"; break;
      default: src += "LOADB r" + std::to_string(rng() % 8) + ", r" + std::to_string(rng() % 8) + "\n"; break;
    }
  }
  src += "JMP 0\n";
  TargetProgram p = Assemble(src);
  ByteArray input(300);
  for (auto& b : input) b = static_cast<uint8_t>(rng());
  VmState s;
  ckfuzz::Run(p, s, ExecIo{input}, 1000);
  EXPECT_EQ(s.steps, 1000u);
  EXPECT_EQ(RestoreState(SnapshotState(s)), s);
}

TEST(SnapshotTest, Layout) {
  VmState s;
  s.pc = 0x01020304;
  s.regs[7] = 0x1122334455667788ULL;
  s.prev_loc = 0xABCD;
  s.steps = 5;
  s.input_cursor = 6;
  s.halted = RunStatus::Crashed(9);
  s.memory[0] = 0xEE;
  std::vector<uint8_t> expected;
  testing::PutLe(expected, s.pc, 4);
  for (uint64_t r : s.regs) testing::PutLe(expected, r, 8);
  testing::PutLe(expected, s.prev_loc, 2);
  testing::PutLe(expected, s.steps, 8);
  testing::PutLe(expected, s.input_cursor, 8);
  expected.push_back(2);
  testing::PutLe(expected, 9, 8);
  expected.insert(expected.end(), s.memory.begin(), s.memory.end());
  EXPECT_EQ(SnapshotState(s), expected);
}

TEST(SnapshotTest, TruncatedIsCorrupt) {
  ByteArray bytes = SnapshotState(VmState{});
  bytes.pop_back();
  try {
    RestoreState(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptState);
  }
  ByteArray longer = SnapshotState(VmState{});
  longer.push_back(0);
  EXPECT_THROW(RestoreState(longer), Error);
}

}  // namespace
}  // namespace ckfuzz
