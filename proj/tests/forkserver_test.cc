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

#include <gtest/gtest.h>

#include <thread>

#include "ckfuzz/campaign.h"
#include "test_util.h"

namespace ckfuzz {
namespace {

using testing::AssembleShared;
using testing::Bytes;

// CRASH sits at instruction 17 and is reached when the first byte is '!'.
constexpr char kCrashAt17[] =
    "LOADI r1, 0\nLOADI r2, 1\nREAD r1, r2\nLOADB r3, r1, 0\nLOADI r4, '!'\n"
    "CMPJEQ r3, r4, boom\n"
    "NOP\nNOP\nNOP\nNOP\nNOP\nNOP\nNOP\nNOP\nNOP\n"
    "LOADI r0, 0\nEXIT r0\n"
    "boom: CRASH\n";

Session LaunchSource(std::string_view source, ByteArray input = {}) {
  return Session::Launch(AssembleShared(source), HookRegistry{}, std::move(input));
}

TEST(MaybeLogInitTest, NoChannelAborts) {
  Session s = LaunchSource("LOADI r0, 4\nEXIT r0");
  AdvanceResult r = s.Advance(100);
  EXPECT_EQ(r.kind, AdvanceResult::Kind::kHalted);
  EXPECT_EQ(r.status, RunStatus::Exited(4));
  EXPECT_EQ(s.forkserver_mode(), ForkserverMode::kAborted);
  EXPECT_EQ(s.MaybeLogInit(), ForkserverMode::kAborted);
}

TEST(MaybeLogInitTest, FuzzerPresentActivates) {
  Session s = LaunchSource(kCrashAt17);
  ForkserverClient client = AttachInProcess(s);
  EXPECT_EQ(s.forkserver_mode(), ForkserverMode::kActive);
  EXPECT_TRUE(s.serving());
  EXPECT_EQ(s.state().steps, 0u) << "forkserver starts at the first edge";
}

TEST(MaybeLogInitTest, MalformedHelloAborts) {
  Session s = LaunchSource("LOADI r0, 1\nEXIT r0");
  auto point = InProcessControlPoint::Create();
  s.options().control = point->locator();
  auto fuzzer = point->AcceptFuzzer(milliseconds(10));
  fuzzer->Send(ControlMessage::Hello({'N', 'O', 'P', 'E'}));
  AdvanceResult r = s.Advance(100);
  EXPECT_EQ(s.forkserver_mode(), ForkserverMode::kAborted);
  EXPECT_EQ(r.status, RunStatus::Exited(1));
}

TEST(MaybeLogInitTest, SilentFuzzerAborts) {
  Session s = LaunchSource("EXIT r0");
  auto point = InProcessControlPoint::Create();
  s.options().control = point->locator();
  s.options().handshake_timeout = milliseconds(20);
  s.Advance(100);
  EXPECT_EQ(s.forkserver_mode(), ForkserverMode::kAborted);
}

TEST(ServeTest, StatusForExitAndCrash) {
  Session s = LaunchSource(kCrashAt17);
  ForkserverClient client = AttachInProcess(s);
  EXPECT_EQ(client.RunOne(Bytes("a")), RunStatus::Exited(0));
  EXPECT_EQ(client.RunOne(Bytes("!")), RunStatus::Crashed(17));
  EXPECT_EQ(client.tests_run(), 2u);
}

TEST(ServeTest, ParentStateNeverChanges) {
  Session s = LaunchSource(kCrashAt17);
  ForkserverClient client = AttachInProcess(s);
  const uint64_t before = s.StateHash();
  const VmState state_before = s.state();
  for (const char* in : {"a", "!", "", "!!!!", "zz"}) {
    client.RunOne(Bytes(in));
    ASSERT_EQ(s.StateHash(), before);
  }
  EXPECT_EQ(s.state(), state_before);
}

TEST(RunOneTest, EntryEdgeOnlyForExit) {
  Session s = LaunchSource("EXIT r0");
  ForkserverClient client = AttachInProcess(s);
  EXPECT_EQ(client.RunOne({}), RunStatus::Exited(0));
  // One block: the edge (prev 0, cur LocId(0) = 0) lands in slot 0.
  EXPECT_EQ(CountNonZero(client.coverage()), 1u);
  EXPECT_EQ(client.coverage()[0], 1);
  EXPECT_EQ(client.last_exec_steps(), 1u);
}

TEST(RunOneTest, MapsAreDeterministicAndReset) {
  Session s = LaunchSource(kCrashAt17);
  ForkserverClient client = AttachInProcess(s);
  client.RunOne(Bytes("a"));
  CoverageMap first;
  std::copy(client.coverage().begin(), client.coverage().end(), first.slots().begin());
  client.RunOne(Bytes("a"));
  EXPECT_TRUE(std::equal(first.slots().begin(), first.slots().end(), client.coverage().begin()));
  client.RunOne(Bytes("!"));
  EXPECT_FALSE(std::equal(first.slots().begin(), first.slots().end(), client.coverage().begin()));
}

TEST(RunOneTest, StepLimitTimesOut) {
  Session s = LaunchSource("NOP\nL: JMP L");
  s.options().child_step_limit = 500;
  ForkserverClient client = AttachInProcess(s);
  EXPECT_EQ(client.RunOne({}), RunStatus::TimedOut(500));
}

TEST(RunOneTest, TargetLost) {
  auto s = std::make_unique<Session>(LaunchSource("EXIT r0"));
  auto point = InProcessControlPoint::Create();
  s->options().control = point->locator();
  ForkserverClient client = ForkserverClient::Attach(*point, milliseconds(100), [&s] {
    if (s != nullptr) s->Pump();
  });
  EXPECT_EQ(client.RunOne({}), RunStatus::Exited(0));
  s.reset();
  try {
    client.RunOne({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTargetLost);
  }
}

TEST(AttachTest, TargetNeverStarts) {
  auto point = InProcessControlPoint::Create();
  try {
    ForkserverClient::Attach(*point, milliseconds(20), [] {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAttachFailed);
  }
}

TEST(AttachTest, SecondAttachRejected) {
  Session s = LaunchSource("EXIT r0");
  auto point = InProcessControlPoint::Create();
  s.options().control = point->locator();
  ForkserverClient client = ForkserverClient::Attach(*point, milliseconds(100), [&s] { s.Pump(); });
  EXPECT_THROW(ForkserverClient::Attach(*point, milliseconds(10)), Error);
}

TEST(FlagMachineTest, AbortedNeverRetriesUntilReset) {
  Session s = LaunchSource("LOADI r1, 1\nL: CMPJEQ r1, r0, L\nEXIT r0");
  s.Advance(1);
  ASSERT_EQ(s.forkserver_mode(), ForkserverMode::kAborted);
  auto point = InProcessControlPoint::Create();
  s.options().control = point->locator();
  s.Advance(1);
  EXPECT_EQ(s.forkserver_mode(), ForkserverMode::kAborted);
  s.ResetForkserver();
  EXPECT_EQ(s.forkserver_mode(), ForkserverMode::kUninitialized);
  ForkserverClient client = ForkserverClient::Attach(*point, milliseconds(100), [&s] { s.Pump(); });
  EXPECT_EQ(s.forkserver_mode(), ForkserverMode::kActive);
  EXPECT_EQ(client.RunOne({}), RunStatus::Exited(0));
}

TEST(ChildTest, CkptInsideChildContinues) {
  Session s = LaunchSource("NOP\nJMP go\ngo: CKPT\nLOADI r0, 6\nEXIT r0");
  ForkserverClient client = AttachInProcess(s);
  EXPECT_EQ(client.RunOne({}), RunStatus::Exited(6));
}

TEST(ChildTest, PluginCheckpointCallbackHonorsBurst) {
  HookRegistry hooks;
  hooks.Register(MakePlugin("analysis"));
  Session s = Session::Launch(
      AssembleShared("LOADI r2, 1\nREAD r1, r2\nREAD r1, r2\nREAD r1, r2\nEXIT r0"), std::move(hooks),
      {});
  std::vector<uint64_t> hashes;
  s.options().on_child_checkpoint = [&](Session& child, uint64_t hash) {
    hashes.push_back(hash);
    EXPECT_EQ(child.state().input_cursor, 0u);
  };
  ForkserverClient client = AttachInProcess(s);
  EXPECT_EQ(client.RunOne({}), RunStatus::Exited(0));
  // Three unseen prefixes, but one checkpoint per child.
  EXPECT_EQ(hashes.size(), 1u);
  s.options().child_checkpoint_burst = 3;
  client.RunOne({});
  EXPECT_EQ(hashes.size(), 4u);
}

TEST(ScheduleTest, SocketAndLibraryModesAgree) {
  auto program = AssembleShared(kCrashAt17);
  const std::vector<ByteArray> inputs = {Bytes("a"), Bytes("!"), {}, Bytes("!x"), Bytes("b")};

  Session lib = Session::Launch(program, HookRegistry{}, {});
  ForkserverClient lib_client = AttachInProcess(lib);
  std::vector<RunStatus> lib_status;
  for (const auto& in : inputs) lib_status.push_back(lib_client.RunOne(in));

  const std::string sock =
      (std::filesystem::temp_directory_path() / ("ckfs-" + std::to_string(::getpid()) + ".sock")).string();
  UnixControlPoint point(sock, "/ckfs-" + std::to_string(::getpid()));
  Session remote = Session::Launch(program, HookRegistry{}, {});
  remote.options().control = point.locator();
  remote.options().control.point = nullptr;
  std::thread target([&remote] {
    remote.Advance(1000);
    remote.Serve();
  });
  std::vector<RunStatus> sock_status;
  {
    ForkserverClient client = ForkserverClient::Attach(point, milliseconds(2000));
    for (const auto& in : inputs) sock_status.push_back(client.RunOne(in));
  }
  target.join();
  EXPECT_EQ(lib_status, sock_status);
}

TEST(SessionTest, ForkIsIndependent) {
  Session s = LaunchSource(kCrashAt17, Bytes("!"));
  Session copy = s.Fork();
  EXPECT_EQ(copy.Advance(100).status, RunStatus::Crashed(17));
  EXPECT_EQ(s.state().steps, 0u);
  EXPECT_EQ(s.Advance(100).status, RunStatus::Crashed(17));
}

TEST(SessionTest, TraceRecordsEdgesAndCalls) {
  Session s = LaunchSource(kCrashAt17, Bytes("a"));
  std::vector<TraceEvent> trace;
  s.set_trace(&trace);
  s.Advance(100);
  ASSERT_GE(trace.size(), 3u);
  EXPECT_EQ(trace[0].kind, TraceEvent::Kind::kEdge);
  EXPECT_EQ(trace[1].kind, TraceEvent::Kind::kHostCall);
  EXPECT_EQ(trace[1].call.kind, HostCallKind::kRead);
}

}  // namespace
}  // namespace ckfuzz
