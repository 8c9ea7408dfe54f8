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

#include <gtest/gtest.h>

#include <thread>

#include "test_util.h"

namespace ckfuzz {
namespace {

using testing::PutLe;

std::string UniqueName(const std::string& prefix) {
  static int n = 0;
  return prefix + std::to_string(::getpid()) + "-" + std::to_string(n++);
}

TEST(MessageTest, RoundTripsEveryVariant) {
  const ControlMessage messages[] = {
      ControlMessage::Hello(),
      ControlMessage::Go(7, testing::Bytes("abc")),
      ControlMessage::Go(0, {}),
      ControlMessage::Status(RunStatus::Exited(3)),
      ControlMessage::Status(RunStatus::Crashed(17)),
      ControlMessage::Status(RunStatus::TimedOut(1000)),
      ControlMessage::Bye(),
  };
  for (const ControlMessage& m : messages) EXPECT_EQ(DecodeMessage(EncodeMessage(m)), m);
}

TEST(MessageTest, ByteLayout) {
  std::vector<uint8_t> hello = {0, 'F', 'Z', 'R', '1'};
  EXPECT_EQ(EncodeMessage(ControlMessage::Hello()), hello);

  std::vector<uint8_t> go = {1};
  PutLe(go, 0x01020304, 4);
  PutLe(go, 2, 4);
  go.insert(go.end(), {'h', 'i'});
  EXPECT_EQ(EncodeMessage(ControlMessage::Go(0x01020304, testing::Bytes("hi"))), go);

  std::vector<uint8_t> status = {2};
  PutLe(status, 1, 4);
  PutLe(status, 17, 4);
  EXPECT_EQ(EncodeMessage(ControlMessage::Status(RunStatus::Crashed(17))), status);

  EXPECT_EQ(EncodeMessage(ControlMessage::Bye()), std::vector<uint8_t>({3}));
}

TEST(MessageTest, StatusMapping) {
  EXPECT_EQ(ControlMessage::Status(RunStatus::Exited(0)).status_code, 0u);
  EXPECT_EQ(ControlMessage::Status(RunStatus::Crashed(17)).ToRunStatus(), RunStatus::Crashed(17));
  EXPECT_EQ(ControlMessage::Status(RunStatus::TimedOut(500)).ToRunStatus(), RunStatus::TimedOut(500));
  EXPECT_EQ(ControlMessage::Status(RunStatus::Exited(9)).ToRunStatus(), RunStatus::Exited(9));
}

TEST(MessageTest, RejectsMalformed) {
  const std::vector<ByteArray> bad = {
      {}, {9}, {0, 'F', 'Z'}, {1, 0, 0, 0, 0, 5, 0, 0, 0, 'a'}, {3, 0},
  };
  for (const ByteArray& bytes : bad) {
    try {
      DecodeMessage(bytes);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    }
  }
}

TEST(ChannelPairTest, SendReceiveTimeoutClose) {
  auto [a, b] = MakeChannelPair();
  ControlMessage got;
  EXPECT_EQ(b->Receive(got, milliseconds(10)), RecvResult::kTimeout);
  ASSERT_TRUE(a->Send(ControlMessage::Go(1, testing::Bytes("x"))));
  ASSERT_EQ(b->Receive(got, milliseconds(0)), RecvResult::kOk);
  EXPECT_EQ(got, ControlMessage::Go(1, testing::Bytes("x")));
  a->Send(ControlMessage::Bye());
  a->Close();
  EXPECT_EQ(b->Receive(got, milliseconds(0)), RecvResult::kOk);
  EXPECT_EQ(got.kind, ControlMessage::Kind::kBye);
  EXPECT_EQ(b->Receive(got, milliseconds(0)), RecvResult::kClosed);
  EXPECT_FALSE(b->Send(ControlMessage::Bye()));
}

TEST(CoverageRegionTest, SharedMappingIsVisibleToOpener) {
  const std::string name = "/" + UniqueName("ckfuzz-region-");
  auto owner = CoverageRegion::CreateShared(name);
  auto peer = CoverageRegion::OpenShared(name);
  peer->map()[123] = 9;
  peer->set_exec_steps(77);
  EXPECT_EQ(owner->map()[123], 9);
  EXPECT_EQ(owner->exec_steps(), 77u);
  owner->Reset();
  EXPECT_EQ(peer->map()[123], 0);
  EXPECT_EQ(peer->exec_steps(), 0u);
}

TEST(InProcessControlPointTest, SingleTargetSingleFuzzer) {
  auto point = InProcessControlPoint::Create();
  auto target = ConnectTarget(point->locator());
  ASSERT_TRUE(target.has_value());
  EXPECT_EQ(target->coverage, point->coverage());
  EXPECT_FALSE(point->ConnectTarget().has_value());
  auto fuzzer = point->AcceptFuzzer(milliseconds(10));
  ASSERT_NE(fuzzer, nullptr);
  try {
    point->AcceptFuzzer(milliseconds(10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAttachFailed);
  }
  fuzzer->Send(ControlMessage::Hello());
  ControlMessage got;
  EXPECT_EQ(target->channel->Receive(got, milliseconds(0)), RecvResult::kOk);
  EXPECT_EQ(got.magic, kHelloMagic);
}

TEST(UnixControlPointTest, HandshakeOverSocket) {
  const std::string sock = (std::filesystem::temp_directory_path() / (UniqueName("ck-") + ".sock")).string();
  UnixControlPoint point(sock, "/" + UniqueName("ckfuzz-shm-"));
  ControlLocator locator = point.locator();
  EXPECT_EQ(locator.socket_path, sock);

  std::thread target([locator] {
    auto link = ConnectTarget(locator);
    ASSERT_TRUE(link.has_value());
    ControlMessage m;
    ASSERT_EQ(link->channel->Receive(m, milliseconds(2000)), RecvResult::kOk);
    link->coverage->map()[5] = 1;
    link->channel->Send(ControlMessage::Status(RunStatus::Crashed(m.test_id)));
    ASSERT_EQ(link->channel->Receive(m, milliseconds(2000)), RecvResult::kClosed);
  });
  auto fuzzer = point.AcceptFuzzer(milliseconds(2000));
  fuzzer->Send(ControlMessage::Go(42, testing::Bytes("payload")));
  ControlMessage reply;
  ASSERT_EQ(fuzzer->Receive(reply, milliseconds(2000)), RecvResult::kOk);
  EXPECT_EQ(reply.ToRunStatus(), RunStatus::Crashed(42));
  EXPECT_EQ(point.coverage()->map()[5], 1);
  fuzzer->Close();
  target.join();
}

TEST(UnixControlPointTest, AttachTimesOutWithoutTarget) {
  const std::string sock = (std::filesystem::temp_directory_path() / (UniqueName("ck-") + ".sock")).string();
  UnixControlPoint point(sock, "/" + UniqueName("ckfuzz-shm-"));
  const auto start = std::chrono::steady_clock::now();
  try {
    point.AcceptFuzzer(milliseconds(100));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAttachFailed);
  }
  EXPECT_GE(std::chrono::steady_clock::now() - start, milliseconds(90));
}

TEST(ControlLocatorTest, FromEnvironment) {
  ::unsetenv(kControlEnv);
  EXPECT_TRUE(ControlLocator::FromEnvironment().empty());
  ::setenv(kControlEnv, "/tmp/x.sock", 1);
  ::setenv(kShmEnv, "/x", 1);
  ControlLocator l = ControlLocator::FromEnvironment();
  EXPECT_EQ(l.socket_path, "/tmp/x.sock");
  EXPECT_EQ(l.shm_name, "/x");
  ::unsetenv(kControlEnv);
  ::unsetenv(kShmEnv);
  EXPECT_FALSE(ConnectTarget(ControlLocator{}).has_value());
}

}  // namespace
}  // namespace ckfuzz
