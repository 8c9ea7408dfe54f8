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


// ckfuzz command line: run, launch, restart-fuzz, fuzz, tree, stats.
//
// Exit codes:
//   run           target exit code; 101 crash; 102 step limit
//   launch        0 image written; 3 no checkpoint reached
//   restart-fuzz  0 done; 4 crash found; 3 bad image; 5 attach timeout
//   fuzz, tree    0 done; 4 crash found (fuzz only)
//   stats         0; 1 when there is nothing to show
//   any           1 usage error; 2 program does not assemble or decode

#ifndef CKFUZZ_TOOLS_CLI_H_
#define CKFUZZ_TOOLS_CLI_H_

#include <ostream>

namespace ckfuzz {

inline constexpr int kExitUsage = 1;
inline constexpr int kExitBadProgram = 2;
inline constexpr int kExitNoCheckpoint = 3;
inline constexpr int kExitBadImage = 3;
inline constexpr int kExitCrashFound = 4;
inline constexpr int kExitAttachTimeout = 5;
inline constexpr int kExitTargetCrashed = 101;
inline constexpr int kExitTargetTimedOut = 102;

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ckfuzz

#endif  // CKFUZZ_TOOLS_CLI_H_
