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


#include "cli.h"

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ckfuzz/campaign.h"
#include "ckfuzz/checkpoint.h"
#include "ckfuzz/common.h"
#include "ckfuzz/control.h"
#include "ckfuzz/forkserver.h"
#include "ckfuzz/hooks.h"
#include "ckfuzz/target_vm.h"
#include "ckfuzz/tree.h"

namespace ckfuzz {
namespace {

namespace fs = std::filesystem;

struct FuzzFlags {
  std::string seeds_dir;
  std::string out_dir;
  uint64_t budget = 100'000;
  uint64_t rng_seed = 0;
  uint32_t havoc_ops = 16;
  uint64_t time_budget_ms = 0;
  uint64_t step_limit = 10'000'000;
  uint64_t attach_timeout_ms = kDefaultAttachTimeout.count();
  bool in_process = false;
};

void AddFuzzFlags(CLI::App* cmd, FuzzFlags& f) {
  cmd->add_option("--seeds", f.seeds_dir, "Directory of seed inputs")->required();
  cmd->add_option("--out", f.out_dir, "Output directory")->required();
  cmd->add_option("--budget", f.budget, "Executions to run")->check(CLI::PositiveNumber);
  cmd->add_option("--rng-seed", f.rng_seed, "Mutator seed");
  cmd->add_option("--havoc-ops", f.havoc_ops, "Max stacked havoc operations")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--time-budget-ms", f.time_budget_ms, "Stop after this much wall time (0: off)");
  cmd->add_option("--step-limit", f.step_limit, "Per-test step limit")->check(CLI::PositiveNumber);
  cmd->add_option("--attach-timeout-ms", f.attach_timeout_ms, "Forkserver attach timeout");
  cmd->add_flag("--in-process", f.in_process, "Drive the target synchronously, no socket");
}

FuzzOptions ToFuzzOptions(const FuzzFlags& f) {
  FuzzOptions o;
  o.budget = f.budget;
  o.rng_seed = f.rng_seed;
  o.havoc_ops = f.havoc_ops;
  if (f.time_budget_ms > 0) o.time_budget = std::chrono::milliseconds(f.time_budget_ms);
  return o;
}

std::shared_ptr<const TargetProgram> LoadProgram(const std::string& path) {
  return std::make_shared<const TargetProgram>(LoadProgramFile(path));
}

bool IsProgramError(ErrorCode code) {
  return code == ErrorCode::kSyntax || code == ErrorCode::kUndefinedLabel ||
         code == ErrorCode::kRegisterOutOfRange || code == ErrorCode::kCorruptProgram;
}

bool IsImageError(ErrorCode code) {
  return code == ErrorCode::kNotAnImage || code == ErrorCode::kUnsupportedVersion ||
         code == ErrorCode::kCorruptImage || code == ErrorCode::kProgramMismatch;
}

ByteArray ReadOptionalInput(const std::string& path) {
  return path.empty() ? ByteArray{} : ReadFileBytes(path);
}

std::vector<ByteArray> LoadSeedsOrFail(const std::string& dir) {
  std::vector<ByteArray> seeds = LoadSeeds(dir);
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "no seeds in " + dir);
  return seeds;
}

// Attaches to `session` in socket mode (the target runs on its own thread
// and finds the fuzzer through FZ_CTRL/FZ_SHM) or in-process, fuzzes, and
// shuts the target down.
CampaignResult FuzzSession(Session& session, const std::vector<ByteArray>& seeds,
                           const FuzzFlags& flags) {
  session.options().child_step_limit = flags.step_limit;
  const FuzzOptions options = ToFuzzOptions(flags);
  const std::chrono::milliseconds timeout(flags.attach_timeout_ms);
  VirginMap virgin;

  if (flags.in_process) {
    ForkserverClient client = AttachInProcess(session, timeout);
    CampaignResult result = FuzzLoop(client, seeds, virgin, options);
    client.Close();
    return result;
  }

  static std::atomic<int> counter{0};
  const std::string tag = std::to_string(::getpid()) + "-" + std::to_string(counter++);
  UnixControlPoint point((fs::temp_directory_path() / ("ckfuzz-" + tag + ".sock")).string(),
                         "/ckfuzz-" + tag);
  ::setenv(kControlEnv, point.locator().socket_path.c_str(), 1);
  ::setenv(kShmEnv, point.locator().shm_name.c_str(), 1);
  session.options().control = ControlLocator::FromEnvironment();
  session.options().handshake_timeout = timeout;

  std::thread target([&session, limit = flags.step_limit] {
    try {
      while (session.Advance(limit).kind == AdvanceResult::Kind::kCheckpoint) {
      }
      if (session.serving()) session.Serve();
    } catch (const Error&) {
      // The fuzzer side reports the lost target.
    }
  });
  struct Joiner {
    std::thread& t;
    ~Joiner() {
      if (t.joinable()) t.join();
    }
  } joiner{target};

  ForkserverClient client = ForkserverClient::Attach(point, timeout);
  CampaignResult result = FuzzLoop(client, seeds, virgin, options);
  client.Close();
  return result;
}

int ReportCampaign(const CampaignResult& result, const std::string& out_dir, std::ostream& out) {
  WriteCampaignOutput(result, out_dir);
  const CampaignStats& s = result.stats;
  out << "execs=" << s.execs << " execs_per_sec=" << s.execs_per_sec
      << " edges_found=" << s.edges_found << " queue_len=" << s.queue_len
      << " crashes_unique=" << s.crashes_unique << "\n";
  return result.crashes.empty() ? 0 : kExitCrashFound;
}

int CmdRun(const std::string& program_path, const std::string& input_path, bool trace,
           uint64_t step_limit, std::ostream& out) {
  auto program = LoadProgram(program_path);
  Session session = Session::Launch(program, HookRegistry{}, ReadOptionalInput(input_path));
  session.set_capture_output(true);
  std::vector<TraceEvent> events;
  if (trace) session.set_trace(&events);
  session.options().control = ControlLocator::FromEnvironment();

  RunStatus status;
  uint64_t used = 0;
  while (true) {
    const uint64_t before = session.state().steps;
    AdvanceResult r = session.Advance(step_limit - used);
    used += session.state().steps - before;
    if (r.kind == AdvanceResult::Kind::kHalted) {
      status = r.status;
      break;
    }
    if (r.kind == AdvanceResult::Kind::kServing) {
      session.Serve();
      return 0;
    }
    if (used >= step_limit) {
      status = RunStatus::TimedOut(step_limit);
      break;
    }
  }
  out.write(reinterpret_cast<const char*>(session.output().data()),
            static_cast<std::streamsize>(session.output().size()));
  if (trace) {
    for (const TraceEvent& e : events) {
      if (e.kind != TraceEvent::Kind::kHostCall) continue;
      out << "[trace] step=" << e.call.step_at << " " << HostCallName(e.call.kind)
          << " arg=" << e.call.length_or_offset << " result=" << e.call.result << "\n";
    }
    out << "[trace] " << ToString(status) << "\n";
  }
  switch (status.kind) {
    case RunStatus::Kind::kExited: return static_cast<int>(status.value);
    case RunStatus::Kind::kCrashed: return kExitTargetCrashed;
    default: return kExitTargetTimedOut;
  }
}

int CmdLaunch(const std::string& program_path, const std::string& input_path,
              const std::vector<std::string>& plugins, const std::string& ckpt_out,
              uint64_t step_limit, std::ostream& out, std::ostream& err) {
  auto program = LoadProgram(program_path);
  HookRegistry hooks;
  for (const std::string& spec : plugins) hooks.Register(MakePlugin(spec));
  Session session = Session::Launch(program, std::move(hooks), ReadOptionalInput(input_path));
  session.options().control = ControlLocator::FromEnvironment();

  AdvanceResult r = session.Advance(step_limit);
  if (r.kind != AdvanceResult::Kind::kCheckpoint) {
    err << "no checkpoint reached";
    if (r.kind == AdvanceResult::Kind::kHalted) err << " (" << ToString(r.status) << ")";
    if (r.kind == AdvanceResult::Kind::kStepBudget) err << " within " << step_limit << " steps";
    err << "\n";
    return kExitNoCheckpoint;
  }
  CheckpointImage image = TakeCheckpoint(session, r.pattern_hash, 0);
  WriteImage(image, ckpt_out);
  out << "checkpoint written to " << ckpt_out << " at pc=" << session.state().pc
      << " steps=" << session.state().steps << " pattern=" << Hex64(r.pattern_hash)
      << " forkserver=" << ForkserverModeName(session.forkserver_mode()) << "\n";
  return 0;
}

int CmdRestartFuzz(const std::string& image_path, const std::string& program_path,
                   const FuzzFlags& flags, bool no_reset, std::ostream& out) {
  auto program = LoadProgram(program_path);
  const std::vector<ByteArray> seeds = LoadSeedsOrFail(flags.seeds_dir);
  CheckpointImage image = ReadImage(image_path);
  RestoreOptions restore;
  restore.fuzzer_attach = true;
  if (!no_reset) restore.extra_plugins.push_back(MakePlugin("reset"));
  Session session = Restore(image, program, std::move(restore));
  return ReportCampaign(FuzzSession(session, seeds, flags), flags.out_dir, out);
}

int CmdFuzz(const std::string& program_path, const FuzzFlags& flags, std::ostream& out) {
  auto program = LoadProgram(program_path);
  const std::vector<ByteArray> seeds = LoadSeedsOrFail(flags.seeds_dir);
  Session session = Session::Launch(program, HookRegistry{}, {}, std::string(kFuzzerBinding));
  return ReportCampaign(FuzzSession(session, seeds, flags), flags.out_dir, out);
}

int CmdTree(const std::string& image_path, const std::string& program_path,
            const std::string& seeds_dir, const TreeOptions& options, std::ostream& out) {
  auto program = LoadProgram(program_path);
  const std::vector<ByteArray> seeds = LoadSeedsOrFail(seeds_dir);
  TreeManifest manifest = TreeRun(program, image_path, seeds, options);
  for (const TreeNode& n : manifest.nodes) {
    out << "node " << n.node_id << " parent=" << (n.parent ? std::to_string(*n.parent) : "-")
        << " pattern=" << Hex64(n.pattern_hash) << " execs=" << n.stats.execs
        << " edges=" << n.stats.edges_found << " crashes=" << n.stats.crashes_unique
        << (n.failed ? " FAILED " + n.error : "") << "\n";
  }
  out << manifest.nodes.size() << " nodes, manifest at "
      << (options.out_dir / "tree.json").string() << "\n";
  return 0;
}

int CmdStats(const std::string& dir, const std::string& dat_path, std::ostream& out,
             std::ostream& err) {
  std::ifstream in(fs::path(dir) / "stats.csv");
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (rows.size() < 2) {
    err << "no stats in " << dir << "\n";
    return kExitUsage;
  }
  std::vector<size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << std::string(width[i] - row[i].size(), ' ') << row[i]
          << (i + 1 < row.size() ? "  " : "\n");
    }
  }
  if (!dat_path.empty()) {
    std::ofstream dat(dat_path, std::ios::trunc);
    if (!dat) throw Error(ErrorCode::kIo, "cannot write " + dat_path);
    for (size_t r = 0; r < rows.size(); ++r) {
      if (r == 0) dat << "# ";
      for (size_t i = 0; i < rows[r].size(); ++i) dat << rows[r][i] << (i + 1 < rows[r].size() ? " " : "\n");
    }
  }
  return 0;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ckfuzz: checkpoint/restore fuzzing over a deterministic VM", "ckfuzz"};
  app.require_subcommand(1);

  std::string program, input, image, ckpt_out, dir, dat;
  bool trace = false;
  bool no_reset = false;
  uint64_t run_limit = 10'000'000;
  uint64_t launch_limit = 1'000'000'000;
  std::vector<std::string> plugins;
  FuzzFlags fuzz_flags;
  TreeOptions tree;
  std::string tree_seeds;
  std::string tree_out;

  CLI::App* run = app.add_subcommand("run", "Run a program on an input");
  run->add_option("program", program, "Program (.fza text or .fzb binary)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--input", input, "Input stream file")->check(CLI::ExistingFile);
  run->add_flag("--trace", trace, "Print host calls");
  run->add_option("--step-limit", run_limit, "Step limit")->check(CLI::PositiveNumber);

  CLI::App* launch = app.add_subcommand("launch", "Run until the first checkpoint and save it");
  launch->add_option("program", program)->required()->check(CLI::ExistingFile);
  launch->add_option("--input", input, "Launch-phase input")->check(CLI::ExistingFile);
  launch->add_option("--plugin", plugins, "Plugin specifier (repeatable)");
  launch->add_option("--ckpt-out", ckpt_out, "Image path")->required();
  launch->add_option("--step-limit", launch_limit, "Step limit")->check(CLI::PositiveNumber);

  CLI::App* restart = app.add_subcommand("restart-fuzz", "Restore an image and fuzz from it");
  restart->add_option("image", image)->required()->check(CLI::ExistingFile);
  restart->add_option("program", program)->required()->check(CLI::ExistingFile);
  restart->add_flag("--no-reset", no_reset, "Do not add the reset plugin");
  AddFuzzFlags(restart, fuzz_flags);

  CLI::App* fuzz = app.add_subcommand("fuzz", "Fuzz from program start");
  fuzz->add_option("program", program)->required()->check(CLI::ExistingFile);
  AddFuzzFlags(fuzz, fuzz_flags);

  CLI::App* tree_cmd = app.add_subcommand("tree", "Fuzz the execution state tree");
  tree_cmd->add_option("image", image)->required()->check(CLI::ExistingFile);
  tree_cmd->add_option("program", program)->required()->check(CLI::ExistingFile);
  tree_cmd->add_option("--seeds", tree_seeds)->required();
  tree_cmd->add_option("--out", tree_out)->required();
  tree_cmd->add_option("--workers", tree.workers)->check(CLI::PositiveNumber);
  tree_cmd->add_option("--max-nodes", tree.max_nodes)->check(CLI::PositiveNumber);
  tree_cmd->add_option("--node-budget", tree.node_budget)->check(CLI::PositiveNumber);
  tree_cmd->add_option("--rng-seed", tree.rng_seed);
  tree_cmd->add_option("--havoc-ops", tree.havoc_ops)->check(CLI::PositiveNumber);

  CLI::App* stats = app.add_subcommand("stats", "Render stats.csv");
  stats->add_option("dir", dir, "Campaign output directory")->required();
  stats->add_option("--dat", dat, "Also write a gnuplot-ready .dat");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return CmdRun(program, input, trace, run_limit, out);
    if (*launch) return CmdLaunch(program, input, plugins, ckpt_out, launch_limit, out, err);
    if (*restart) return CmdRestartFuzz(image, program, fuzz_flags, no_reset, out);
    if (*fuzz) return CmdFuzz(program, fuzz_flags, out);
    if (*tree_cmd) {
      tree.out_dir = tree_out;
      return CmdTree(image, program, tree_seeds, tree, out);
    }
    if (*stats) return CmdStats(dir, dat, out, err);
  } catch (const Error& e) {
    err << "error (" << ErrorCodeName(e.code()) << "): " << e.what() << "\n";
    if (IsProgramError(e.code())) return kExitBadProgram;
    if (IsImageError(e.code())) return kExitBadImage;
    if (e.code() == ErrorCode::kAttachFailed) return kExitAttachTimeout;
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace ckfuzz
