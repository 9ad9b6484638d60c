// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace acn::cli {

// Exit codes shared by every subcommand.
constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;  // eval --all-subsets with absent checkpoints
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct SynthArgs {
    std::string out;
    int cases = 10;
    std::vector<std::int64_t> shape = {64, 64};
    std::uint64_t seed = 0;
    double noise_std = 0.05;
    bool force = false;
};

struct TrainArgs {
    std::string config_path;  // optional kv config file
    std::string data;
    std::string out;
    std::string mask;     // subset id or token pattern; mandatory
    std::string ablate;   // comma list out of {ena, kna, mmi}
    std::vector<std::string> overrides;  // key=value pairs applied over the file
};

struct EvalArgs {
    std::string ckpt;  // checkpoint dir, or parent of per-subset dirs
    std::string data;
    std::string out;   // report dir
    bool all_subsets = false;
};

struct EntropyExportArgs {
    std::string ckpt;
    std::string case_dir;
    std::string out;
};

struct ListSubsetsArgs {
    std::string out;  // optional; defaults under the output root
};

int cmd_synth(const SynthArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_entropy_export(const EntropyExportArgs& args);
int cmd_list_subsets(const ListSubsetsArgs& args);

/// Output root for commands without an explicit --out: $ACN_OUT_ROOT or
/// ./runs.
std::string output_root();

}  // namespace acn::cli
