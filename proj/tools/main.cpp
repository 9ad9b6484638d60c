// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// acn: dedicated missing-modality segmentation models via adversarial
// co-training. Subcommands: synth, train, eval, entropy-export,
// list-subsets.

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "acn/error.hpp"
#include "cli_commands.hpp"

namespace {

int guard(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const acn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return acn::cli::kExitConfig;
    } catch (const acn::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return acn::cli::kExitData;
    } catch (const acn::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return acn::cli::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return acn::cli::kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dedicated missing-modality MRI segmentation via adversarial co-training"};
    app.require_subcommand(1);

    acn::cli::SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multimodal dataset");
    synth_cmd->add_option("--out", synth.out, "Output dataset directory")->required();
    synth_cmd->add_option("--cases", synth.cases, "Number of cases");
    synth_cmd->add_option("--shape", synth.shape, "Spatial shape, e.g. 64 64 or 32 32 32");
    synth_cmd->add_option("--seed", synth.seed, "Dataset seed");
    synth_cmd->add_option("--noise-std", synth.noise_std, "Intensity noise sigma");
    synth_cmd->add_flag("--force", synth.force, "Overwrite a non-empty output directory");

    acn::cli::TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train one dedicated model for a modality subset");
    train_cmd->add_option("--config", train.config_path, "Key-value config file");
    train_cmd->add_option("--data", train.data, "Dataset directory")->required();
    train_cmd->add_option("--out", train.out, "Checkpoint output directory")->required();
    train_cmd->add_option("--mask", train.mask,
                          "Modality subset: id 1-15 or tokens like fl,t2 from {fl, t1, t1c, t2}");
    train_cmd->add_option("--ablate", train.ablate, "Disable modules: comma list of ena,kna,mmi");
    train_cmd->add_option("--set", train.overrides, "Config overrides as key=value")
        ->type_name("KEY=VALUE");

    acn::cli::EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints (DSC / HD95 per subregion)");
    eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint dir (or parent of per-subset dirs)")
        ->required();
    eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
    eval_cmd->add_option("--out", eval.out, "Report directory (default $ACN_OUT_ROOT/eval)");
    eval_cmd->add_flag("--all-subsets", eval.all_subsets,
                       "Emit one row per modality subset from <ckpt>/<token> checkpoints");

    acn::cli::EntropyExportArgs ee;
    auto* ee_cmd = app.add_subcommand("entropy-export",
                                      "Export entropy maps and segmentations for one case");
    ee_cmd->add_option("--ckpt", ee.ckpt, "Checkpoint directory")->required();
    ee_cmd->add_option("--case", ee.case_dir, "Case directory")->required();
    ee_cmd->add_option("--out", ee.out, "Output directory")->required();

    acn::cli::ListSubsetsArgs ls;
    auto* ls_cmd = app.add_subcommand("list-subsets", "Print the 15 modality subsets and their ids");
    ls_cmd->add_option("--out", ls.out, "Table output directory (default $ACN_OUT_ROOT/subsets)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : acn::cli::kExitConfig;
    }

    if (synth_cmd->parsed()) return guard([&] { return acn::cli::cmd_synth(synth); });
    if (train_cmd->parsed()) return guard([&] { return acn::cli::cmd_train(train); });
    if (eval_cmd->parsed()) return guard([&] { return acn::cli::cmd_eval(eval); });
    if (ee_cmd->parsed()) return guard([&] { return acn::cli::cmd_entropy_export(ee); });
    if (ls_cmd->parsed()) return guard([&] { return acn::cli::cmd_list_subsets(ls); });
    return acn::cli::kExitConfig;
}
