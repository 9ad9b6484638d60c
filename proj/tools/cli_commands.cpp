// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "acn/dataset.hpp"
#include "acn/error.hpp"
#include "acn/hash.hpp"
#include "acn/kvtext.hpp"
#include "acn/nifti.hpp"
#include "acn/pgm.hpp"
#include "acn/synth.hpp"
#include "acn/trainer.hpp"

namespace fs = std::filesystem;

namespace acn::cli {

namespace {

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::vector<std::string> collect_outputs(const std::string& out_dir) {
    std::vector<std::string> rel;
    for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string r = fs::relative(entry.path(), out_dir).string();
        if (r == "run_manifest.kv") continue;
        rel.push_back(std::move(r));
    }
    return rel;
}

/// Every command ends by writing exactly one manifest describing what ran
/// and hashing what it produced (the manifest itself is excluded).
void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const KvDoc& config, std::uint64_t seed, const std::string& started) {
    KvDoc m;
    m.set("manifest.command", command);
    m.set_int("manifest.seed", std::int64_t(seed));
    m.set("manifest.started", started);
    m.set("manifest.finished", iso_now());
    for (const auto& [k, v] : config.entries()) m.set("manifest.config." + k, v);
    auto outputs = collect_outputs(out_dir);
    std::sort(outputs.begin(), outputs.end());
    m.set_int("manifest.outputs.count", std::int64_t(outputs.size()));
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        char key[48];
        std::snprintf(key, sizeof(key), "manifest.outputs.%04zu", i);
        m.set(key, outputs[i]);
    }
    m.set("manifest.artifact_hash", hash_artifact(out_dir, outputs));
    m.save(out_dir + "/run_manifest.kv");
}

ModalityMask parse_mask_arg(const std::string& text) {
    if (text.empty())
        throw ConfigError("--mask is mandatory: give a subset id (1-15) or tokens like \"fl,t2\" "
                          "from {fl, t1, t1c, t2}");
    bool digits = true;
    for (char c : text) digits = digits && std::isdigit(static_cast<unsigned char>(c));
    if (digits) return subset_from_id(std::stoi(text));
    return ModalityMask::parse(text);
}

std::string resolve_checkpoint_dir(const std::string& path) {
    if (fs::exists(path + "/manifest.kv")) return path;
    if (fs::exists(path + "/best/manifest.kv")) return path + "/best";
    if (fs::exists(path + "/last/manifest.kv")) return path + "/last";
    throw DataError("no checkpoint found at " + path + " (looked for manifest.kv, best/, last/)");
}

struct SubsetEvalRow {
    int id = 0;
    ModalityMask mask;
    bool present = false;
    EvalResult result;
};

void print_eval_table(std::ostream& os, const std::vector<SubsetEvalRow>& rows) {
    os << " id | Fl T1 T1c T2 |   ET dsc   hd95 |   TC dsc   hd95 |   WT dsc   hd95\n";
    os << "----+--------------+-----------------+-----------------+----------------\n";
    char line[256];
    for (const auto& row : rows) {
        const auto& p = row.mask.present;
        if (!row.present) {
            std::snprintf(line, sizeof(line), " %2d |  %c  %c  %c  %c  | %s\n", row.id,
                          p[0] ? 'x' : '.', p[1] ? 'x' : '.', p[2] ? 'x' : '.', p[3] ? 'x' : '.',
                          "checkpoint absent");
            os << line;
            continue;
        }
        const auto& r = row.result;
        std::snprintf(line, sizeof(line),
                      " %2d |  %c  %c  %c  %c  | %6.4f %7.2f | %6.4f %7.2f | %6.4f %7.2f\n", row.id,
                      p[0] ? 'x' : '.', p[1] ? 'x' : '.', p[2] ? 'x' : '.', p[3] ? 'x' : '.',
                      r.mean_dsc[0], r.mean_hd95[0], r.mean_dsc[1], r.mean_hd95[1], r.mean_dsc[2],
                      r.mean_hd95[2]);
        os << line;
    }
}

void write_eval_csv(const std::string& path, const std::vector<SubsetEvalRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "subset_id,mask,present,dsc_et,hd95_et,dsc_tc,hd95_tc,dsc_wt,hd95_wt\n";
    char line[256];
    for (const auto& row : rows) {
        if (!row.present) {
            std::snprintf(line, sizeof(line), "%d,%s,absent,,,,,,\n", row.id, row.mask.token().c_str());
        } else {
            const auto& r = row.result;
            std::snprintf(line, sizeof(line), "%d,%s,present,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", row.id,
                          row.mask.token().c_str(), r.mean_dsc[0], r.mean_hd95[0], r.mean_dsc[1],
                          r.mean_hd95[1], r.mean_dsc[2], r.mean_hd95[2]);
        }
        out << line;
    }
}

}  // namespace

std::string output_root() {
    const char* env = std::getenv("ACN_OUT_ROOT");
    return env && *env ? env : "./runs";
}

int cmd_synth(const SynthArgs& args) {
    const std::string started = iso_now();
    if (args.out.empty()) throw ConfigError("synth: --out is required");

    SynthConfig cfg;
    cfg.spatial_shape = args.shape;
    cfg.seed = args.seed;
    cfg.noise_std = args.noise_std;
    if (cfg.spatial_shape.size() == 2 || cfg.spatial_shape.size() == 3) {
        // Scale tumor radii with the smallest extent so small phantoms stay
        // usable out of the box.
        double s = double(*std::min_element(cfg.spatial_shape.begin(), cfg.spatial_shape.end())) / 64.0;
        if (s < 1.0) {
            auto scaled = [s](RadiusRange r) { return RadiusRange{std::max(1.0, r.lo * s), std::max(1.5, r.hi * s)}; };
            cfg.et_radius = scaled(cfg.et_radius);
            cfg.tc_radius = RadiusRange{cfg.et_radius.hi + 1.0, std::max(cfg.et_radius.hi + 2.0, cfg.tc_radius.hi * s)};
            cfg.wt_radius = RadiusRange{cfg.tc_radius.hi + 1.0, std::max(cfg.tc_radius.hi + 2.0, cfg.wt_radius.hi * s)};
        }
    }
    for (auto d : cfg.spatial_shape) {
        if (d % 16 != 0)
            std::cerr << "warning: shape dim " << d
                      << " is not divisible by 16; the default backbone needs patch dims divisible"
                         " by 8 (2^(K-1)) and the entropy discriminator by 16 (2^4), so whole-volume"
                         " training on this dataset will be rejected\n";
    }

    synth_dataset_write(args.out, args.cases, cfg, args.force);

    KvDoc config;
    config.set("synth.out", args.out);
    config.set_int("synth.cases", args.cases);
    std::string shape_str;
    for (std::size_t i = 0; i < args.shape.size(); ++i)
        shape_str += (i ? "," : "") + std::to_string(args.shape[i]);
    config.set("synth.shape", shape_str);
    config.set_int("synth.seed", std::int64_t(args.seed));
    config.set_double("synth.noise_std", args.noise_std);
    config.set("synth.config_hash", hash_hex(cfg.canonical_text()));
    write_run_manifest(args.out, "synth", config, args.seed, started);
    std::cout << "wrote " << args.cases << " cases to " << args.out << "\n";
    return kExitOk;
}

int cmd_train(const TrainArgs& args) {
    const std::string started = iso_now();
    if (args.data.empty()) throw ConfigError("train: --data is required");
    if (args.out.empty()) throw ConfigError("train: --out is required");

    KvDoc doc;
    if (!args.config_path.empty()) doc = KvDoc::load(args.config_path);
    for (const auto& kv : args.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("train: override '" + kv + "' is not key=value");
        doc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    // The mask flag wins over any file value; it is mandatory one way or
    // the other.
    if (!args.mask.empty())
        doc.set("train.mask", parse_mask_arg(args.mask).token());
    else if (!doc.has("train.mask"))
        parse_mask_arg("");  // throws the canonical message
    if (!args.ablate.empty()) {
        std::string tok;
        auto apply = [&](const std::string& t) {
            if (t == "ena")
                doc.set_bool("train.use_ena", false);
            else if (t == "kna")
                doc.set_bool("train.use_kna", false);
            else if (t == "mmi")
                doc.set_bool("train.use_mmi", false);
            else if (!t.empty())
                throw ConfigError("train: unknown ablation '" + t + "'; valid: {ena, kna, mmi}");
        };
        for (char c : args.ablate) {
            if (c == ',') {
                apply(tok);
                tok.clear();
            } else {
                tok += c;
            }
        }
        apply(tok);
    }
    TrainConfig cfg = TrainConfig::from_kv(doc);

    std::vector<Case> cases = load_dataset(args.data);
    DatasetSplit split = split_dataset(int(cases.size()), cfg.val_fraction, cfg.seed);
    std::vector<Case> train, val;
    for (int i : split.train_indices) train.push_back(cases[std::size_t(i)]);
    for (int i : split.val_indices) val.push_back(cases[std::size_t(i)]);
    std::cout << "training on " << train.size() << " cases, validating on " << val.size()
              << " (mask " << cfg.mask.token() << ", subset id " << subset_id(cfg.mask) << ")\n";

    Trainer trainer(cfg);
    trainer.fit(train, val, args.out);

    KvDoc config = cfg.to_kv();
    config.set("train.data", args.data);
    write_run_manifest(args.out, "train", config, cfg.seed, started);
    std::cout << "checkpoints under " << args.out << " (best mean DSC "
              << (trainer.best_mean_dsc() < 0 ? 0.0 : trainer.best_mean_dsc()) << ")\n";
    return kExitOk;
}

int cmd_eval(const EvalArgs& args) {
    const std::string started = iso_now();
    if (args.ckpt.empty()) throw ConfigError("eval: --ckpt is required");
    if (args.data.empty()) throw ConfigError("eval: --data is required");
    const std::string out_dir = args.out.empty() ? output_root() + "/eval" : args.out;
    fs::create_directories(out_dir);

    std::vector<Case> cases = load_dataset(args.data);
    std::vector<SubsetEvalRow> rows;
    bool any_absent = false;

    if (args.all_subsets) {
        auto subsets = enumerate_modality_subsets();
        for (std::size_t i = 0; i < subsets.size(); ++i) {
            SubsetEvalRow row;
            row.id = int(i) + 1;
            row.mask = subsets[i];
            // A subset directory without a loadable checkpoint counts as
            // absent; a checkpoint trained under the wrong mask is an error.
            const std::string sub = args.ckpt + "/" + row.mask.token();
            std::string resolved;
            for (const char* cand : {"", "/best", "/last"})
                if (resolved.empty() && fs::exists(sub + cand + "/manifest.kv")) resolved = sub + cand;
            if (!resolved.empty()) {
                Trainer t = Trainer::load(resolved);
                if (t.config().mask.present != row.mask.present)
                    throw DataError("eval: checkpoint at " + sub + " was trained with mask '" +
                                    t.config().mask.token() + "', expected '" + row.mask.token() + "'");
                row.result = t.evaluate(cases);
                row.present = true;
            } else {
                any_absent = true;
            }
            rows.push_back(std::move(row));
        }
    } else {
        Trainer t = Trainer::load(resolve_checkpoint_dir(args.ckpt));
        SubsetEvalRow row;
        row.id = subset_id(t.config().mask);
        row.mask = t.config().mask;
        row.result = t.evaluate(cases);
        row.present = true;
        rows.push_back(std::move(row));
    }

    print_eval_table(std::cout, rows);
    write_eval_csv(out_dir + "/report.csv", rows);

    KvDoc config;
    config.set("eval.ckpt", args.ckpt);
    config.set("eval.data", args.data);
    config.set_bool("eval.all_subsets", args.all_subsets);
    write_run_manifest(out_dir, "eval", config, 0, started);
    std::cout << "report written to " << out_dir << "/report.csv\n";
    return any_absent ? kExitPartial : kExitOk;
}

int cmd_entropy_export(const EntropyExportArgs& args) {
    const std::string started = iso_now();
    if (args.ckpt.empty() || args.case_dir.empty() || args.out.empty())
        throw ConfigError("entropy-export: --ckpt, --case and --out are all required");
    fs::create_directories(args.out);

    Trainer t = Trainer::load(resolve_checkpoint_dir(args.ckpt));
    Case raw = load_brats_case(args.case_dir);
    Case c{raw.id, zscore_normalize(raw.volume), raw.labels};
    const int num_classes = t.config().num_classes;

    struct PathOut {
        const char* tag;
        bool unimodal;
    };
    const PathOut paths[2] = {{"multi", false}, {"uni", true}};
    for (const auto& po : paths) {
        Tensor input =
            po.unimodal ? apply_modality_mask(c.volume, t.config().mask) : c.volume.channels;
        Tensor probs = t.predict_probs(input, po.unimodal);
        const std::int64_t sp = probs.numel_from(1);

        std::vector<double> entropy(std::size_t(sp), 0.0);
        std::vector<double> seg(std::size_t(sp), 0.0);
        for (std::int64_t i = 0; i < sp; ++i) {
            double h = 0.0;
            int best = 0;
            double bv = probs[i];
            for (int cl = 0; cl < num_classes; ++cl) {
                double p = probs[cl * sp + i];
                if (p > 0.0) h -= p * std::log(std::max(p, kProbFloor));
                if (p > bv) {
                    bv = p;
                    best = cl;
                }
            }
            entropy[std::size_t(i)] = h;
            seg[std::size_t(i)] = double(class_to_label(best));
        }

        const auto shape = c.volume.spatial_shape();
        if (t.config().spatial_rank == 2) {
            // Entropy rendered on [0, log C] -> [0, 255]; labels via the
            // fixed lut {0: 0, 1: 85, 2: 170, 4: 255}.
            pgm_write(args.out + "/entropy_" + po.tag + ".pgm", shape[0], shape[1],
                      scale_to_u8(entropy, 0.0, std::log(double(num_classes))));
            std::vector<std::uint8_t> seg_px(seg.size());
            for (std::size_t i = 0; i < seg.size(); ++i) {
                switch (int(seg[i])) {
                    case 0: seg_px[i] = 0; break;
                    case 1: seg_px[i] = 85; break;
                    case 2: seg_px[i] = 170; break;
                    default: seg_px[i] = 255; break;
                }
            }
            pgm_write(args.out + "/seg_" + po.tag + ".pgm", shape[0], shape[1], seg_px);
        } else {
            NiftiVolume v{shape, c.volume.voxel_spacing, entropy};
            nifti_write(args.out + "/entropy_" + std::string(po.tag) + ".nii.gz", v,
                        NiftiDtype::Float32);
            v.data = seg;
            nifti_write(args.out + "/seg_" + std::string(po.tag) + ".nii.gz", v, NiftiDtype::Uint8);
        }
    }

    KvDoc config;
    config.set("entropy_export.ckpt", args.ckpt);
    config.set("entropy_export.case", args.case_dir);
    write_run_manifest(args.out, "entropy-export", config, 0, started);
    std::cout << "entropy maps and segmentations written to " << args.out << "\n";
    return kExitOk;
}

int cmd_list_subsets(const ListSubsetsArgs& args) {
    const std::string started = iso_now();
    const std::string out_dir = args.out.empty() ? output_root() + "/subsets" : args.out;
    fs::create_directories(out_dir);

    auto subsets = enumerate_modality_subsets();
    std::cout << " id | Fl T1 T1c T2 | tokens\n";
    std::cout << "----+--------------+-------\n";
    std::ofstream csv(out_dir + "/subsets.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write " + out_dir + "/subsets.csv");
    csv << "subset_id,mask\n";
    char line[128];
    for (std::size_t i = 0; i < subsets.size(); ++i) {
        const auto& p = subsets[i].present;
        std::snprintf(line, sizeof(line), " %2zu |  %c  %c  %c  %c  | %s\n", i + 1, p[0] ? 'x' : '.',
                      p[1] ? 'x' : '.', p[2] ? 'x' : '.', p[3] ? 'x' : '.', subsets[i].token().c_str());
        std::cout << line;
        csv << (i + 1) << "," << subsets[i].token() << "\n";
    }
    csv.close();

    KvDoc config;
    config.set("list_subsets.out", out_dir);
    write_run_manifest(out_dir, "list-subsets", config, 0, started);
    return kExitOk;
}

}  // namespace acn::cli
