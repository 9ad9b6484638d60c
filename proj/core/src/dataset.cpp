// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#include "acn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "acn/error.hpp"
#include "acn/hash.hpp"
#include "acn/kvtext.hpp"
#include "acn/nifti.hpp"
#include "acn/random.hpp"

namespace fs = std::filesystem;

namespace acn {

namespace {

std::string find_with_suffix(const std::string& dir, const std::string& suffix) {
    // Accepts <anything>_<suffix>.nii or .nii.gz
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        for (const char* ext : {".nii", ".nii.gz"}) {
            std::string tail = "_" + suffix + ext;
            if (name.size() > tail.size() &&
                name.compare(name.size() - tail.size(), tail.size(), tail) == 0)
                return entry.path().string();
        }
    }
    return {};
}

}  // namespace

Case load_brats_case(const std::string& dir_path) {
    if (!fs::is_directory(dir_path)) throw DataError("case directory not found: " + dir_path);

    Case c;
    c.id = fs::path(dir_path).filename().string();

    NiftiVolume mods[kNumModalities];
    for (int m = 0; m < kNumModalities; ++m) {
        std::string path = find_with_suffix(dir_path, modality_suffix(Modality(m)));
        if (path.empty())
            throw DataError("case " + c.id + ": missing " + modality_name(Modality(m)) +
                            " volume (expected *_" + modality_suffix(Modality(m)) + ".nii[.gz])");
        mods[m] = nifti_read(path);
        if (m > 0 && mods[m].shape != mods[0].shape)
            throw DataError("case " + c.id + ": " + modality_name(Modality(m)) +
                            " shape differs from Flair");
    }
    std::string seg_path = find_with_suffix(dir_path, "seg");
    if (seg_path.empty()) throw DataError("case " + c.id + ": missing segmentation (*_seg.nii[.gz])");
    NiftiVolume seg = nifti_read(seg_path);
    if (seg.shape != mods[0].shape)
        throw DataError("case " + c.id + ": segmentation shape differs from image channels");

    std::vector<std::int64_t> ch_shape = {kNumModalities};
    ch_shape.insert(ch_shape.end(), mods[0].shape.begin(), mods[0].shape.end());
    c.volume.channels = Tensor(ch_shape);
    c.volume.voxel_spacing = mods[0].spacing;
    const std::int64_t sp = c.volume.channels.numel_from(1);
    for (int m = 0; m < kNumModalities; ++m)
        std::copy_n(mods[m].data.data(), sp, c.volume.channels.data() + m * sp);

    c.labels.shape = seg.shape;
    c.labels.voxel_spacing = seg.spacing;
    c.labels.labels.resize(std::size_t(sp));
    for (std::int64_t i = 0; i < sp; ++i) {
        double v = seg.data[std::size_t(i)];
        auto r = std::llround(v);
        if (std::abs(v - double(r)) > 1e-6 || (r != 0 && r != 1 && r != 2 && r != 4))
            throw DataError("case " + c.id + ": label value " + std::to_string(v) +
                            " is outside {0, 1, 2, 4}");
        c.labels.labels[std::size_t(i)] = std::uint8_t(r);
    }
    c.volume.validate();
    c.labels.validate();
    return c;
}

void save_case(const std::string& dir_path, const Case& c, bool gzip) {
    c.volume.validate();
    c.labels.validate();
    fs::create_directories(dir_path);
    const std::string ext = gzip ? ".nii.gz" : ".nii";
    const std::int64_t sp = c.volume.channels.numel_from(1);

    NiftiVolume v;
    v.shape = c.volume.spatial_shape();
    v.spacing = c.volume.voxel_spacing;
    v.data.resize(std::size_t(sp));
    for (int m = 0; m < kNumModalities; ++m) {
        std::copy_n(c.volume.channels.data() + m * sp, sp, v.data.data());
        nifti_write(dir_path + "/" + c.id + "_" + modality_suffix(Modality(m)) + ext, v,
                    NiftiDtype::Float32);
    }
    for (std::int64_t i = 0; i < sp; ++i) v.data[std::size_t(i)] = double(c.labels.labels[std::size_t(i)]);
    nifti_write(dir_path + "/" + c.id + "_seg" + ext, v, NiftiDtype::Uint8);
}

std::vector<std::string> synth_dataset_write(const std::string& out_dir, int count,
                                             const SynthConfig& cfg, bool force) {
    if (count < 1) throw ConfigError("synth_dataset_write: case count must be >= 1");
    cfg.validate();
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
        throw DataError("output directory " + out_dir + " is not empty (use --force to overwrite)");
    fs::create_directories(out_dir);

    KvDoc manifest;
    manifest.set_int("dataset.cases", count);
    manifest.set_int("dataset.seed", std::int64_t(cfg.seed));
    manifest.set("dataset.config_hash", hash_hex(cfg.canonical_text()));

    Rng seeder(cfg.seed);
    std::vector<std::string> case_dirs;
    for (int i = 0; i < count; ++i) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "case_%04d", i);
        SynthConfig per_case = cfg;
        per_case.seed = seeder.derive(std::uint64_t(i) + 1);
        SynthCase sc = synth_generate(per_case);
        Case c{idbuf, std::move(sc.volume), std::move(sc.labels)};
        save_case(out_dir + "/" + idbuf, c);
        case_dirs.push_back(idbuf);
        std::string key = std::string("dataset.case.") + idbuf;
        manifest.set(key + ".id", idbuf);
        manifest.set_int(key + ".seed", std::int64_t(per_case.seed));
    }
    manifest.save(out_dir + "/manifest.kv");
    return case_dirs;
}

std::vector<Case> load_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir);
    std::vector<std::string> ids;
    const std::string manifest_path = dir + "/manifest.kv";
    if (fs::exists(manifest_path)) {
        KvDoc manifest = KvDoc::load(manifest_path);
        for (const auto& key : manifest.keys_with_prefix("dataset.case."))
            if (key.size() > 3 && key.compare(key.size() - 3, 3, ".id") == 0)
                ids.push_back(manifest.get(key));
    } else {
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw DataError("dataset at " + dir + " contains no cases");
    std::vector<Case> cases;
    cases.reserve(ids.size());
    for (const auto& id : ids) cases.push_back(load_brats_case(dir + "/" + id));
    return cases;
}

DatasetSplit split_dataset(int case_count, double val_fraction, std::uint64_t seed) {
    if (case_count < 1) throw ConfigError("split_dataset: empty dataset");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("split_dataset: val_fraction must be in [0, 1)");
    std::vector<int> idx(static_cast<std::size_t>(case_count));
    for (int i = 0; i < case_count; ++i) idx[std::size_t(i)] = i;
    Rng rng(seed);
    for (int i = case_count - 1; i > 0; --i)
        std::swap(idx[std::size_t(i)], idx[std::size_t(rng.uniform_int(0, i))]);
    int n_val = int(std::lround(val_fraction * case_count));
    if (val_fraction > 0.0 && n_val == 0 && case_count > 1) n_val = 1;
    if (n_val >= case_count) n_val = case_count - 1;
    DatasetSplit split;
    split.val_indices.assign(idx.begin(), idx.begin() + n_val);
    split.train_indices.assign(idx.begin() + n_val, idx.end());
    std::sort(split.val_indices.begin(), split.val_indices.end());
    std::sort(split.train_indices.begin(), split.train_indices.end());
    return split;
}

}  // namespace acn
