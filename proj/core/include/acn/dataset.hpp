// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acn/synth.hpp"
#include "acn/volume.hpp"

namespace acn {

struct Case {
    std::string id;
    MultimodalVolume volume;
    SegmentationLabelMap labels;
};

/// Loads one BraTS-style case directory holding the four modality volumes
/// (<id>_flair / _t1 / _t1ce / _t2) and <id>_seg in NIfTI format. A missing
/// modality names itself in the error; channel shape mismatches and label
/// values outside {0,1,2,4} are rejected.
Case load_brats_case(const std::string& dir_path);

/// Writes a case as a BraTS-style directory (float32 images, uint8 labels).
void save_case(const std::string& dir_path, const Case& c, bool gzip = true);

/// Generates `count` phantom cases under out_dir (one subdirectory each,
/// per-case seeds derived from cfg.seed) plus a manifest recording case ids,
/// seeds and the config hash. Refuses a non-empty out_dir unless force.
/// Returns the case directory names, in order.
std::vector<std::string> synth_dataset_write(const std::string& out_dir, int count,
                                             const SynthConfig& cfg, bool force = false);

/// Loads every case listed by a dataset manifest (or, without one, every
/// subdirectory that looks like a case), sorted by id.
std::vector<Case> load_dataset(const std::string& dir);

/// Deterministic split: shuffles ids with `seed` and reserves
/// round(val_fraction * n), at least 1 when n > 1, for validation.
struct DatasetSplit {
    std::vector<int> train_indices;
    std::vector<int> val_indices;
};
DatasetSplit split_dataset(int case_count, double val_fraction, std::uint64_t seed);

}  // namespace acn
