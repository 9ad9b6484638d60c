// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the test suites: tolerance checks, random tensors, a
// central-finite-difference gradient checker and scratch directories.

#pragma once

#include <doctest.h>
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "acn/ad.hpp"
#include "fd_check.hpp"
#include "acn/random.hpp"
#include "acn/tensor.hpp"

namespace acn::test {

inline bool close(double a, double b, double rtol = 1e-6, double atol = 1e-6) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

inline Tensor rand_uniform(std::vector<std::int64_t> shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

/// Independent oracle for softmax over the channel dim (dim 1).
inline Tensor softmax_oracle(const Tensor& logits, double tau = 1.0) {
    Tensor p(logits.shape());
    const std::int64_t B = logits.dim(0), C = logits.dim(1), S = logits.numel_from(2);
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t i = 0; i < S; ++i) {
            double mx = -1e300;
            for (std::int64_t c = 0; c < C; ++c)
                mx = std::max(mx, logits[(b * C + c) * S + i] / tau);
            double z = 0.0;
            for (std::int64_t c = 0; c < C; ++c) {
                double e = std::exp(logits[(b * C + c) * S + i] / tau - mx);
                p[(b * C + c) * S + i] = e;
                z += e;
            }
            for (std::int64_t c = 0; c < C; ++c) p[(b * C + c) * S + i] /= z;
        }
    return p;
}

/// Central finite-difference gradient check; see fd_check.hpp. Mismatches
/// are reported through doctest; returns the mismatch count (0 = pass).
inline int check_gradients(const std::vector<Tensor>& inputs,
                           const std::function<ad::Var(const std::vector<ad::Var>&)>& build,
                           double rtol = 1e-4, double atol = 1e-6, double h_scale = 1e-5) {
    std::ostringstream log;
    int bad = fd_gradient_mismatches(inputs, build, rtol, atol, h_scale, &log);
    CHECK_MESSAGE(bad == 0, log.str());
    return bad;
}

/// Scratch directory wiped on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = (std::filesystem::temp_directory_path() /
                 ("acn_test_" + tag + "_" + std::to_string(++counter) + "_" +
                  std::to_string(std::uint64_t(::getpid()))))
                    .string();
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

}  // namespace acn::test
