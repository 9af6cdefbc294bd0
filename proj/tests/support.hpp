// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "oir/backends.hpp"
#include "oir/error.hpp"
#include "oir/tensor.hpp"

namespace oir::test {

inline Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    for (auto& v : t.values()) {
        v = dist(rng);
    }
    return t;
}

inline Image random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    return Image(random_tensor({h, w, c}, seed, 0.0f, 1.0f));
}

// Smooth image so that DDIM round trips stay well inside [0, 1].
inline Image smooth_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
    Image img(h, w, c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double p = phase(rng);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                img.at(y, x, ch) = static_cast<float>(0.5 + 0.25 * std::sin(0.3 * static_cast<double>(x) + p) *
                                                                std::cos(0.2 * static_cast<double>(y) - p));
            }
        }
    }
    return img;
}

template <typename F>
ErrorKind error_kind_of(F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    throw std::runtime_error("expected an oir::Error");
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        m_path = std::filesystem::temp_directory_path() /
                 ("oir-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return m_path; }
    std::filesystem::path operator/(const std::string& rel) const { return m_path / rel; }

private:
    std::filesystem::path m_path;
};

}  // namespace oir::test
