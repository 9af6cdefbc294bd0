// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace oir {

/// Dense row-major float32 tensor of arbitrary rank.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, float fill = 0.0f);
    Tensor(std::vector<std::size_t> shape, std::vector<float> data);

    const std::vector<std::size_t>& shape() const noexcept { return m_shape; }
    std::size_t rank() const noexcept { return m_shape.size(); }
    std::size_t dim(std::size_t axis) const { return m_shape.at(axis); }
    std::size_t size() const noexcept { return m_data.size(); }

    std::span<float> values() noexcept { return m_data; }
    std::span<const float> values() const noexcept { return m_data; }
    float* data() noexcept { return m_data.data(); }
    const float* data() const noexcept { return m_data.data(); }

    float& operator[](std::size_t i) noexcept { return m_data[i]; }
    float operator[](std::size_t i) const noexcept { return m_data[i]; }

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> m_shape;
    std::vector<float> m_data;
};

std::size_t element_count(std::span<const std::size_t> shape) noexcept;

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Bitwise equality of shape and payload (distinguishes -0.0 and NaN payloads).
bool bit_equal(const Tensor& a, const Tensor& b) noexcept;

}  // namespace oir
