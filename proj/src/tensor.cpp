// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "oir/error.hpp"

namespace oir {

std::size_t element_count(std::span<const std::size_t> shape) noexcept {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, float fill)
    : m_shape(std::move(shape)), m_data(element_count(m_shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : m_shape(std::move(shape)), m_data(std::move(data)) {
    if (m_data.size() != element_count(m_shape)) {
        throw_error(ErrorKind::parameter, "tensor payload has " + std::to_string(m_data.size()) +
                                              " values, shape requires " + std::to_string(element_count(m_shape)));
    }
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(m_data.begin(), m_data.end(), [](float v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw_error(ErrorKind::parameter, "max_abs_diff: shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return worst;
}

bool bit_equal(const Tensor& a, const Tensor& b) noexcept {
    return a.shape() == b.shape() &&
           (a.size() == 0 || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

}  // namespace oir
