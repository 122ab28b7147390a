// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/diff/dtype.hpp>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace dynmap::diff {

/// Flat, typed real storage backing tensor values and gradients.
class Buffer {
public:
    Buffer() = default;
    Buffer(Dtype dtype, std::size_t size);

    Dtype dtype() const noexcept { return static_cast<Dtype>(storage_.index()); }
    std::size_t size() const noexcept;
    bool empty() const noexcept { return size() == 0; }

    template <class T>
    std::span<T> span() {
        auto* v = std::get_if<std::vector<T>>(&storage_);
        if (v == nullptr) {
            throw std::logic_error("Buffer: element type does not match dtype");
        }
        return {v->data(), v->size()};
    }

    template <class T>
    std::span<const T> span() const {
        const auto* v = std::get_if<std::vector<T>>(&storage_);
        if (v == nullptr) {
            throw std::logic_error("Buffer: element type does not match dtype");
        }
        return {v->data(), v->size()};
    }

    double get(std::size_t i) const;
    void set(std::size_t i, double value);
    void add(std::size_t i, double value);

    void fill(double value);
    /// this += other, elementwise. Sizes and dtypes must match.
    void accumulate(const Buffer& other);

    /// Writes the elements into `out` converted to double.
    std::vector<double> to_doubles() const;

private:
    std::variant<std::vector<float>, std::vector<double>> storage_;
};

} // namespace dynmap::diff
