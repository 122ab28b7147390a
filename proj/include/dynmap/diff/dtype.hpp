// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

namespace dynmap::diff {

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

/// Process-wide precision used by newly created tensors. Training and
/// rendering run at f32; gradient checks switch to f64.
Dtype default_dtype() noexcept;
void set_default_dtype(Dtype dtype) noexcept;

std::string_view dtype_name(Dtype dtype) noexcept;
std::size_t dtype_size(Dtype dtype) noexcept;

/// Restores the previous default precision on scope exit.
class PrecisionScope {
public:
    explicit PrecisionScope(Dtype dtype) noexcept : saved_(default_dtype()) { set_default_dtype(dtype); }
    ~PrecisionScope() { set_default_dtype(saved_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    Dtype saved_;
};

/// Calls `fn(T{})` with T = float or double according to `dtype`.
template <class Fn>
decltype(auto) dispatch(Dtype dtype, Fn&& fn) {
    if (dtype == Dtype::f64) {
        return std::forward<Fn>(fn)(double{});
    }
    return std::forward<Fn>(fn)(float{});
}

} // namespace dynmap::diff
