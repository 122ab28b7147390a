// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>
#include <dynmap/diff/tensor.hpp>

#include <array>
#include <span>

namespace dynmap::enc {

inline constexpr int kDirFrequencies = 2;
inline constexpr int kDirEncodedDim = 3 + 3 * 2 * kDirFrequencies;

/// Positional encoding of a view direction:
/// (d, sin(pi d), cos(pi d), sin(2 pi d), cos(2 pi d)), 15 values.
/// Non-unit inputs are normalized and a warning is logged.
std::array<double, kDirEncodedDim> dir_encode(const Vec3& d);

/// [N x 15], no gradient.
diff::Tensor dir_encode(std::span<const Vec3> dirs);

} // namespace dynmap::enc
