// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/diff/tensor.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dynmap::render {

using Rgb = std::array<double, 3>;

struct CompositeResult {
    Rgb color{};
    double opacity = 0;
    std::vector<double> weights;
};

/// Alpha compositing along one ray: T_i = exp(-sum_{j<i} sigma_j delta_j),
/// w_i = T_i (1 - exp(-sigma_i delta_i)), color = sum w_i c_i and
/// opacity = sum w_i. Throws on unequal lengths or negative sigma/delta.
CompositeResult composite(std::span<const double> sigma, std::span<const Rgb> rgb, std::span<const double> delta);

/// Weights only; returns the opacity. Used by the density-first pass.
double composite_weights(std::span<const double> sigma, std::span<const double> delta, std::vector<double>& weights);

/// Differentiable compositing of many rays. `sigma` is [N], `rgb` is [N x 3]
/// and ray r owns samples [offsets[r], offsets[r+1]). Returns [R x 4]: the
/// composited color over `background` followed by the opacity.
diff::Tensor composite_rays(const diff::Tensor& sigma, const diff::Tensor& rgb, std::span<const double> delta,
                            std::span<const std::int64_t> offsets, const Rgb& background);

} // namespace dynmap::render
