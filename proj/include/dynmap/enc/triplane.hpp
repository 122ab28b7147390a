// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>
#include <dynmap/diff/tensor.hpp>
#include <dynmap/enc/plane.hpp>

#include <array>
#include <span>
#include <vector>

namespace dynmap::enc {

/// Three axis-aligned feature planes. Each plane tensor is [R*R x C]; texel
/// (i, j), with i along the plane's u axis and j along v, is row i*R + j and
/// its center sits at ((i + 0.5)/R, (j + 0.5)/R).
struct TriPlaneFeatures {
    int resolution = 0;
    int channels = 0;
    std::array<diff::Tensor, 3> planes;
};

/// Bilinear sample of every plane at the point's projection, summed over the
/// planes. Returns [N x C]; differentiable with respect to the plane texels.
diff::Tensor triplane_sample(const TriPlaneFeatures& planes, std::span<const Vec3> points);

std::vector<double> triplane_sample(const TriPlaneFeatures& planes, const Vec3& point);

} // namespace dynmap::enc
