// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/hyper/model.hpp>
#include <dynmap/occ/occupancy.hpp>
#include <dynmap/render/camera.hpp>
#include <dynmap/render/composite.hpp>
#include <dynmap/render/sampling.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace dynmap::render {

inline constexpr double kColorWeightThreshold = 1e-3;

struct RenderOptions {
    /// Skip samples in unoccupied voxels; requires an occupancy volume.
    bool use_ess = false;
    /// Evaluate color only where the compositing weight exceeds tau2.
    bool two_stage = true;
    double tau2 = kColorWeightThreshold;
    Rgb background{0, 0, 0};
    int tile = 64;
    /// Worker count; 0 uses every hardware thread.
    int threads = 0;
    /// March step; 0 selects diagonal / 256.
    double step = 0;
};

struct RenderStats {
    std::int64_t rays_hit = 0;
    std::int64_t density_evals = 0;
    std::int64_t color_evals = 0;
};

/// Linear RGB in [0, 1], row-major, plus per-pixel opacity.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;
    std::vector<float> alpha;
    RenderStats stats;
};

/// Renders one frame's decoded field. Output is deterministic for fixed
/// inputs: tiles are independent and each writes only its own pixels.
Image render_image(const hyper::Model& model, const maps::MlpMapSet& set, const Camera& cam,
                   const RenderOptions& options, const occ::OccupancyVolume* occupancy = nullptr);

/// Differentiable rendering of rays whose samples are given: returns
/// [R x 4] (color over the background, then opacity). Every sample is
/// colored. `samples[r]` must hold the samples of `rays[r]`.
diff::Tensor trace_rays(const hyper::Model& model, const maps::MlpMapSet& set, std::span<const Ray> rays,
                        std::span<const RaySamples> samples, const Rgb& background);

/// 10 log10(1 / MSE) over all entries; +inf for identical inputs.
double psnr(std::span<const float> a, std::span<const float> b);

/// Interleaved 8-bit RGBA with alpha taken from the opacity.
std::vector<std::uint8_t> to_rgba8(const Image& image);
std::uint8_t quantize(float v);

} // namespace dynmap::render
