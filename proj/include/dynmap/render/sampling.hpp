// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/init.hpp>
#include <dynmap/occ/occupancy.hpp>
#include <dynmap/render/camera.hpp>

#include <vector>

namespace dynmap::render {

inline constexpr int kTrainSamples = 64;
inline constexpr int kInferStepsPerDiagonal = 256;

/// Ray distances of the samples and the segment length each one stands for.
struct RaySamples {
    std::vector<double> t;
    std::vector<double> delta;

    std::size_t size() const { return t.size(); }
    void clear() {
        t.clear();
        delta.clear();
    }
};

/// Stratified sampling: one uniform jitter in each of `count` equal bins of
/// [near, far]. Each sample's delta is its bin width, so the deltas sum to
/// far - near. A ray that misses the box yields no samples.
void sample_train(const Ray& ray, int count, Rng& rng, RaySamples& out);

inline double infer_step(const SceneBounds& bounds) { return bounds.diagonal() / kInferStepsPerDiagonal; }

/// Marches [near, far] in segments of `step` (the last one clipped to far)
/// and samples each segment at its midpoint. With an occupancy volume only
/// samples whose midpoint lies in an occupied voxel are kept.
void sample_infer(const Ray& ray, const SceneBounds& bounds, double step, const occ::OccupancyVolume* occupancy,
                  RaySamples& out);

} // namespace dynmap::render
