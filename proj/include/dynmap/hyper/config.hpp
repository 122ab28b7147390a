// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>
#include <dynmap/enc/hash_grid.hpp>
#include <dynmap/maps/mlp_map.hpp>

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace dynmap::hyper {

/// Orthogonal: one map per plane XY, XZ, YZ. XY-only: a single map on XY.
enum class PlaneLayout { orthogonal, xy_only };

struct DecoderConfig {
    int latent_dim = 256;
    int stem_resolution = 4;
    /// Entry 0 is the stem width (FC output = stem^2 * channels[0]); every
    /// further entry adds one stride-2 transposed convolution.
    std::vector<int> backbone_channels{256, 256, 128, 128, 64, 64, 32};
    int feature_dim = 32;
    int hidden_dim = 32;
    /// One stride-2 convolution per entry, before the final stride-1 layer.
    std::vector<int> color_channels{64, 128, 256, 256};
    PlaneLayout layout = PlaneLayout::orthogonal;

    int backbone_resolution() const;
    int density_resolution() const { return backbone_resolution(); }
    int color_resolution() const;
    int plane_count() const { return layout == PlaneLayout::orthogonal ? 3 : 1; }
    maps::MlpShape mlp_shape() const { return {feature_dim, hidden_dim}; }
    void validate() const;
};

struct ModelConfig {
    DecoderConfig decoder;
    enc::HashGridConfig hash;
    int frames = 1;
    SceneBounds bounds;
    std::uint64_t seed = 7;

    /// Full-size architecture.
    static ModelConfig defaults();
    /// Desk-scale variant: resolutions and channel widths divided by
    /// `factor` (a power of two), per-cell network widths unchanged.
    static ModelConfig shrunk(int factor);

    /// Normalized time frame/(frames-1); 0 for single-frame videos.
    double normalized_time(int frame) const;
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

} // namespace dynmap::hyper
