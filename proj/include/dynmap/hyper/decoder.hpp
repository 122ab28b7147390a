// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/init.hpp>
#include <dynmap/diff/tensor.hpp>
#include <dynmap/hyper/config.hpp>
#include <dynmap/maps/mlp_map.hpp>

#include <string>
#include <vector>

namespace dynmap::hyper {

struct NamedTensor {
    std::string name;
    diff::Tensor tensor;
};

/// One learnable vector per video frame, initialized N(0, 0.01^2).
class LatentTable {
public:
    LatentTable() = default;
    LatentTable(int frames, int dim, Rng& rng);

    int frames() const { return static_cast<int>(codes_.dim(0)); }
    int dim() const { return static_cast<int>(codes_.dim(1)); }

    /// Row `frame` as a graph-connected [dim] tensor. Throws std::out_of_range.
    diff::Tensor latent(int frame) const;
    std::vector<double> values(int frame) const;

    /// [frames x dim].
    diff::Tensor& codes() { return codes_; }
    const diff::Tensor& codes() const { return codes_; }

private:
    diff::Tensor codes_;
};

/// Shared 2D convolutional hypernetwork: latent -> FC stem -> stride-2
/// transposed convolutions -> backbone, then three heads emitting tri-plane
/// features, density maps and color maps. Head channels are grouped per
/// plane in the order XY, XZ, YZ.
class Decoder {
public:
    Decoder() = default;
    Decoder(const DecoderConfig& config, Rng& rng);

    const DecoderConfig& config() const { return config_; }

    /// Decodes one frame. Records a graph when gradients are enabled. Throws
    /// std::runtime_error naming the layer on non-finite activations.
    maps::MlpMapSet decode(const diff::Tensor& z, int frame) const;

    std::vector<NamedTensor>& parameters() { return params_; }
    const std::vector<NamedTensor>& parameters() const { return params_; }
    std::int64_t parameter_count() const;

    diff::Tensor& parameter(const std::string& name);

    /// Indices into parameters() of the last layer of each head.
    struct HeadLayers {
        std::size_t triplane_w, triplane_b, density_w, density_b, color_w, color_b;
    };
    HeadLayers head_layers() const;

private:
    const diff::Tensor& param(std::size_t i) const { return params_[i].tensor; }
    std::size_t add_param(std::string name, diff::Shape shape, std::int64_t fan_in, bool bias, Rng& rng);

    DecoderConfig config_;
    std::vector<NamedTensor> params_;
    std::size_t fc_ = 0;
    std::vector<std::size_t> deconv_;
    std::size_t triplane_ = 0, density_ = 0;
    std::vector<std::size_t> color_;
    std::size_t color_out_ = 0;
};

} // namespace dynmap::hyper
