// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/enc/point_embed.hpp>
#include <dynmap/hyper/config.hpp>
#include <dynmap/hyper/decoder.hpp>

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace dynmap::hyper {

/// Learnable tensors that share an optimizer learning rate.
struct ParameterGroup {
    std::string name;
    double base_lr = 0;
    std::vector<diff::Tensor> tensors;
};

/// Everything that is trained: per-frame latents, the decoder, the three
/// hash tables and the hash-to-feature projector.
class Model {
public:
    explicit Model(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    int frames() const { return config_.frames; }
    const SceneBounds& bounds() const { return config_.bounds; }

    LatentTable& latents() { return latents_; }
    const LatentTable& latents() const { return latents_; }
    Decoder& decoder() { return decoder_; }
    const Decoder& decoder() const { return decoder_; }
    enc::HashTableSet& hash() { return hash_; }
    const enc::HashTableSet& hash() const { return hash_; }
    enc::FeatureProjector& projector() { return projector_; }
    const enc::FeatureProjector& projector() const { return projector_; }

    /// Decodes the maps of `frame`, connected to the graph when gradients
    /// are enabled.
    maps::MlpMapSet decode(int frame) const;

    /// gamma_p for unit-cube positions at the set's frame: [N x feature_dim].
    diff::Tensor features(const maps::MlpMapSet& set, std::span<const Vec3> unit_points) const;

    /// Activated density at unit-cube positions, evaluated in chunks without
    /// recording a graph.
    std::vector<double> density(const maps::MlpMapSet& set, std::span<const Vec3> unit_points) const;

    /// Groups in checkpoint order: latents, decoder, hash, projector.
    std::vector<ParameterGroup> parameter_groups();
    /// Every learnable tensor with a stable, unique name.
    std::vector<NamedTensor> named_parameters();
    std::int64_t parameter_count() const;

private:
    ModelConfig config_;
    LatentTable latents_;
    Decoder decoder_;
    enc::HashTableSet hash_;
    enc::FeatureProjector projector_;
};

inline constexpr double kNetworkLearningRate = 5e-4;
inline constexpr double kHashLearningRate = 5e-3;

/// Memoized per-frame decodes with least-recently-used eviction. Safe for
/// concurrent callers; a miss decodes while holding the cache lock.
class DecodeCache {
public:
    explicit DecodeCache(const Model& model, std::size_t capacity = 4);

    std::shared_ptr<const maps::MlpMapSet> get(int frame);

    std::size_t capacity() const { return capacity_; }
    std::int64_t decode_count() const;
    void clear();

private:
    const Model& model_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<std::pair<int, std::shared_ptr<const maps::MlpMapSet>>> entries_;
    std::int64_t decodes_ = 0;
};

} // namespace dynmap::hyper
