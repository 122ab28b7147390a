// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/init.hpp>
#include <dynmap/enc/hash_grid.hpp>
#include <dynmap/enc/triplane.hpp>

namespace dynmap::enc {

/// Bias-free linear map from the hash feature to the tri-plane width.
class FeatureProjector {
public:
    FeatureProjector() = default;
    FeatureProjector(int in_dim, int out_dim, Rng& rng);

    int in_dim() const { return static_cast<int>(weight_.dim(0)); }
    int out_dim() const { return static_cast<int>(weight_.dim(1)); }

    /// [in x out].
    diff::Tensor& weight() { return weight_; }
    const diff::Tensor& weight() const { return weight_; }

    diff::Tensor apply(const diff::Tensor& features) const;

private:
    diff::Tensor weight_;
};

/// gamma_p = projector(hash_encode(p, t)) + triplane_sample(p), [N x C].
diff::Tensor point_embed(const HashTableSet& tables, const FeatureProjector& projector,
                         const TriPlaneFeatures& planes, std::span<const Vec3> points, double t);

} // namespace dynmap::enc
