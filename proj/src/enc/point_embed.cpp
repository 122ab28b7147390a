// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/enc/point_embed.hpp>

#include <dynmap/diff/ops.hpp>

#include <stdexcept>

namespace dynmap::enc {

FeatureProjector::FeatureProjector(int in_dim, int out_dim, Rng& rng)
    : weight_(diff::Tensor::zeros({in_dim, out_dim}, true)) {
    kaiming_uniform(weight_, in_dim, rng);
}

diff::Tensor FeatureProjector::apply(const diff::Tensor& features) const { return diff::matmul(features, weight_); }

diff::Tensor point_embed(const HashTableSet& tables, const FeatureProjector& projector,
                         const TriPlaneFeatures& planes, std::span<const Vec3> points, double t) {
    if (projector.in_dim() != tables.config().encoded_dim() || projector.out_dim() != planes.channels) {
        throw std::invalid_argument("point_embed: projector shape does not bridge hash and tri-plane widths");
    }
    return diff::add(projector.apply(hash_encode(tables, points, t)), triplane_sample(planes, points));
}

} // namespace dynmap::enc
