// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "support/oracles.hpp"

#include <dynmap/hyper/model.hpp>
#include <dynmap/maps/mlp_map.hpp>

#include <cmath>

namespace dynmap::testing {

struct SetGeometry {
    int density_res = 8;
    int color_res = 4;
    int triplane_res = 8;
    int planes = 3;
    maps::MlpShape shape{};
};

/// MLP map set with uniform random cells; color weights scaled so the
/// three-layer nets stay out of saturation.
inline maps::MlpMapSet random_set(const SetGeometry& g, std::mt19937_64& rng, bool requires_grad = false,
                                  double density_scale = 0.5) {
    maps::MlpMapSet set;
    set.shape = g.shape;
    const double cs = 1.0 / std::sqrt(static_cast<double>(g.shape.hidden_dim));
    for (int p = 0; p < g.planes; ++p) {
        const auto plane = enc::kOrthogonalPlanes[static_cast<std::size_t>(p)];
        set.density.push_back({plane, g.density_res, g.shape.density_params(),
                               random_tensor({g.density_res * g.density_res, g.shape.density_params()}, rng,
                                             -density_scale, density_scale, requires_grad)});
        set.color.push_back({plane, g.color_res, g.shape.color_params(),
                             random_tensor({g.color_res * g.color_res, g.shape.color_params()}, rng, -cs, cs,
                                           requires_grad)});
    }
    set.triplane.resolution = g.triplane_res;
    set.triplane.channels = g.shape.feature_dim;
    for (auto& t : set.triplane.planes) {
        t = random_tensor({g.triplane_res * g.triplane_res, g.shape.feature_dim}, rng, -1, 1, requires_grad);
    }
    return set;
}

/// Small decoder for tests that need a whole model.
inline hyper::ModelConfig tiny_config(int frames = 3) {
    hyper::ModelConfig c = hyper::ModelConfig::shrunk(16);
    c.frames = frames;
    c.decoder.latent_dim = 8;
    return c;
}

/// Rewrites the heads so every frame decodes to a spatially constant field:
/// density `sigma` everywhere in the box and color logits 0 (grey 0.5).
inline void set_uniform_field(hyper::Model& model, double sigma) {
    auto& dec = model.decoder();
    dec.parameter("triplane.weight").buffer().fill(0);
    auto& tb = dec.parameter("triplane.bias").buffer();
    tb.fill(0);
    const int f = model.config().decoder.feature_dim;
    for (int p = 0; p < 3; ++p) {
        tb.set(static_cast<std::size_t>(p * f), 1.0); // one constant feature per plane
    }
    dec.parameter("density.weight").buffer().fill(0);
    dec.parameter("color.out.weight").buffer().fill(0);
    dec.parameter("color.out.bias").buffer().fill(0);
    for (auto& t : model.hash().tables()) {
        t.buffer().fill(0);
    }
    // The raw density is linear in the bias of the first cell parameter, so
    // probe with a unit bias and rescale.
    auto& db = dec.parameter("density.bias").buffer();
    const int planes = model.config().decoder.plane_count();
    auto set_bias = [&](double v) {
        db.fill(0);
        for (int p = 0; p < planes; ++p) {
            db.set(static_cast<std::size_t>(p * f), v);
        }
    };
    set_bias(1.0);
    const Vec3 probe{0.3, 0.6, 0.4};
    double raw = 0;
    {
        diff::NoGradGuard guard;
        const auto set = model.decode(0);
        raw = maps::eval_density(set, model.features(set, std::span<const Vec3>(&probe, 1)).values(), probe).raw;
    }
    const double target = sigma > 30 ? sigma : (sigma <= 0 ? -60.0 : std::log(std::expm1(sigma)));
    set_bias(target / raw);
}

} // namespace dynmap::testing
