// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/render/composite.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dynmap::render {

namespace {

void check_sample(double sigma, double delta) {
    if (!(sigma >= 0) || !(delta >= 0)) {
        throw std::invalid_argument("composite: sigma and delta must be non-negative (got sigma=" +
                                    std::to_string(sigma) + ", delta=" + std::to_string(delta) + ")");
    }
}

} // namespace

double composite_weights(std::span<const double> sigma, std::span<const double> delta, std::vector<double>& weights) {
    if (sigma.size() != delta.size()) {
        throw std::invalid_argument("composite: sigma and delta lengths differ");
    }
    weights.resize(sigma.size());
    double transmittance = 1;
    double opacity = 0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        check_sample(sigma[i], delta[i]);
        const double keep = std::exp(-sigma[i] * delta[i]);
        weights[i] = transmittance * (1 - keep);
        opacity += weights[i];
        transmittance *= keep;
    }
    return opacity;
}

CompositeResult composite(std::span<const double> sigma, std::span<const Rgb> rgb, std::span<const double> delta) {
    if (rgb.size() != sigma.size()) {
        throw std::invalid_argument("composite: sigma and rgb lengths differ");
    }
    CompositeResult r;
    r.opacity = composite_weights(sigma, delta, r.weights);
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            r.color[static_cast<std::size_t>(c)] += r.weights[i] * rgb[i][static_cast<std::size_t>(c)];
        }
    }
    return r;
}

diff::Tensor composite_rays(const diff::Tensor& sigma, const diff::Tensor& rgb, std::span<const double> delta,
                            std::span<const std::int64_t> offsets, const Rgb& background) {
    const std::int64_t n = sigma.numel();
    if (sigma.ndim() != 1 || rgb.ndim() != 2 || rgb.dim(0) != n || rgb.dim(1) != 3 ||
        delta.size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("composite_rays: expected sigma [N], rgb [N x 3] and N deltas");
    }
    if (offsets.empty() || offsets.front() != 0 || offsets.back() != n) {
        throw std::invalid_argument("composite_rays: offsets must run from 0 to N");
    }
    const auto rays = static_cast<std::int64_t>(offsets.size()) - 1;
    const auto s = sigma.values();
    const auto c = rgb.values();
    // Transmittance before each sample and the sample weights.
    std::vector<double> trans(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    std::vector<double> out(static_cast<std::size_t>(rays * 4), 0.0);
    for (std::int64_t r = 0; r < rays; ++r) {
        double t = 1, opacity = 0, col[3] = {0, 0, 0};
        for (auto i = offsets[static_cast<std::size_t>(r)]; i < offsets[static_cast<std::size_t>(r) + 1]; ++i) {
            const auto k = static_cast<std::size_t>(i);
            check_sample(s[k], delta[k]);
            const double keep = std::exp(-s[k] * delta[k]);
            trans[k] = t;
            w[k] = t * (1 - keep);
            opacity += w[k];
            for (int ch = 0; ch < 3; ++ch) {
                col[ch] += w[k] * c[k * 3 + static_cast<std::size_t>(ch)];
            }
            t *= keep;
        }
        for (int ch = 0; ch < 3; ++ch) {
            out[static_cast<std::size_t>(r * 4 + ch)] = col[ch] + background[static_cast<std::size_t>(ch)] * (1 - opacity);
        }
        out[static_cast<std::size_t>(r * 4 + 3)] = opacity;
    }
    diff::Tensor result = diff::Tensor::zeros({rays, 4}, sigma.dtype());
    for (std::size_t i = 0; i < out.size(); ++i) {
        result.buffer().set(i, out[i]);
    }

    std::vector<std::int64_t> offs(offsets.begin(), offsets.end());
    std::vector<double> deltas(delta.begin(), delta.end());
    diff::Tensor::record(
        result, {sigma, rgb},
        [offs = std::move(offs), deltas = std::move(deltas), trans = std::move(trans), w = std::move(w), c,
         background](const diff::Buffer& g, const diff::Buffer&, std::span<diff::Buffer* const> gi) {
            const auto rays = static_cast<std::int64_t>(offs.size()) - 1;
            for (std::int64_t r = 0; r < rays; ++r) {
                const double gc[3] = {g.get(static_cast<std::size_t>(r * 4)), g.get(static_cast<std::size_t>(r * 4 + 1)),
                                      g.get(static_cast<std::size_t>(r * 4 + 2))};
                // d(background term)/d(opacity) folds into the opacity gradient.
                const double go = g.get(static_cast<std::size_t>(r * 4 + 3)) -
                                  (gc[0] * background[0] + gc[1] * background[1] + gc[2] * background[2]);
                const auto begin = offs[static_cast<std::size_t>(r)];
                const auto end = offs[static_cast<std::size_t>(r) + 1];
                // Suffix sum of w_i v_i where v_i = gc . c_i + go.
                double suffix = 0;
                for (auto i = end - 1; i >= begin; --i) {
                    const auto k = static_cast<std::size_t>(i);
                    const double v = gc[0] * c[k * 3] + gc[1] * c[k * 3 + 1] + gc[2] * c[k * 3 + 2] + go;
                    if (gi[0]) {
                        const double t_next = trans[k] - w[k];
                        gi[0]->add(k, deltas[k] * (t_next * v - suffix));
                    }
                    if (gi[1]) {
                        for (int ch = 0; ch < 3; ++ch) {
                            gi[1]->add(k * 3 + static_cast<std::size_t>(ch), w[k] * gc[ch]);
                        }
                    }
                    suffix += w[k] * v;
                }
            }
        },
        "composite_rays");
    return result;
}

} // namespace dynmap::render
