// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/render/sampling.hpp>

#include <cmath>
#include <stdexcept>

namespace dynmap::render {

void sample_train(const Ray& ray, int count, Rng& rng, RaySamples& out) {
    out.clear();
    if (!ray.hit || !(ray.far > ray.near)) {
        return;
    }
    if (count < 1) {
        throw std::invalid_argument("sample count must be positive");
    }
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    const double bin = (ray.far - ray.near) / count;
    out.t.reserve(static_cast<std::size_t>(count));
    out.delta.assign(static_cast<std::size_t>(count), bin);
    for (int i = 0; i < count; ++i) {
        out.t.push_back(ray.near + (i + jitter(rng)) * bin);
    }
}

void sample_infer(const Ray& ray, const SceneBounds& bounds, double step, const occ::OccupancyVolume* occupancy,
                  RaySamples& out) {
    out.clear();
    if (!(step > 0)) {
        throw std::invalid_argument("march step must be positive");
    }
    if (!ray.hit || !(ray.far > ray.near)) {
        return;
    }
    const double length = ray.far - ray.near;
    const auto segments = static_cast<std::int64_t>(std::ceil(length / step));
    for (std::int64_t s = 0; s < segments; ++s) {
        const double a = ray.near + static_cast<double>(s) * step;
        const double b = std::min(a + step, ray.far);
        if (!(b > a)) {
            break;
        }
        const double t = 0.5 * (a + b);
        if (occupancy && !occupancy->query_unit(bounds.to_unit(ray.origin + ray.dir * t))) {
            continue;
        }
        out.t.push_back(t);
        out.delta.push_back(b - a);
    }
}

} // namespace dynmap::render
