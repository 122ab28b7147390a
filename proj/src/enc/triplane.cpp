// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/enc/triplane.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynmap::enc {

namespace {

struct Tap {
    std::int64_t texel[4];
    double weight[4];
};

// Bilinear taps around (u, v) with texel centers at (k + 0.5)/R, clamped to the border.
inline Tap bilinear_taps(double u, double v, int res) {
    auto axis = [res](double x, std::int64_t& i0, double& f) {
        const double c = std::clamp(x * res - 0.5, 0.0, static_cast<double>(res - 1));
        i0 = std::min(static_cast<std::int64_t>(std::floor(c)), static_cast<std::int64_t>(std::max(res - 2, 0)));
        f = c - static_cast<double>(i0);
    };
    std::int64_t i0, j0;
    double fu, fv;
    axis(u, i0, fu);
    axis(v, j0, fv);
    const std::int64_t i1 = std::min<std::int64_t>(i0 + 1, res - 1);
    const std::int64_t j1 = std::min<std::int64_t>(j0 + 1, res - 1);
    return {{i0 * res + j0, i0 * res + j1, i1 * res + j0, i1 * res + j1},
            {(1 - fu) * (1 - fv), (1 - fu) * fv, fu * (1 - fv), fu * fv}};
}

} // namespace

diff::Tensor triplane_sample(const TriPlaneFeatures& planes, std::span<const Vec3> points) {
    const int res = planes.resolution;
    const int ch = planes.channels;
    for (const auto& p : planes.planes) {
        if (!p.defined() || p.ndim() != 2 || p.dim(0) != std::int64_t{res} * res || p.dim(1) != ch) {
            throw std::invalid_argument("triplane_sample: plane tensors must be [R*R x C]");
        }
    }
    const auto n = static_cast<std::int64_t>(points.size());
    const diff::Dtype dtype = planes.planes[0].dtype();
    std::vector<Vec3> pts(points.begin(), points.end());

    diff::Tensor out = diff::Tensor::zeros({n, ch}, dtype);
    diff::dispatch(dtype, [&](auto tag) {
        using T = decltype(tag);
        auto o = out.data<T>();
        for (int p = 0; p < 3; ++p) {
            const Plane plane = kOrthogonalPlanes[static_cast<std::size_t>(p)];
            const T* tex = planes.planes[static_cast<std::size_t>(p)].template data<T>().data();
            for (std::int64_t i = 0; i < n; ++i) {
                const auto uv = project(plane, pts[static_cast<std::size_t>(i)]);
                const Tap tap = bilinear_taps(uv[0], uv[1], res);
                T* row = o.data() + i * ch;
                for (int k = 0; k < 4; ++k) {
                    const T w = static_cast<T>(tap.weight[k]);
                    const T* t = tex + tap.texel[k] * ch;
                    for (int c = 0; c < ch; ++c) {
                        row[c] += w * t[c];
                    }
                }
            }
        }
    });

    diff::Tensor::record(
        out, {planes.planes[0], planes.planes[1], planes.planes[2]},
        [pts = std::move(pts), res, ch](const diff::Buffer& g, const diff::Buffer&,
                                        std::span<diff::Buffer* const> gi) {
            diff::dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto gp = g.span<T>();
                for (int p = 0; p < 3; ++p) {
                    if (!gi[static_cast<std::size_t>(p)]) {
                        continue;
                    }
                    const Plane plane = kOrthogonalPlanes[static_cast<std::size_t>(p)];
                    T* dtex = gi[static_cast<std::size_t>(p)]->span<T>().data();
                    for (std::size_t i = 0; i < pts.size(); ++i) {
                        const auto uv = project(plane, pts[i]);
                        const Tap tap = bilinear_taps(uv[0], uv[1], res);
                        const T* grow = gp.data() + i * static_cast<std::size_t>(ch);
                        for (int k = 0; k < 4; ++k) {
                            const T w = static_cast<T>(tap.weight[k]);
                            T* t = dtex + tap.texel[k] * ch;
                            for (int c = 0; c < ch; ++c) {
                                t[c] += w * grow[c];
                            }
                        }
                    }
                }
            });
        },
        "triplane_sample");
    return out;
}

std::vector<double> triplane_sample(const TriPlaneFeatures& planes, const Vec3& point) {
    diff::NoGradGuard guard;
    return triplane_sample(planes, std::span<const Vec3>(&point, 1)).values();
}

} // namespace dynmap::enc
