// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/enc/direction.hpp>

#include <dynmap/core/log.hpp>

#include <atomic>
#include <numbers>
#include <stdexcept>

namespace dynmap::enc {

namespace {
std::atomic<bool> g_warned{false};
}

std::array<double, kDirEncodedDim> dir_encode(const Vec3& d) {
    const double len = norm(d);
    if (!(len > 0)) {
        throw std::invalid_argument("dir_encode: zero-length direction");
    }
    Vec3 u = d;
    if (std::abs(len - 1.0) > 1e-6) {
        u = d / len;
        if (!g_warned.exchange(true)) {
            log_warn("dir_encode: non-unit view direction normalized");
        }
    }
    std::array<double, kDirEncodedDim> out{};
    out[0] = u.x;
    out[1] = u.y;
    out[2] = u.z;
    int at = 3;
    for (int f = 0; f < kDirFrequencies; ++f) {
        const double scale = std::numbers::pi * static_cast<double>(1 << f);
        for (int k = 0; k < 3; ++k) {
            out[static_cast<std::size_t>(at + k)] = std::sin(scale * u[k]);
            out[static_cast<std::size_t>(at + 3 + k)] = std::cos(scale * u[k]);
        }
        at += 6;
    }
    return out;
}

diff::Tensor dir_encode(std::span<const Vec3> dirs) {
    diff::Tensor out = diff::Tensor::zeros({static_cast<std::int64_t>(dirs.size()), kDirEncodedDim});
    diff::dispatch(out.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto o = out.data<T>();
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            const auto e = dir_encode(dirs[i]);
            for (int k = 0; k < kDirEncodedDim; ++k) {
                o[i * kDirEncodedDim + static_cast<std::size_t>(k)] = static_cast<T>(e[static_cast<std::size_t>(k)]);
            }
        }
    });
    return out;
}

} // namespace dynmap::enc
