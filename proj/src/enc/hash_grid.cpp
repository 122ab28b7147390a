// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/enc/hash_grid.hpp>

#include <dynmap/core/init.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dynmap::enc {

void HashGridConfig::validate() const {
    if (levels < 1 || features < 1 || log2_table_size < 1 || log2_table_size > 30 || min_resolution < 1 ||
        max_resolution < min_resolution) {
        throw std::invalid_argument("invalid hash grid configuration");
    }
}

std::vector<int> level_resolutions(const HashGridConfig& config) {
    config.validate();
    std::vector<int> res(static_cast<std::size_t>(config.levels));
    if (config.levels == 1) {
        res[0] = config.min_resolution;
        return res;
    }
    const double growth = std::pow(static_cast<double>(config.max_resolution) / config.min_resolution,
                                   1.0 / (config.levels - 1));
    for (int l = 0; l < config.levels; ++l) {
        res[static_cast<std::size_t>(l)] = static_cast<int>(std::lround(config.min_resolution * std::pow(growth, l)));
    }
    return res;
}

HashTableSet::HashTableSet(const HashGridConfig& config, std::uint64_t seed)
    : config_(config), resolutions_(level_resolutions(config)) {
    Rng rng(seed);
    for (auto& t : tables_) {
        t = diff::Tensor::zeros({config.levels, config.table_size(), config.features}, true);
        uniform_fill(t, -1e-4, 1e-4, rng);
    }
}

namespace {

struct Corner {
    std::uint32_t slot;
    double weight;
};

// The time coordinate is shared by a whole batch, so its cell and hash term
// are fixed per level.
struct LevelTime {
    int res;
    std::uint32_t th[2];
    double ft;
};

std::vector<LevelTime> level_times(const std::vector<int>& res, double t) {
    std::vector<LevelTime> out;
    for (const int r : res) {
        const double x = t * r;
        const double fl = std::min(std::floor(x), static_cast<double>(r - 1));
        const auto i = static_cast<std::uint32_t>(fl);
        out.push_back({r, {i * 805459861u, (i + 1) * 805459861u}, x - fl});
    }
    return out;
}

// Same slots as hash_vertex: table sizes are powers of two, so masking
// equals its modulo.
inline void level_corners(double a, double b, const LevelTime& lt, std::uint32_t mask, Corner* out) {
    const double x = a * lt.res, y = b * lt.res;
    const double fx = std::min(std::floor(x), static_cast<double>(lt.res - 1));
    const double fy = std::min(std::floor(y), static_cast<double>(lt.res - 1));
    const auto iu = static_cast<std::uint32_t>(fx);
    const auto iv = static_cast<std::uint32_t>(fy);
    const double wu[2] = {1 - (x - fx), x - fx};
    const double wv[2] = {1 - (y - fy), y - fy};
    const double wt[2] = {1 - lt.ft, lt.ft};
    const std::uint32_t hv[2] = {iv * 2654435761u, (iv + 1) * 2654435761u};
    for (int corner = 0; corner < 8; ++corner) {
        const int du = corner & 1, dv = (corner >> 1) & 1, dt = (corner >> 2) & 1;
        out[corner] = {((iu + du) ^ hv[dv] ^ lt.th[dt]) & mask, wu[du] * wv[dv] * wt[dt]};
    }
}

} // namespace

diff::Tensor hash_encode(const HashTableSet& tables, std::span<const Vec3> points, double t) {
    const auto& cfg = tables.config();
    const int levels = cfg.levels;
    const int nf = cfg.features;
    const auto tsize = static_cast<std::uint32_t>(cfg.table_size());
    const auto n = static_cast<std::int64_t>(points.size());
    const diff::Dtype dtype = tables.table(Plane::XY).dtype();
    auto times = level_times(tables.resolutions(), std::clamp(t, 0.0, 1.0));

    // Projected coordinates per plane, u then v.
    std::vector<double> uv(points.size() * 6);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 c = clamp_unit(points[i]);
        for (int p = 0; p < 3; ++p) {
            const auto q = project(kOrthogonalPlanes[static_cast<std::size_t>(p)], c);
            uv[(static_cast<std::size_t>(p) * points.size() + i) * 2] = q[0];
            uv[(static_cast<std::size_t>(p) * points.size() + i) * 2 + 1] = q[1];
        }
    }

    // Level-major sweeps keep one level's table slice hot in cache.
    diff::Tensor out = diff::Tensor::zeros({n, cfg.encoded_dim()}, dtype);
    diff::dispatch(dtype, [&](auto tag) {
        using T = decltype(tag);
        T* o = out.data<T>().data();
        const std::int64_t stride = std::int64_t{levels} * nf;
        Corner corners[8];
        for (int p = 0; p < 3; ++p) {
            const T* table = tables.table(kOrthogonalPlanes[static_cast<std::size_t>(p)]).template data<T>().data();
            const double* puv = uv.data() + static_cast<std::size_t>(p) * points.size() * 2;
            for (int l = 0; l < levels; ++l) {
                const T* level = table + static_cast<std::int64_t>(l) * tsize * nf;
                const auto& lt = times[static_cast<std::size_t>(l)];
                for (std::int64_t i = 0; i < n; ++i) {
                    level_corners(puv[i * 2], puv[i * 2 + 1], lt, tsize - 1, corners);
                    T* row = o + i * stride + l * nf;
                    for (const auto& c : corners) {
                        const T* e = level + static_cast<std::int64_t>(c.slot) * nf;
                        const T w = static_cast<T>(c.weight);
                        for (int f = 0; f < nf; ++f) {
                            row[f] += w * e[f];
                        }
                    }
                }
            }
        }
    });

    const auto& tv = tables.tables();
    diff::Tensor::record(
        out, {tv[0], tv[1], tv[2]},
        [uv = std::move(uv), times = std::move(times), n, levels, nf, tsize](
            const diff::Buffer& g, const diff::Buffer&, std::span<diff::Buffer* const> gi) {
            diff::dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* gp = g.span<T>().data();
                const std::int64_t stride = std::int64_t{levels} * nf;
                Corner corners[8];
                for (int p = 0; p < 3; ++p) {
                    if (!gi[static_cast<std::size_t>(p)]) {
                        continue;
                    }
                    T* dtable = gi[static_cast<std::size_t>(p)]->span<T>().data();
                    const double* puv = uv.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(n) * 2;
                    for (int l = 0; l < levels; ++l) {
                        T* level = dtable + static_cast<std::int64_t>(l) * tsize * nf;
                        const auto& lt = times[static_cast<std::size_t>(l)];
                        for (std::int64_t i = 0; i < n; ++i) {
                            level_corners(puv[i * 2], puv[i * 2 + 1], lt, tsize - 1, corners);
                            const T* grow = gp + i * stride + l * nf;
                            for (const auto& c : corners) {
                                T* e = level + static_cast<std::int64_t>(c.slot) * nf;
                                const T w = static_cast<T>(c.weight);
                                for (int f = 0; f < nf; ++f) {
                                    e[f] += w * grow[f];
                                }
                            }
                        }
                    }
                }
            });
        },
        "hash_encode");
    return out;
}

std::vector<double> hash_encode(const HashTableSet& tables, const Vec3& point, double t) {
    diff::NoGradGuard guard;
    return hash_encode(tables, std::span<const Vec3>(&point, 1), t).values();
}

} // namespace dynmap::enc
