// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/occ/occupancy.hpp>

#include <dynmap/core/parallel.hpp>
#include <dynmap/hyper/model.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <string>

namespace dynmap::occ {

OccupancyVolume::OccupancyVolume(GridDims dims, int frame, double threshold)
    : dims_(dims), frame_(frame), threshold_(static_cast<float>(threshold)) {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1 || dims.nx > 65535 || dims.ny > 65535 || dims.nz > 65535) {
        throw std::invalid_argument("occupancy resolution must be in [1, 65535] per axis");
    }
    if (frame < 0 || frame > 65535) {
        throw std::invalid_argument("occupancy frame index must fit 16 bits");
    }
    bits_.assign(payload_bytes(dims), 0);
}

bool OccupancyVolume::get(int i, int j, int k) const {
    const auto b = index(i, j, k);
    return (bits_[static_cast<std::size_t>(b >> 3)] >> (b & 7)) & 1u;
}

void OccupancyVolume::set(int i, int j, int k, bool value) {
    const auto b = index(i, j, k);
    auto& byte = bits_[static_cast<std::size_t>(b >> 3)];
    const auto mask = static_cast<std::uint8_t>(1u << (b & 7));
    byte = value ? static_cast<std::uint8_t>(byte | mask) : static_cast<std::uint8_t>(byte & ~mask);
}

bool OccupancyVolume::query_unit(const Vec3& u) const {
    if (!(u.x >= 0 && u.x <= 1 && u.y >= 0 && u.y <= 1 && u.z >= 0 && u.z <= 1)) {
        return false;
    }
    auto bin = [](double x, int n) { return std::min(static_cast<int>(x * n), n - 1); };
    return get(bin(u.x, dims_.nx), bin(u.y, dims_.ny), bin(u.z, dims_.nz));
}

std::int64_t OccupancyVolume::count() const {
    std::int64_t n = 0;
    for (auto b : bits_) {
        n += std::popcount(b);
    }
    return n;
}

std::vector<Vec3> subgrid_points(const GridDims& dims, int i, int j, int k) {
    std::vector<Vec3> pts;
    pts.reserve(kSubgrid * kSubgrid * kSubgrid);
    for (int c = 0; c < kSubgrid; ++c) {
        for (int b = 0; b < kSubgrid; ++b) {
            for (int a = 0; a < kSubgrid; ++a) {
                pts.push_back({(i + (a + 0.5) / kSubgrid) / dims.nx, (j + (b + 0.5) / kSubgrid) / dims.ny,
                               (k + (c + 0.5) / kSubgrid) / dims.nz});
            }
        }
    }
    return pts;
}

OccupancyVolume build(const DensityField& density, GridDims dims, int frame, double threshold, int threads) {
    OccupancyVolume vol(dims, frame, threshold);
    // One z-slab of voxels per task keeps batches large enough for the field.
    std::vector<std::vector<char>> slabs(static_cast<std::size_t>(dims.nz));
    parallel_for(dims.nz, threads, [&](std::int64_t k) {
        std::vector<Vec3> pts;
        pts.reserve(static_cast<std::size_t>(dims.nx * dims.ny) * kSubgrid * kSubgrid * kSubgrid);
        for (int j = 0; j < dims.ny; ++j) {
            for (int i = 0; i < dims.nx; ++i) {
                const auto sub = subgrid_points(dims, i, j, static_cast<int>(k));
                pts.insert(pts.end(), sub.begin(), sub.end());
            }
        }
        const auto sigma = density(pts);
        if (sigma.size() != pts.size()) {
            throw std::logic_error("density field returned the wrong number of values");
        }
        auto& slab = slabs[static_cast<std::size_t>(k)];
        slab.assign(static_cast<std::size_t>(dims.nx * dims.ny), 0);
        constexpr std::size_t per = kSubgrid * kSubgrid * kSubgrid;
        for (std::size_t v = 0; v < slab.size(); ++v) {
            slab[v] = std::any_of(sigma.begin() + static_cast<std::ptrdiff_t>(v * per),
                                  sigma.begin() + static_cast<std::ptrdiff_t>((v + 1) * per),
                                  [threshold](double s) { return s > threshold; });
        }
    });
    for (int k = 0; k < dims.nz; ++k) {
        for (int j = 0; j < dims.ny; ++j) {
            for (int i = 0; i < dims.nx; ++i) {
                if (slabs[static_cast<std::size_t>(k)][static_cast<std::size_t>(j * dims.nx + i)]) {
                    vol.set(i, j, k, true);
                }
            }
        }
    }
    return vol;
}

OccupancyVolume build(const hyper::Model& model, const maps::MlpMapSet& set, GridDims dims, double threshold,
                      int threads) {
    return build([&](std::span<const Vec3> pts) { return model.density(set, pts); }, dims, set.frame, threshold,
                 threads);
}

std::size_t payload_bytes(const GridDims& dims) { return static_cast<std::size_t>((dims.voxels() + 7) / 8); }

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

} // namespace

std::vector<std::uint8_t> serialize(const OccupancyVolume& vol) {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + vol.bits().size());
    out.push_back('O');
    out.push_back('C');
    put_u16(out, kFormatVersion);
    put_u16(out, static_cast<std::uint16_t>(vol.dims().nx));
    put_u16(out, static_cast<std::uint16_t>(vol.dims().ny));
    put_u16(out, static_cast<std::uint16_t>(vol.dims().nz));
    put_u16(out, static_cast<std::uint16_t>(vol.frame()));
    const auto tau = std::bit_cast<std::uint32_t>(static_cast<float>(vol.threshold()));
    for (int s = 0; s < 32; s += 8) {
        out.push_back(static_cast<std::uint8_t>((tau >> s) & 0xff));
    }
    out.insert(out.end(), vol.bits().begin(), vol.bits().end());
    return out;
}

OccupancyVolume deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes) {
        throw std::runtime_error("occupancy stream too short for header: " + std::to_string(bytes.size()) +
                                 " bytes");
    }
    if (bytes[0] != 'O' || bytes[1] != 'C') {
        throw std::runtime_error("occupancy stream has bad magic");
    }
    const auto version = get_u16(bytes.data() + 2);
    if (version != kFormatVersion) {
        throw std::runtime_error("unsupported occupancy format version " + std::to_string(version));
    }
    const GridDims dims{get_u16(bytes.data() + 4), get_u16(bytes.data() + 6), get_u16(bytes.data() + 8)};
    const int frame = get_u16(bytes.data() + 10);
    std::uint32_t tau = 0;
    for (int s = 0; s < 4; ++s) {
        tau |= static_cast<std::uint32_t>(bytes[12 + static_cast<std::size_t>(s)]) << (8 * s);
    }
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
        throw std::runtime_error("occupancy header has a zero resolution");
    }
    const std::size_t expect = kHeaderBytes + payload_bytes(dims);
    if (bytes.size() != expect) {
        throw std::runtime_error("occupancy stream length " + std::to_string(bytes.size()) + " does not match the " +
                                 std::to_string(expect) + " bytes implied by its header");
    }
    OccupancyVolume vol(dims, frame, std::bit_cast<float>(tau));
    for (int k = 0; k < dims.nz; ++k)
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i) {
                const auto b = vol.index(i, j, k);
                if ((bytes[kHeaderBytes + static_cast<std::size_t>(b >> 3)] >> (b & 7)) & 1u) {
                    vol.set(i, j, k, true);
                }
            }
    return vol;
}

void save(const OccupancyVolume& vol, const std::filesystem::path& path) {
    const auto bytes = serialize(vol);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

OccupancyVolume load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace dynmap::occ
