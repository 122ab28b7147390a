// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace dynmap::hyper {
class Model;
}
namespace dynmap::maps {
struct MlpMapSet;
}

namespace dynmap::occ {

inline constexpr double kDefaultThreshold = 5.0;
inline constexpr int kSubgrid = 5;

struct GridDims {
    int nx = 24;
    int ny = 24;
    int nz = 48;

    std::int64_t voxels() const { return std::int64_t{nx} * ny * nz; }
    friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Bit-packed occupancy over the unit cube of a scene box. Voxel (i, j, k)
/// is bit i + nx*(j + ny*k), least significant bit first.
class OccupancyVolume {
public:
    OccupancyVolume() = default;
    OccupancyVolume(GridDims dims, int frame, double threshold);

    const GridDims& dims() const { return dims_; }
    int frame() const { return frame_; }
    /// Stored at single precision, as in the file header.
    double threshold() const { return threshold_; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    std::int64_t index(int i, int j, int k) const { return i + std::int64_t{dims_.nx} * (j + std::int64_t{dims_.ny} * k); }
    bool get(int i, int j, int k) const;
    void set(int i, int j, int k, bool value);

    /// Floor binning of a unit-cube point with the top faces clamped into
    /// the last voxel; points outside the cube are unoccupied.
    bool query_unit(const Vec3& u) const;
    std::int64_t count() const;

    friend bool operator==(const OccupancyVolume&, const OccupancyVolume&) = default;

private:
    GridDims dims_;
    int frame_ = 0;
    float threshold_ = static_cast<float>(kDefaultThreshold);
    std::vector<std::uint8_t> bits_;
};

/// Activated density at unit-cube points.
using DensityField = std::function<std::vector<double>(std::span<const Vec3>)>;

/// A voxel is occupied iff any point of its 5x5x5 interior lattice (offsets
/// (k + 0.5)/5) has density above `threshold`.
OccupancyVolume build(const DensityField& density, GridDims dims, int frame, double threshold = kDefaultThreshold,
                      int threads = 1);
OccupancyVolume build(const hyper::Model& model, const maps::MlpMapSet& set, GridDims dims = {},
                      double threshold = kDefaultThreshold, int threads = 1);

/// Unit-cube coordinates of the subgrid points of voxel (i, j, k).
std::vector<Vec3> subgrid_points(const GridDims& dims, int i, int j, int k);

inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::uint16_t kFormatVersion = 1;

std::size_t payload_bytes(const GridDims& dims);

/// 16-byte little-endian header ("OC", version u16, nx/ny/nz u16, frame u16,
/// threshold f32) followed by the packed bits.
std::vector<std::uint8_t> serialize(const OccupancyVolume& vol);
/// Throws std::runtime_error on bad magic, unknown version or wrong length.
OccupancyVolume deserialize(std::span<const std::uint8_t> bytes);

void save(const OccupancyVolume& vol, const std::filesystem::path& path);
OccupancyVolume load(const std::filesystem::path& path);

} // namespace dynmap::occ
