// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>
#include <dynmap/diff/tensor.hpp>
#include <dynmap/enc/plane.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dynmap::enc {

struct HashGridConfig {
    int levels = 19;
    int log2_table_size = 16;
    int features = 2;
    int min_resolution = 16;
    int max_resolution = 512;

    int encoded_dim() const { return levels * features; }
    std::int64_t table_size() const { return std::int64_t{1} << log2_table_size; }
    void validate() const;
};

/// Per-level lattice resolutions: geometric progression from min to max
/// resolution, rounded to integers. Shared by all three tables.
std::vector<int> level_resolutions(const HashGridConfig& config);

/// Spatial hash of an integer (u, v, t) lattice vertex into [0, table_size).
constexpr std::uint32_t hash_vertex(std::uint32_t u, std::uint32_t v, std::uint32_t t, std::uint32_t table_size) {
    return (u * 1u ^ v * 2654435761u ^ t * 805459861u) % table_size;
}

/// Three multi-level hash tables h_xy, h_xz, h_yz over (u, v, t).
///
/// Each table is a learnable tensor of shape [levels x table_size x features].
class HashTableSet {
public:
    HashTableSet() = default;
    /// Entries start uniform in (-1e-4, 1e-4).
    HashTableSet(const HashGridConfig& config, std::uint64_t seed);

    const HashGridConfig& config() const { return config_; }
    const std::vector<int>& resolutions() const { return resolutions_; }

    diff::Tensor& table(Plane p) { return tables_[static_cast<int>(p)]; }
    const diff::Tensor& table(Plane p) const { return tables_[static_cast<int>(p)]; }
    std::array<diff::Tensor, 3>& tables() { return tables_; }
    const std::array<diff::Tensor, 3>& tables() const { return tables_; }

private:
    HashGridConfig config_;
    std::vector<int> resolutions_;
    std::array<diff::Tensor, 3> tables_;
};

/// Sum over the three planes of the per-level trilinear hash lookups of
/// (u, v, t). Points are unit-cube coordinates and are clamped, as is t.
/// Returns [N x levels*features]; differentiable with respect to the tables.
diff::Tensor hash_encode(const HashTableSet& tables, std::span<const Vec3> points, double t);

/// Single-point convenience form of hash_encode.
std::vector<double> hash_encode(const HashTableSet& tables, const Vec3& point, double t);

} // namespace dynmap::enc
