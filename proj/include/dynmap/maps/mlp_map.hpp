// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>
#include <dynmap/diff/tensor.hpp>
#include <dynmap/enc/direction.hpp>
#include <dynmap/enc/plane.hpp>
#include <dynmap/enc/triplane.hpp>

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace dynmap::maps {

using enc::Plane;

enum class Head { density, color };

/// Widths of the per-cell networks. The density net is one bias-free
/// feature->1 layer; the color net is three bias-free layers
/// feature->hidden, (hidden + 15)->hidden, hidden->3 with ReLU in between.
struct MlpShape {
    int feature_dim = 32;
    int hidden_dim = 32;

    int density_params() const { return feature_dim; }
    int color_params() const {
        return hidden_dim * feature_dim + hidden_dim * (hidden_dim + enc::kDirEncodedDim) + 3 * hidden_dim;
    }
    int params(Head head) const { return head == Head::density ? density_params() : color_params(); }
};

struct CellIndex {
    int i = 0;
    int j = 0;
    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// A 2D grid of network parameter vectors aligned with one plane.
/// `cells` is [R*R x P]; cell (i, j) is row i*R + j.
struct MlpMap {
    Plane plane = Plane::XY;
    int resolution = 0;
    int params = 0;
    diff::Tensor cells;

    std::int64_t stored_parameters() const { return cells.defined() ? cells.numel() : 0; }
};

/// Half-open spatial binning of the projected point; the top edge is clamped
/// into the last cell and out-of-cube points are clamped first.
CellIndex bin_lookup(Plane plane, int resolution, const Vec3& p);
inline CellIndex bin_lookup(const MlpMap& map, const Vec3& p) { return bin_lookup(map.plane, map.resolution, p); }

/// One frame's radiance field: density and color maps (one per plane in the
/// configured layout) plus the tri-plane features.
struct MlpMapSet {
    MlpShape shape;
    std::vector<MlpMap> density;
    std::vector<MlpMap> color;
    enc::TriPlaneFeatures triplane;
    int frame = 0;
};

struct DensitySample {
    double sigma = 0; ///< softplus(raw)
    double raw = 0;   ///< sum over planes of the pre-activation outputs
};

/// Direct per-point evaluation; the reference for batched_eval.
DensitySample eval_density(const MlpMapSet& set, std::span<const double> gamma_p, const Vec3& p);
std::array<double, 3> eval_color(const MlpMapSet& set, std::span<const double> gamma_p,
                                 std::span<const double> gamma_d, const Vec3& p);

struct CellGroup {
    CellIndex cell;
    std::vector<std::int64_t> indices;
};

/// Partition of point indices by cell, in ascending cell order. Empty cells
/// are omitted; every index appears exactly once.
std::vector<CellGroup> group_points(const MlpMap& map, std::span<const Vec3> points);

/// Positions (unit cube), unit view directions and the normalized time.
struct PointBatch {
    std::vector<Vec3> positions;
    std::vector<Vec3> directions;
    double time = 0;

    std::size_t size() const { return positions.size(); }
};

/// Grouped evaluation of one head over a batch. Points are grouped per cell
/// and each group runs one small matrix product per layer; outputs come back
/// in input order. Density returns sigma [N], color returns rgb [N x 3].
/// `dir_features` is only read for the color head.
diff::Tensor batched_eval(const MlpMapSet& set, std::span<const Vec3> points, const diff::Tensor& features,
                          const diff::Tensor& dir_features, Head head);

/// Pre-activation forms of batched_eval: raw density [N] and color logits
/// [N x 3], each summed over the planes. Differentiable with respect to the
/// features, the map cells and (color) the direction features.
diff::Tensor density_logits(const MlpMapSet& set, std::span<const Vec3> points, const diff::Tensor& features);
diff::Tensor color_logits(const MlpMapSet& set, std::span<const Vec3> points, const diff::Tensor& features,
                          const diff::Tensor& dir_features);

struct ParameterAudit {
    std::int64_t stored = 0;
    std::int64_t expected = 0;
    bool ok() const { return stored == expected; }
};

/// Compares the stored parameter count with R^2 * P for the map's head.
ParameterAudit audit_parameters(const MlpMap& map, const MlpShape& shape, Head head);

} // namespace dynmap::maps
