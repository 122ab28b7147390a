// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>

#include <array>
#include <cstdint>
#include <string_view>

namespace dynmap::enc {

/// Axis-aligned projection planes, in the fixed order used for channel groups.
enum class Plane : std::uint8_t { XY = 0, XZ = 1, YZ = 2 };

inline constexpr std::array<Plane, 3> kOrthogonalPlanes{Plane::XY, Plane::XZ, Plane::YZ};

constexpr std::string_view plane_name(Plane p) {
    switch (p) {
    case Plane::XY: return "XY";
    case Plane::XZ: return "XZ";
    case Plane::YZ: return "YZ";
    }
    return "?";
}

/// Orthographic projection (u, v) of p onto the plane.
constexpr std::array<double, 2> project(Plane plane, const Vec3& p) {
    switch (plane) {
    case Plane::XY: return {p.x, p.y};
    case Plane::XZ: return {p.x, p.z};
    case Plane::YZ: return {p.y, p.z};
    }
    return {0, 0};
}

} // namespace dynmap::enc
