// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace dynmap {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    friend constexpr Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
    friend constexpr Vec3 operator*(double s, const Vec3& a) { return a * s; }
    friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

/// Row-major 3x3 matrix.
using Mat3 = std::array<double, 9>;

constexpr Mat3 identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

constexpr Vec3 mul(const Mat3& m, const Vec3& v) {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

constexpr Vec3 mul_transposed(const Mat3& m, const Vec3& v) {
    return {m[0] * v.x + m[3] * v.y + m[6] * v.z, m[1] * v.x + m[4] * v.y + m[7] * v.z,
            m[2] * v.x + m[5] * v.y + m[8] * v.z};
}

/// Max deviation of m^T m from the identity.
inline double orthonormality_error(const Mat3& m) {
    double err = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) {
                s += m[k * 3 + i] * m[k * 3 + j];
            }
            err = std::max(err, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
    }
    return err;
}

/// Axis-aligned scene box in scene units.
struct SceneBounds {
    Vec3 min{-1, -1, -1};
    Vec3 max{1, 1, 1};

    Vec3 extent() const { return max - min; }
    double diagonal() const { return norm(extent()); }
    Vec3 center() const { return (min + max) * 0.5; }
    bool valid() const { return min.x < max.x && min.y < max.y && min.z < max.z; }

    /// Maps a scene point into the unit cube spanned by the box.
    Vec3 to_unit(const Vec3& p) const {
        const Vec3 e = extent();
        return {(p.x - min.x) / e.x, (p.y - min.y) / e.y, (p.z - min.z) / e.z};
    }
    Vec3 from_unit(const Vec3& u) const {
        const Vec3 e = extent();
        return {min.x + u.x * e.x, min.y + u.y * e.y, min.z + u.z * e.z};
    }
};

inline Vec3 clamp_unit(const Vec3& p) {
    return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0), std::clamp(p.z, 0.0, 1.0)};
}

} // namespace dynmap
