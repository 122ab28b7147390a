// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace dynmap::render {

/// Pinhole camera. Camera axes follow the x-right, y-down, z-forward
/// convention; `rotation` and `position` map camera to world coordinates.
/// Pixel (x, y) has its center at image coordinates (x, y).
struct Camera {
    int width = 0;
    int height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Mat3 rotation = identity3();
    Vec3 position;

    /// Throws std::invalid_argument on non-positive focal lengths or image
    /// size, or a rotation that is not orthonormal within 1e-6.
    void validate() const;

    /// Camera at `eye` looking at `target`; `fov_y_deg` is the vertical field
    /// of view and the principal point sits at the image center.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                          double fov_y_deg);

    /// Unit world-space direction through the pixel coordinates (px, py).
    Vec3 direction(double px, double py) const;

    /// Image coordinates of a world point, or nothing if it is behind the camera.
    std::optional<std::array<double, 2>> project(const Vec3& world) const;

    /// Row-major 3x3 intrinsics and 3x4 [R | t] world-from-camera extrinsics.
    std::array<double, 9> intrinsics_matrix() const;
    std::array<double, 12> extrinsics_matrix() const;
    static Camera from_matrices(int width, int height, std::span<const double> k, std::span<const double> rt);
};

struct Ray {
    Vec3 origin;
    Vec3 dir;
    double near = 0;
    double far = 0;
    bool hit = false;
};

/// Entry/exit ray parameters against the box, with entry clamped at 0.
std::optional<std::pair<double, double>> intersect_box(const Vec3& origin, const Vec3& dir, const SceneBounds& box);

Ray make_ray(const Camera& cam, double px, double py, const SceneBounds& bounds);

struct Pixel {
    int x = 0;
    int y = 0;
};

/// One ray per pixel, in the given order. Throws on degenerate intrinsics
/// or pixels outside the image.
std::vector<Ray> gen_rays(const Camera& cam, std::span<const Pixel> pixels, const SceneBounds& bounds);
/// All pixels in row-major order.
std::vector<Ray> gen_rays(const Camera& cam, const SceneBounds& bounds);

} // namespace dynmap::render
