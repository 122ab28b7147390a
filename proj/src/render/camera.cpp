// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/render/camera.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dynmap::render {

void Camera::validate() const {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("camera image size must be positive");
    }
    if (!(fx > 0) || !(fy > 0) || !std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) ||
        !std::isfinite(cy)) {
        throw std::invalid_argument("camera intrinsics are degenerate (fx, fy must be positive and finite)");
    }
    if (!(orthonormality_error(rotation) <= 1e-6)) {
        throw std::invalid_argument("camera rotation is not orthonormal");
    }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double fov_y_deg) {
    if (!(fov_y_deg > 0 && fov_y_deg < 180)) {
        throw std::invalid_argument("field of view must lie in (0, 180) degrees");
    }
    const Vec3 forward = target - eye;
    if (norm(forward) == 0) {
        throw std::invalid_argument("look_at: eye and target coincide");
    }
    const Vec3 z = normalized(forward);
    const Vec3 side = cross(z, up);
    if (norm(side) < 1e-12) {
        throw std::invalid_argument("look_at: up vector is parallel to the viewing direction");
    }
    const Vec3 x = normalized(side);
    const Vec3 y = cross(z, x);
    Camera c;
    c.width = width;
    c.height = height;
    c.fy = 0.5 * height / std::tan(0.5 * fov_y_deg * std::numbers::pi / 180.0);
    c.fx = c.fy;
    c.cx = 0.5 * (width - 1);
    c.cy = 0.5 * (height - 1);
    // Columns are the camera axes expressed in world coordinates.
    c.rotation = {x.x, y.x, z.x, x.y, y.y, z.y, x.z, y.z, z.z};
    c.position = eye;
    c.validate();
    return c;
}

Vec3 Camera::direction(double px, double py) const {
    return normalized(mul(rotation, Vec3{(px - cx) / fx, (py - cy) / fy, 1.0}));
}

std::optional<std::array<double, 2>> Camera::project(const Vec3& world) const {
    const Vec3 p = mul_transposed(rotation, world - position);
    if (p.z <= 0) {
        return std::nullopt;
    }
    return std::array<double, 2>{fx * p.x / p.z + cx, fy * p.y / p.z + cy};
}

std::array<double, 9> Camera::intrinsics_matrix() const { return {fx, 0, cx, 0, fy, cy, 0, 0, 1}; }

std::array<double, 12> Camera::extrinsics_matrix() const {
    const auto& r = rotation;
    return {r[0], r[1], r[2], position.x, r[3], r[4], r[5], position.y, r[6], r[7], r[8], position.z};
}

Camera Camera::from_matrices(int width, int height, std::span<const double> k, std::span<const double> rt) {
    if (k.size() != 9 || rt.size() != 12) {
        throw std::invalid_argument("camera matrices must have 9 and 12 entries");
    }
    if (k[1] != 0 || k[3] != 0 || k[6] != 0 || k[7] != 0 || k[8] != 1) {
        throw std::invalid_argument("intrinsics must be [fx 0 cx; 0 fy cy; 0 0 1]");
    }
    Camera c;
    c.width = width;
    c.height = height;
    c.fx = k[0];
    c.cx = k[2];
    c.fy = k[4];
    c.cy = k[5];
    c.rotation = {rt[0], rt[1], rt[2], rt[4], rt[5], rt[6], rt[8], rt[9], rt[10]};
    c.position = {rt[3], rt[7], rt[11]};
    c.validate();
    return c;
}

std::optional<std::pair<double, double>> intersect_box(const Vec3& origin, const Vec3& dir, const SceneBounds& box) {
    double t0 = 0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = origin[a], d = dir[a];
        const double lo = box.min[a], hi = box.max[a];
        if (d == 0) {
            if (o < lo || o > hi) {
                return std::nullopt;
            }
            continue;
        }
        double ta = (lo - o) / d, tb = (hi - o) / d;
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (!(t0 < t1)) {
        return std::nullopt;
    }
    return std::pair{t0, t1};
}

Ray make_ray(const Camera& cam, double px, double py, const SceneBounds& bounds) {
    Ray r;
    r.origin = cam.position;
    r.dir = cam.direction(px, py);
    if (const auto hit = intersect_box(r.origin, r.dir, bounds)) {
        r.near = hit->first;
        r.far = hit->second;
        r.hit = true;
    }
    return r;
}

std::vector<Ray> gen_rays(const Camera& cam, std::span<const Pixel> pixels, const SceneBounds& bounds) {
    cam.validate();
    std::vector<Ray> rays;
    rays.reserve(pixels.size());
    for (const Pixel& p : pixels) {
        if (p.x < 0 || p.y < 0 || p.x >= cam.width || p.y >= cam.height) {
            throw std::out_of_range("pixel (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                    ") outside the image");
        }
        rays.push_back(make_ray(cam, p.x, p.y, bounds));
    }
    return rays;
}

std::vector<Ray> gen_rays(const Camera& cam, const SceneBounds& bounds) {
    cam.validate();
    std::vector<Ray> rays;
    rays.reserve(static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height));
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            rays.push_back(make_ray(cam, x, y, bounds));
        }
    }
    return rays;
}

} // namespace dynmap::render
