// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/io/dataset.hpp>
#include <dynmap/render/composite.hpp>
#include <dynmap/render/renderer.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dynmap::io {

/// Sphere (radius in size.x) or box (half extents in size) with constant
/// interior density, translating linearly in normalized time.
struct Primitive {
    enum class Kind { sphere, box };
    Kind kind = Kind::sphere;
    Vec3 center;     ///< position at t = 0.5
    Vec3 velocity;   ///< displacement per unit of normalized time
    Vec3 size;
    double sigma = 10;
    render::Rgb color{1, 1, 1};

    Vec3 center_at(double t) const { return center + velocity * (t - 0.5); }
    bool contains(const Vec3& p, double t) const;
    /// Parameter interval of the ray inside the primitive, if any.
    std::optional<std::pair<double, double>> chord(const Vec3& origin, const Vec3& dir, double t) const;
};

/// Analytic time-varying scene: densities add where primitives overlap and
/// colors mix in proportion to density.
struct SyntheticScene {
    SceneBounds bounds{{-0.5, -0.5, -1.0}, {0.5, 0.5, 1.0}};
    int frames = 3;
    std::vector<Primitive> primitives;
    /// Adds a direction-dependent shade on top of the base colors.
    bool view_tint = false;
    std::uint64_t seed = 0;

    double time(int frame) const { return frames > 1 ? static_cast<double>(frame) / (frames - 1) : 0.0; }
    double sigma(const Vec3& p, int frame) const;
    render::Rgb color(const Vec3& p, const Vec3& dir, int frame) const;

    /// A few primitives placed at random inside the bounds.
    static SyntheticScene random(std::uint64_t seed, int frames, int count);
};

struct OracleSample {
    double t = 0;
    double delta = 0;
    double sigma = 0;
    render::Rgb color{0, 0, 0};
};

/// The march of oracle_render along one ray: steps of
/// diagonal / (256 * step_factor), cut at primitive surfaces.
std::vector<OracleSample> oracle_samples(const SyntheticScene& scene, const render::Ray& ray, int frame,
                                         int step_factor = 4);

/// Renders the analytic field by brute-force marching with
/// diagonal / (256 * step_factor) steps. Steps are further cut at primitive
/// surfaces so each piece has constant density and color.
render::Image oracle_render(const SyntheticScene& scene, const render::Camera& cam, int frame,
                            int step_factor = 4, const render::Rgb& background = {0, 0, 0});

struct SynthSpec {
    int frames = 3;
    int cameras = 12;
    int resolution = 128;
    std::uint64_t seed = 7;
    int primitives = 3;
    bool view_tint = false;
    int step_factor = 4;
    double fov_y_deg = 50;
};

/// Cameras on a ring around the scene center, alternating slightly above
/// and below the equator. `phase` rotates the ring (in units of spacing).
std::vector<render::Camera> ring_cameras(const SceneBounds& bounds, int count, int resolution, double fov_y_deg,
                                         double phase = 0);

/// Writes images/fFFF_cCC.png (RGBA, alpha = opacity) and manifest.json.
Dataset gen_synthetic(const SynthSpec& spec, const std::filesystem::path& root);
Dataset gen_synthetic(const SynthSpec& spec, const SyntheticScene& scene, const std::filesystem::path& root);

} // namespace dynmap::io
