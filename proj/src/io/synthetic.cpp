// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/io/synthetic.hpp>

#include <dynmap/io/png.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace dynmap::io {

bool Primitive::contains(const Vec3& p, double t) const {
    const Vec3 d = p - center_at(t);
    if (kind == Kind::sphere) {
        return dot(d, d) < size.x * size.x;
    }
    return std::abs(d.x) < size.x && std::abs(d.y) < size.y && std::abs(d.z) < size.z;
}

std::optional<std::pair<double, double>> Primitive::chord(const Vec3& origin, const Vec3& dir, double t) const {
    const Vec3 c = center_at(t);
    if (kind == Kind::sphere) {
        const Vec3 oc = origin - c;
        const double a = dot(dir, dir);
        const double b = dot(oc, dir);
        const double disc = b * b - a * (dot(oc, oc) - size.x * size.x);
        if (disc <= 0) {
            return std::nullopt;
        }
        const double s = std::sqrt(disc);
        return std::pair{(-b - s) / a, (-b + s) / a};
    }
    double lo = -INFINITY, hi = INFINITY;
    for (int i = 0; i < 3; ++i) {
        const double a = c[i] - size[i] - origin[i];
        const double b = c[i] + size[i] - origin[i];
        if (dir[i] == 0) {
            if (a > 0 || b < 0) {
                return std::nullopt;
            }
            continue;
        }
        double t0 = a / dir[i], t1 = b / dir[i];
        if (t0 > t1) {
            std::swap(t0, t1);
        }
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
    }
    if (lo >= hi) {
        return std::nullopt;
    }
    return std::pair{lo, hi};
}

double SyntheticScene::sigma(const Vec3& p, int frame) const {
    const double t = time(frame);
    double s = 0;
    for (const auto& pr : primitives) {
        if (pr.contains(p, t)) {
            s += pr.sigma;
        }
    }
    return s;
}

render::Rgb SyntheticScene::color(const Vec3& p, const Vec3& dir, int frame) const {
    const double t = time(frame);
    render::Rgb c{0, 0, 0};
    double total = 0;
    for (const auto& pr : primitives) {
        if (pr.contains(p, t)) {
            for (int k = 0; k < 3; ++k) {
                c[k] += pr.sigma * pr.color[k];
            }
            total += pr.sigma;
        }
    }
    if (total <= 0) {
        return c;
    }
    for (auto& v : c) {
        v /= total;
    }
    if (view_tint) {
        // light from +x+z; surfaces seen from the lit side look brighter
        const double shade = 0.75 + 0.25 * dot(normalized(dir), normalized(Vec3{-1, 0, -1}));
        for (auto& v : c) {
            v = std::clamp(v * shade, 0.0, 1.0);
        }
    }
    return c;
}

namespace {

double uniform(Rng& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

} // namespace

SyntheticScene SyntheticScene::random(std::uint64_t seed, int frames, int count) {
    if (frames < 1 || count < 0) {
        throw std::invalid_argument("synthetic scene needs at least one frame and a non-negative primitive count");
    }
    SyntheticScene s;
    s.frames = frames;
    s.seed = seed;
    Rng rng(seed);
    static constexpr render::Rgb palette[] = {
        {0.9, 0.2, 0.15}, {0.2, 0.75, 0.3}, {0.2, 0.35, 0.9}, {0.95, 0.8, 0.2}, {0.8, 0.3, 0.85}, {0.2, 0.8, 0.85}};
    for (int i = 0; i < count; ++i) {
        Primitive p;
        p.kind = i % 2 == 0 ? Primitive::Kind::sphere : Primitive::Kind::box;
        if (p.kind == Primitive::Kind::sphere) {
            const double r = uniform(rng, 0.14, 0.22);
            p.size = {r, r, r};
        } else {
            p.size = {uniform(rng, 0.1, 0.16), uniform(rng, 0.1, 0.16), uniform(rng, 0.12, 0.22)};
        }
        // Vertical slots keep the primitives mostly apart.
        const double slot = count > 1 ? -0.6 + 1.2 * i / (count - 1) : 0.0;
        p.center = {uniform(rng, -0.12, 0.12), uniform(rng, -0.12, 0.12), slot + uniform(rng, -0.05, 0.05)};
        p.velocity = {uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15), uniform(rng, -0.1, 0.1)};
        p.sigma = uniform(rng, 15, 30);
        p.color = palette[i % std::size(palette)];
        s.primitives.push_back(p);
    }
    return s;
}

std::vector<OracleSample> oracle_samples(const SyntheticScene& scene, const render::Ray& ray, int frame,
                                         int step_factor) {
    if (step_factor < 4) {
        throw std::invalid_argument("oracle step factor must be at least 4");
    }
    std::vector<OracleSample> out;
    if (!ray.hit) {
        return out;
    }
    const double step = scene.bounds.diagonal() / (render::kInferStepsPerDiagonal * step_factor);
    const double t = scene.time(frame);
    std::vector<double> cuts;
    for (const auto& pr : scene.primitives) {
        if (const auto ch = pr.chord(ray.origin, ray.dir, t)) {
            for (const double c : {ch->first, ch->second}) {
                if (c > ray.near && c < ray.far) {
                    cuts.push_back(c);
                }
            }
        }
    }
    std::sort(cuts.begin(), cuts.end());
    auto next_cut = cuts.begin();
    double a = ray.near;
    while (a < ray.far) {
        double b = std::min(a + step, ray.far);
        while (next_cut != cuts.end() && *next_cut <= a) {
            ++next_cut;
        }
        if (next_cut != cuts.end() && *next_cut < b) {
            b = *next_cut;
        }
        const double m = 0.5 * (a + b);
        const Vec3 mid = ray.origin + ray.dir * m;
        OracleSample s{m, b - a, scene.sigma(mid, frame), {0, 0, 0}};
        if (s.sigma > 0) {
            s.color = scene.color(mid, ray.dir, frame);
        }
        out.push_back(s);
        a = b;
    }
    return out;
}

render::Image oracle_render(const SyntheticScene& scene, const render::Camera& cam, int frame, int step_factor,
                            const render::Rgb& background) {
    if (frame < 0 || frame >= scene.frames) {
        throw std::out_of_range("frame " + std::to_string(frame) + " outside the scene");
    }
    cam.validate();
    render::Image img;
    img.width = cam.width;
    img.height = cam.height;
    const std::size_t n = static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height);
    img.rgb.assign(n * 3, 0.0f);
    img.alpha.assign(n, 0.0f);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
            const auto ray = render::make_ray(cam, x, y, scene.bounds);
            double acc[3] = {0, 0, 0};
            double trans = 1;
            for (const auto& s : oracle_samples(scene, ray, frame, step_factor)) {
                const double keep = std::exp(-s.sigma * s.delta);
                for (int k = 0; k < 3; ++k) {
                    acc[k] += trans * (1 - keep) * s.color[static_cast<std::size_t>(k)];
                }
                trans *= keep;
            }
            for (int k = 0; k < 3; ++k) {
                img.rgb[p * 3 + k] = static_cast<float>(acc[k] + trans * background[static_cast<std::size_t>(k)]);
            }
            img.alpha[p] = static_cast<float>(1 - trans);
        }
    }
    return img;
}

std::vector<render::Camera> ring_cameras(const SceneBounds& bounds, int count, int resolution, double fov_y_deg,
                                         double phase) {
    const Vec3 center = bounds.center();
    const double radius = 1.5 * bounds.diagonal();
    std::vector<render::Camera> cams;
    for (int i = 0; i < count; ++i) {
        const double az = 2 * std::numbers::pi * (i + phase) / count;
        const double el = (i % 2 == 0 ? 12.0 : -12.0) * std::numbers::pi / 180;
        const Vec3 eye = center + Vec3{std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el)} * radius;
        cams.push_back(render::Camera::look_at(eye, center, {0, 0, 1}, resolution, resolution, fov_y_deg));
    }
    return cams;
}

Dataset gen_synthetic(const SynthSpec& spec, const std::filesystem::path& root) {
    return gen_synthetic(spec, SyntheticScene::random(spec.seed, spec.frames, spec.primitives), root);
}

Dataset gen_synthetic(const SynthSpec& spec, const SyntheticScene& scene, const std::filesystem::path& root) {
    if (spec.cameras < 2 || spec.frames < 1 || spec.resolution < 1 || spec.frames != scene.frames) {
        throw std::invalid_argument("degenerate synthetic spec: need >= 2 cameras, >= 1 frame, positive resolution "
                                    "and a scene with matching frame count");
    }
    Dataset d;
    d.root = root;
    d.frames = spec.frames;
    d.bounds = scene.bounds;
    d.masks = MaskMode::alpha;
    const auto cams = ring_cameras(scene.bounds, spec.cameras, spec.resolution, spec.fov_y_deg);
    for (int c = 0; c < spec.cameras; ++c) {
        char name[16];
        std::snprintf(name, sizeof name, "cam%02d", c);
        d.cameras.push_back({name, cams[static_cast<std::size_t>(c)]});
    }
    std::filesystem::create_directories(root / "images");
    for (int f = 0; f < spec.frames; ++f) {
        for (int c = 0; c < spec.cameras; ++c) {
            const auto img = oracle_render(scene, cams[static_cast<std::size_t>(c)], f, spec.step_factor);
            char rel[64];
            std::snprintf(rel, sizeof rel, "images/f%03d_c%02d.png", f, c);
            Image8 out{img.width, img.height, 4, render::to_rgba8(img)};
            write_png(root / rel, out, {{"generator", "dynmap synthetic seed " + std::to_string(spec.seed)}});
            d.images.push_back({f, c, rel, {}});
        }
    }
    write_dataset(d, root);
    return d;
}

} // namespace dynmap::io
