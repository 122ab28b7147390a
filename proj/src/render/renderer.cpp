// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/render/renderer.hpp>

#include <dynmap/core/parallel.hpp>
#include <dynmap/diff/ops.hpp>
#include <dynmap/enc/direction.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dynmap::render {

namespace {

// Upper bound on samples evaluated together inside a tile.
constexpr std::size_t kSampleBudget = std::size_t{1} << 16;

struct TileJob {
    int x0, y0, x1, y1;
};

// Renders rays [begin, end) of `rays` into `pixels` entries.
void render_batch(const hyper::Model& model, const maps::MlpMapSet& set, const RenderOptions& opt,
                  std::span<const Ray> rays, std::span<const RaySamples> samples, std::span<const std::size_t> pixel,
                  Image& img, RenderStats& stats) {
    const SceneBounds& bounds = model.bounds();
    std::vector<Vec3> pts;
    std::vector<double> delta;
    std::vector<std::int64_t> offsets{0};
    for (std::size_t r = 0; r < rays.size(); ++r) {
        for (std::size_t i = 0; i < samples[r].size(); ++i) {
            pts.push_back(bounds.to_unit(rays[r].origin + rays[r].dir * samples[r].t[i]));
            delta.push_back(samples[r].delta[i]);
        }
        offsets.push_back(static_cast<std::int64_t>(pts.size()));
    }
    std::vector<double> color(rays.size() * 3, 0.0), opacity(rays.size(), 0.0);
    if (!pts.empty()) {
        const diff::Tensor features = model.features(set, pts);
        const auto sigma = diff::softplus(maps::density_logits(set, pts, features)).values();
        stats.density_evals += static_cast<std::int64_t>(pts.size());

        std::vector<double> weights(pts.size());
        std::vector<double> ray_w;
        std::vector<std::int64_t> selected;
        std::vector<Vec3> sel_pts, sel_dirs;
        for (std::size_t r = 0; r < rays.size(); ++r) {
            const auto b = static_cast<std::size_t>(offsets[r]), e = static_cast<std::size_t>(offsets[r + 1]);
            opacity[r] = composite_weights(std::span(sigma).subspan(b, e - b), std::span(delta).subspan(b, e - b),
                                           ray_w);
            for (std::size_t i = b; i < e; ++i) {
                weights[i] = ray_w[i - b];
                if (!opt.two_stage || weights[i] > opt.tau2) {
                    selected.push_back(static_cast<std::int64_t>(i));
                    sel_pts.push_back(pts[i]);
                    sel_dirs.push_back(rays[r].dir);
                }
            }
        }
        if (!selected.empty()) {
            const diff::Tensor feat = diff::gather_rows(features, selected);
            const diff::Tensor dirs = enc::dir_encode(sel_dirs);
            const auto rgb = diff::sigmoid(maps::color_logits(set, sel_pts, feat, dirs)).values();
            stats.color_evals += static_cast<std::int64_t>(selected.size());
            std::size_t ray = 0;
            for (std::size_t s = 0; s < selected.size(); ++s) {
                const auto i = static_cast<std::size_t>(selected[s]);
                while (static_cast<std::size_t>(offsets[ray + 1]) <= i) {
                    ++ray;
                }
                for (std::size_t c = 0; c < 3; ++c) {
                    color[ray * 3 + c] += weights[i] * rgb[s * 3 + c];
                }
            }
        }
    }
    for (std::size_t r = 0; r < rays.size(); ++r) {
        const std::size_t p = pixel[r];
        for (std::size_t c = 0; c < 3; ++c) {
            img.rgb[p * 3 + c] = static_cast<float>(color[r * 3 + c] + opt.background[c] * (1 - opacity[r]));
        }
        img.alpha[p] = static_cast<float>(opacity[r]);
    }
}

} // namespace

Image render_image(const hyper::Model& model, const maps::MlpMapSet& set, const Camera& cam,
                   const RenderOptions& opt, const occ::OccupancyVolume* occupancy) {
    cam.validate();
    if (opt.use_ess && occupancy == nullptr) {
        throw std::invalid_argument("render_image: empty-space skipping requested without an occupancy volume");
    }
    if (opt.tile < 1) {
        throw std::invalid_argument("render_image: tile size must be positive");
    }
    const double step = opt.step > 0 ? opt.step : infer_step(model.bounds());
    Image img;
    img.width = cam.width;
    img.height = cam.height;
    img.rgb.assign(static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height) * 3, 0.0f);
    img.alpha.assign(static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height), 0.0f);

    std::vector<TileJob> jobs;
    for (int y = 0; y < cam.height; y += opt.tile) {
        for (int x = 0; x < cam.width; x += opt.tile) {
            jobs.push_back({x, y, std::min(x + opt.tile, cam.width), std::min(y + opt.tile, cam.height)});
        }
    }
    std::vector<RenderStats> tile_stats(jobs.size());
    const occ::OccupancyVolume* occ = opt.use_ess ? occupancy : nullptr;
    parallel_for(static_cast<std::int64_t>(jobs.size()), opt.threads, [&](std::int64_t j) {
        diff::NoGradGuard guard;
        const TileJob& job = jobs[static_cast<std::size_t>(j)];
        RenderStats& stats = tile_stats[static_cast<std::size_t>(j)];
        std::vector<Ray> rays;
        std::vector<RaySamples> samples;
        std::vector<std::size_t> pixel;
        std::size_t pending = 0;
        auto flush = [&] {
            render_batch(model, set, opt, rays, samples, pixel, img, stats);
            rays.clear();
            samples.clear();
            pixel.clear();
            pending = 0;
        };
        for (int y = job.y0; y < job.y1; ++y) {
            for (int x = job.x0; x < job.x1; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * static_cast<std::size_t>(cam.width) +
                                      static_cast<std::size_t>(x);
                Ray ray = make_ray(cam, x, y, model.bounds());
                RaySamples s;
                sample_infer(ray, model.bounds(), step, occ, s);
                stats.rays_hit += ray.hit;
                pending += s.size();
                rays.push_back(ray);
                samples.push_back(std::move(s));
                pixel.push_back(p);
                if (pending >= kSampleBudget) {
                    flush();
                }
            }
        }
        flush();
    });
    for (const auto& s : tile_stats) {
        img.stats.rays_hit += s.rays_hit;
        img.stats.density_evals += s.density_evals;
        img.stats.color_evals += s.color_evals;
    }
    return img;
}

diff::Tensor trace_rays(const hyper::Model& model, const maps::MlpMapSet& set, std::span<const Ray> rays,
                        std::span<const RaySamples> samples, const Rgb& background) {
    if (rays.size() != samples.size()) {
        throw std::invalid_argument("trace_rays: one sample list per ray required");
    }
    const SceneBounds& bounds = model.bounds();
    std::vector<Vec3> pts, dirs;
    std::vector<double> delta;
    std::vector<std::int64_t> offsets{0};
    for (std::size_t r = 0; r < rays.size(); ++r) {
        for (std::size_t i = 0; i < samples[r].size(); ++i) {
            pts.push_back(bounds.to_unit(rays[r].origin + rays[r].dir * samples[r].t[i]));
            dirs.push_back(rays[r].dir);
            delta.push_back(samples[r].delta[i]);
        }
        offsets.push_back(static_cast<std::int64_t>(pts.size()));
    }
    const diff::Tensor features = model.features(set, pts);
    const diff::Tensor sigma = diff::softplus(maps::density_logits(set, pts, features));
    const diff::Tensor rgb = diff::sigmoid(maps::color_logits(set, pts, features, enc::dir_encode(dirs)));
    return composite_rays(sigma, rgb, delta, offsets, background);
}

double psnr(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("psnr: images differ in size");
    }
    double se = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        se += d * d;
    }
    if (se == 0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(static_cast<double>(a.size()) / se);
}

std::uint8_t quantize(float v) {
    const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

std::vector<std::uint8_t> to_rgba8(const Image& image) {
    const std::size_t n = image.alpha.size();
    std::vector<std::uint8_t> out(n * 4);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            out[p * 4 + c] = quantize(image.rgb[p * 3 + c]);
        }
        out[p * 4 + 3] = quantize(image.alpha[p]);
    }
    return out;
}

} // namespace dynmap::render
