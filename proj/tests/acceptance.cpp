// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
// Exit-gate checks. Prints one PASS or FAIL line per criterion and exits
// non-zero if any fails. Run with --quick to skip the training criteria.
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

#include <dynmap/app/cli.hpp>
#include <dynmap/app/http.hpp>
#include <dynmap/app/service.hpp>
#include <dynmap/diff/ops.hpp>
#include <dynmap/enc/direction.hpp>
#include <dynmap/enc/point_embed.hpp>
#include <dynmap/io/checkpoint.hpp>
#include <dynmap/io/png.hpp>
#include <dynmap/io/synthetic.hpp>
#include <dynmap/maps/mlp_map.hpp>
#include <dynmap/occ/occupancy.hpp>
#include <dynmap/render/renderer.hpp>
#include <dynmap/render/sampling.hpp>
#include <dynmap/train/trainer.hpp>

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

using namespace dynmap;
using diff::Tensor;
using dynmap::testing::gradient_error;
using dynmap::testing::random_tensor;
using dynmap::testing::TempDir;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kOpGradTol = 1e-4;
constexpr double kEndToEndGradTol = 1e-3;
constexpr double kGradSuiteSeconds = 120;
constexpr double kGroupedTol = 1e-6;
constexpr double kGroupedSpeedup = 3;
constexpr double kBoxTol = 1e-3;
constexpr double kToyPsnr = 28;
constexpr double kToySeconds = 30 * 60;
constexpr double kEssPsnr = 40;
constexpr double kEssSpeedup = 2;
constexpr int kAblationSeeds = 5;
constexpr int kAblationWins = 4;

// Toy training budget.
constexpr int kToyShrink = 4;
constexpr int kToyEpochs = 50;
constexpr int kToySteps = 10;
constexpr int kToyRays = 256;
constexpr int kHeldOutViews = 4;

// Ablation budget, identical for both layouts.
constexpr int kAblShrink = 8;
constexpr int kAblEpochs = 5;
constexpr int kAblSteps = 20;
constexpr int kAblRays = 128;
constexpr int kAblResolution = 64;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    failures += !pass;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

void gradient_suite() {
    const auto t0 = Clock::now();
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(101);
    double worst = 0;
    const char* worst_op = "";
    auto check = [&](const char* op, double err) {
        if (err > worst) {
            worst = err;
            worst_op = op;
        }
    };
    const std::vector<std::int64_t> idx{2, 0, 2, 1};
    for (int trial = 0; trial < 3; ++trial) {
        Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), row = random_tensor({4}, rng);
        Tensor m = random_tensor({4, 2}, rng), e = random_tensor({2, 4}, rng);
        Tensor pos = random_tensor({3, 4}, rng, 0.1, 1), neg = random_tensor({3, 4}, rng, -1, -0.1);
        Tensor w = random_tensor({3, 4}, rng, -1, 1, false);
        Tensor wt = random_tensor({4, 3}, rng, -1, 1, false);
        Tensor w12 = random_tensor({12}, rng, -1, 1, false);
        auto weighted = [&](const Tensor& t) { return diff::sum(diff::mul(t, w)); };
        check("matmul", gradient_error([&] { return diff::sum_squares(diff::matmul(a, m)); }, {a, m}));
        check("relu", gradient_error([&] { return weighted(diff::relu(pos)); }, {pos}));
        check("relu", gradient_error([&] { return weighted(diff::relu(neg)); }, {neg}));
        check("sigmoid", gradient_error([&] { return weighted(diff::sigmoid(a)); }, {a}));
        check("softplus", gradient_error([&] { return weighted(diff::softplus(a)); }, {a}));
        check("add", gradient_error([&] { return weighted(diff::add(a, row)); }, {a, row}));
        check("sub", gradient_error([&] { return weighted(diff::sub(a, b)); }, {a, b}));
        check("mul", gradient_error([&] { return diff::sum(diff::mul(a, b)); }, {a, b}));
        check("scale", gradient_error([&] { return weighted(diff::scale(a, -2.5)); }, {a}));
        check("sum", gradient_error([&] { return diff::sum(a); }, {a}));
        check("sum_squares", gradient_error([&] { return diff::sum_squares(a); }, {a}));
        check("reshape", gradient_error([&] { return diff::sum(diff::mul(diff::reshape(a, {12}), w12)); }, {a}));
        check("transpose", gradient_error([&] { return diff::sum(diff::mul(diff::transpose(a), wt)); }, {a}));
        check("slice_rows", gradient_error([&] { return diff::sum_squares(diff::slice_rows(a, 1, 3)); }, {a}));
        check("gather_rows", gradient_error([&] { return diff::sum_squares(diff::gather_rows(a, idx)); }, {a}));
        check("scatter_rows",
              gradient_error([&] { return diff::sum_squares(diff::scatter_rows(a, {{1, 3, 0}}, 5)); }, {a}));
        check("concat_rows",
              gradient_error([&] { return diff::sum_squares(diff::concat_rows(std::vector<Tensor>{a, e})); }, {a, e}));

        Tensor x = random_tensor({2, 5, 5}, rng), k = random_tensor({3, 2, 3, 3}, rng), bias = random_tensor({3}, rng);
        Tensor kd = random_tensor({2, 3, 4, 4}, rng);
        const int stride = 1 + trial % 2;
        check("conv2d", gradient_error([&] { return diff::sum_squares(diff::conv2d(x, k, bias, stride, 1)); },
                                       {x, k, bias}));
        check("deconv2d",
              gradient_error([&] { return diff::sum_squares(diff::deconv2d(x, kd, bias, 2, 1)); }, {x, kd, bias}));
    }
    const bool ops_ok = worst < kOpGradTol;

    // One pixel loss through decode, encodings, maps and compositing.
    hyper::Model model(testing::tiny_config());
    const auto cam = render::Camera::look_at({3, 0.4, 0.3}, {0, 0, 0}, {0, 0, 1}, 6, 5, 50);
    const std::vector<render::Pixel> px{{2, 2}, {3, 2}, {1, 3}};
    const auto rays = render::gen_rays(cam, px, model.bounds());
    std::vector<render::RaySamples> samples(rays.size());
    Rng srng(2);
    for (std::size_t r = 0; r < rays.size(); ++r) {
        render::sample_train(rays[r], 16, srng, samples[r]);
    }
    const std::vector<double> target{0.9, 0.1, 0.3, 0.7, 0.2, 0.5, 0.4, 0.4, 0.8, 0.2, 0.6, 0.1};
    Tensor codes = model.latents().codes();
    const double e2e = gradient_error(
        [&] {
            const auto set = model.decode(1);
            const Tensor out = render::trace_rays(model, set, rays, samples, {0, 0, 0});
            return diff::sum_squares(diff::sub(out, Tensor::from({3, 4}, target)));
        },
        {codes});
    // A vanishing gradient would pass the ratio test trivially.
    double gmax = 0;
    for (const double g : codes.grad_values()) {
        gmax = std::max(gmax, std::abs(g));
    }
    const double secs = seconds_since(t0);
    report("gradient-suite", ops_ok && e2e < kEndToEndGradTol && gmax > 1e-8 && secs < kGradSuiteSeconds,
           fmt("worst op rel err %.2e (%s, tol %.0e), end-to-end %.2e (tol %.0e, max |grad| %.1e), %.1f s (limit %.0f s)",
               worst, worst_op, kOpGradTol, e2e, kEndToEndGradTol, gmax, secs, kGradSuiteSeconds));
}

// ---------------------------------------------------------------------------

struct PointInputs {
    std::vector<Vec3> points;
    Tensor features;
    Tensor dirs;
};

PointInputs random_inputs(std::size_t n, int nf, std::mt19937_64& rng) {
    PointInputs in;
    in.points = testing::random_points(n, rng);
    in.features = random_tensor({static_cast<std::int64_t>(n), nf}, rng, -1, 1, false);
    std::normal_distribution<double> g;
    std::vector<Vec3> d(n);
    for (auto& v : d) {
        v = normalized(Vec3{g(rng), g(rng), g(rng)});
    }
    in.dirs = enc::dir_encode(d);
    return in;
}

// Per-point evaluation of both heads, the reference for the grouped kernel.
void loop_eval(const maps::MlpMapSet& set, const PointInputs& in, std::vector<double>& sigma,
               std::vector<double>& rgb) {
    const auto f = in.features.values();
    const auto d = in.dirs.values();
    const std::size_t nf = static_cast<std::size_t>(set.shape.feature_dim);
    sigma.resize(in.points.size());
    rgb.resize(in.points.size() * 3);
    for (std::size_t i = 0; i < in.points.size(); ++i) {
        const std::span<const double> fi(f.data() + i * nf, nf), di(d.data() + i * 15, 15);
        sigma[i] = maps::eval_density(set, fi, in.points[i]).sigma;
        const auto c = maps::eval_color(set, fi, di, in.points[i]);
        std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(i * 3));
    }
}

void grouped_kernel() {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(202);
    testing::SetGeometry geo;
    geo.density_res = 64;
    geo.color_res = 16;
    geo.triplane_res = 64;
    const auto set = testing::random_set(geo, rng);

    const auto small = random_inputs(10000, geo.shape.feature_dim, rng);
    std::vector<double> sigma, rgb;
    loop_eval(set, small, sigma, rgb);
    const auto bs = maps::batched_eval(set, small.points, small.features, Tensor(), maps::Head::density).values();
    const auto bc =
        maps::batched_eval(set, small.points, small.features, small.dirs, maps::Head::color).values();
    const double err = std::max(testing::max_abs_diff(bs, sigma), testing::max_abs_diff(bc, rgb));

    const auto big = random_inputs(100000, geo.shape.feature_dim, rng);
    auto t0 = Clock::now();
    loop_eval(set, big, sigma, rgb);
    const double loop_s = seconds_since(t0);
    t0 = Clock::now();
    {
        diff::NoGradGuard guard;
        (void)maps::batched_eval(set, big.points, big.features, Tensor(), maps::Head::density);
        (void)maps::batched_eval(set, big.points, big.features, big.dirs, maps::Head::color);
    }
    const double batched_s = seconds_since(t0);
    const double speedup = loop_s / batched_s;
    report("grouped-kernel", err < kGroupedTol && speedup >= kGroupedSpeedup,
           fmt("max abs diff %.2e at 1e4 points (tol %.0e), 1e5 points loop %.3f s vs grouped %.3f s = %.1fx "
               "(need %.0fx)",
               err, kGroupedTol, loop_s, batched_s, speedup, kGroupedSpeedup));
}

// ---------------------------------------------------------------------------

void analytic_box() {
    hyper::Model model(testing::tiny_config());
    const auto cam = render::Camera::look_at({2.6, 1.1, 0.9}, {0, 0, 0}, {0, 0, 1}, 32, 24, 50);
    render::RenderOptions opt;
    opt.threads = 1;
    const double diag = model.bounds().diagonal();
    opt.step = diag / 256;
    double worst = 0;
    int hits = 0;
    for (const double sigma : {0.5, 2.0, 8.0}) {
        testing::set_uniform_field(model, sigma);
        const auto set = model.decode(0);
        const auto img = render::render_image(model, set, cam, opt);
        for (int y = 0; y < cam.height; ++y) {
            for (int x = 0; x < cam.width; ++x) {
                const auto ray = render::make_ray(cam, x, y, model.bounds());
                const double expected = ray.hit ? 1 - std::exp(-sigma * (ray.far - ray.near)) : 0.0;
                hits += ray.hit;
                worst = std::max(worst, std::abs(img.alpha[static_cast<std::size_t>(y * cam.width + x)] - expected));
            }
        }
    }
    report("analytic-compositing", hits > 100 && worst < kBoxTol,
           fmt("max |alpha - (1 - exp(-sigma chord))| %.2e over %d box rays at step diag/256 (tol %.0e)", worst,
               hits, kBoxTol));
}

// ---------------------------------------------------------------------------

void architecture_audit() {
    const hyper::Model model(hyper::ModelConfig::defaults());
    const auto set = model.decode(0);
    bool ok = set.density.size() == 3 && set.color.size() == 3;
    for (std::size_t p = 0; ok && p < 3; ++p) {
        ok = set.density[p].cells.shape() == diff::Shape{256 * 256, 32} &&
             set.color[p].cells.shape() == diff::Shape{16 * 16, 2624} &&
             maps::audit_parameters(set.density[p], set.shape, maps::Head::density).ok() &&
             maps::audit_parameters(set.color[p], set.shape, maps::Head::color).ok();
    }
    const auto dir = enc::dir_encode(normalized(Vec3{1, 2, 3}));
    const std::vector<Vec3> pts{{0.2, 0.5, 0.7}};
    const auto embed = enc::point_embed(model.hash(), model.projector(), set.triplane, pts, 0.5);
    const bool dims_ok = dir.size() == 15 && embed.shape() == diff::Shape{1, 32};
    report("architecture-audit", ok && dims_ok,
           fmt("density %lld x %lld, color %lld x %lld per plane over %zu planes, dir_encode %zu, point_embed %lld",
               static_cast<long long>(set.density[0].cells.shape()[0]),
               static_cast<long long>(set.density[0].cells.shape()[1]),
               static_cast<long long>(set.color[0].cells.shape()[0]),
               static_cast<long long>(set.color[0].cells.shape()[1]), set.density.size(), dir.size(),
               static_cast<long long>(embed.shape()[1])));
}

// ---------------------------------------------------------------------------

struct ToyScene {
    io::SynthSpec spec;
    io::SyntheticScene scene;
    io::Dataset dataset;
    std::vector<io::View> views;
    // Ring cameras offset by half a step from the training ring.
    std::vector<render::Camera> held_out(int count, int resolution) const {
        return io::ring_cameras(dataset.bounds, count, resolution, spec.fov_y_deg, 0.5);
    }
};

std::unique_ptr<ToyScene> make_toy(const fs::path& root) {
    auto toy = std::make_unique<ToyScene>();
    toy->scene = io::SyntheticScene::random(toy->spec.seed, toy->spec.frames, toy->spec.primitives);
    toy->dataset = io::gen_synthetic(toy->spec, root);
    toy->views = io::load_views(toy->dataset);
    return toy;
}

std::unique_ptr<hyper::Model> train_model(const ToyScene& toy, int shrink, hyper::PlaneLayout layout,
                                          std::uint64_t seed, int epochs, int steps, int rays,
                                          train::TrainResult& result) {
    auto cfg = hyper::ModelConfig::shrunk(shrink);
    cfg.frames = toy.dataset.frames;
    cfg.bounds = toy.dataset.bounds;
    cfg.decoder.layout = layout;
    cfg.seed = seed;
    auto model = std::make_unique<hyper::Model>(cfg);
    train::TrainConfig tc;
    tc.epochs = epochs;
    tc.steps_per_epoch = steps;
    tc.batch_rays = rays;
    tc.seed = seed;
    train::Trainer trainer(*model, toy.dataset, toy.views, tc);
    result = trainer.run();
    return model;
}

void toy_training(const ToyScene& toy, hyper::Model*& trained, std::unique_ptr<hyper::Model>& owner) {
    train::TrainResult result;
    owner = train_model(toy, kToyShrink, hyper::PlaneLayout::orthogonal, 7, kToyEpochs, kToySteps, kToyRays, result);
    trained = owner.get();
    // Pooled error over held-out views of every frame.
    double se = 0, worst = INFINITY;
    std::size_t n = 0;
    for (int f = 0; f < toy.dataset.frames; ++f) {
        const auto set = trained->decode(f);
        for (const auto& cam : toy.held_out(kHeldOutViews, toy.spec.resolution)) {
            const auto ref = io::oracle_render(toy.scene, cam, f);
            const auto img = render::render_image(*trained, set, cam, {});
            se += train::color_error(img.rgb, ref.rgb);
            n += img.rgb.size();
            worst = std::min(worst, render::psnr(img.rgb, ref.rgb));
        }
    }
    const double psnr = -10 * std::log10(se / static_cast<double>(n));
    const bool trend = train::loss_trend_ok(result.curve);
    report("toy-training", psnr >= kToyPsnr && result.seconds <= kToySeconds && trend,
           fmt("held-out PSNR %.2f dB (worst view %.2f, need %.0f), trained %.0f s (limit %.0f s), loss %.3f -> "
               "%.3f, trend %s",
               psnr, worst, kToyPsnr, result.seconds, kToySeconds, result.curve.front().total,
               result.curve.back().total, trend ? "ok" : "not ok"));
}

// ---------------------------------------------------------------------------

void ess_fidelity(const ToyScene& toy, const hyper::Model& model) {
    render::RenderOptions off;
    off.threads = 1;
    render::RenderOptions on = off;
    on.use_ess = true;
    double worst = INFINITY, t_off = 0, t_on = 0;
    for (int f = 0; f < toy.dataset.frames; ++f) {
        const auto set = model.decode(f);
        const auto vol = occ::build(model, set, {}, occ::kDefaultThreshold / 2);
        for (const auto& cam : toy.held_out(kHeldOutViews, toy.spec.resolution)) {
            auto t0 = Clock::now();
            const auto a = render::render_image(model, set, cam, off);
            t_off += seconds_since(t0);
            t0 = Clock::now();
            const auto b = render::render_image(model, set, cam, on, &vol);
            t_on += seconds_since(t0);
            worst = std::min(worst, render::psnr(b.rgb, a.rgb));
        }
    }
    const double speedup = t_off / t_on;
    report("ess-fidelity", worst >= kEssPsnr && speedup >= kEssSpeedup,
           fmt("min PSNR(on vs off) %.2f dB (need %.0f), render %.2f s off vs %.2f s on = %.2fx (need %.0fx)", worst,
               kEssPsnr, t_off, t_on, speedup, kEssSpeedup));
}

// ---------------------------------------------------------------------------

void layout_ablation(const ToyScene& toy) {
    const auto cams = toy.held_out(kHeldOutViews, kAblResolution);
    std::vector<render::Image> refs;
    for (int f = 0; f < toy.dataset.frames; ++f) {
        for (const auto& cam : cams) {
            refs.push_back(io::oracle_render(toy.scene, cam, f));
        }
    }
    auto validation = [&](const hyper::Model& model) {
        double err = 0;
        std::size_t k = 0, n = 0;
        for (int f = 0; f < toy.dataset.frames; ++f) {
            const auto set = model.decode(f);
            for (const auto& cam : cams) {
                const auto img = render::render_image(model, set, cam, {});
                err += train::color_error(img.rgb, refs[k++].rgb);
                n += img.rgb.size() / 3;
            }
        }
        return err / static_cast<double>(n);
    };
    int wins = 0;
    std::ostringstream detail;
    for (int s = 1; s <= kAblationSeeds; ++s) {
        double lc[2];
        for (int l = 0; l < 2; ++l) {
            train::TrainResult result;
            const auto layout = l == 0 ? hyper::PlaneLayout::orthogonal : hyper::PlaneLayout::xy_only;
            const auto model = train_model(toy, kAblShrink, layout, static_cast<std::uint64_t>(s), kAblEpochs,
                                           kAblSteps, kAblRays, result);
            lc[l] = validation(*model);
        }
        wins += lc[0] < lc[1];
        detail << (s > 1 ? ", " : "") << fmt("seed %d %.5f vs %.5f", s, lc[0], lc[1]);
    }
    report("orthogonal-maps-trend", wins >= kAblationWins,
           fmt("orthogonal lower validation L_c in %d of %d seeds (need %d): ", wins, kAblationSeeds, kAblationWins) +
               detail.str());
}

// ---------------------------------------------------------------------------

void occupancy_format(const hyper::Model& model) {
    const auto set = model.decode(1);
    const auto vol = occ::build(model, set, {}, occ::kDefaultThreshold);
    const auto bytes = occ::serialize(vol);
    const bool dims = vol.dims() == occ::GridDims{24, 24, 48};
    const bool size = bytes.size() == occ::kHeaderBytes + 3456 && occ::kHeaderBytes == 16;
    const bool round = occ::deserialize(bytes) == vol && occ::serialize(occ::deserialize(bytes)) == bytes;
    // Nested thresholds must give nested voxel sets.
    std::vector<occ::OccupancyVolume> vols;
    for (const double tau : {occ::kDefaultThreshold / 4, occ::kDefaultThreshold, occ::kDefaultThreshold * 4}) {
        vols.push_back(occ::build(model, set, {}, tau));
    }
    bool monotone = true;
    for (std::size_t a = 0; a + 1 < vols.size(); ++a) {
        for (std::size_t b = 0; b < vols[a].bits().size(); ++b) {
            monotone = monotone && (vols[a + 1].bits()[b] & ~vols[a].bits()[b]) == 0;
        }
    }
    report("occupancy-format", dims && size && round && monotone && vols.front().count() > 0,
           fmt("24x24x48 grid serializes to %zu bytes (16 + 3456), round trip %s, occupied voxels %lld >= %lld >= "
               "%lld nested %s",
               bytes.size(), round ? "identical" : "differs", static_cast<long long>(vols[0].count()),
               static_cast<long long>(vols[1].count()), static_cast<long long>(vols[2].count()),
               monotone ? "yes" : "no"));
}

// ---------------------------------------------------------------------------

void service_cli(hyper::Model& model, const TempDir& dir) {
    const auto ckpt = dir / "model.ckpt";
    io::save_checkpoint(model, ckpt);
    const auto file = io::read_file(ckpt);
    app::RenderService service(std::shared_ptr<hyper::Model>(io::load_checkpoint(ckpt)), app::content_id(file));
    app::HttpServer server(service);
    const int port = server.bind({"127.0.0.1", 0});
    std::thread thread([&] { server.listen(); });
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(600);
    for (int i = 0; i < 200 && !client.Get("/meta"); ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }

    app::RenderRequest req;
    req.frame = 1;
    req.position = {1.6, 1.2, 0.5};
    req.look_at = {0, 0, 0};
    req.width = 96;
    req.height = 72;
    const auto post = client.Post("/render", app::to_json(req).dump(), "application/json");
    const auto get = client.Get("/render?frame=1&width=96&height=72&pos=1.6,1.2,0.5&target=0,0,0");
    server.stop();
    thread.join();

    const auto out = dir / "cli.png";
    const std::vector<std::string> args{"dynmap", "render", "--ckpt", ckpt.string(), "--frame", "1", "--pose",
                                        "1.6,1.2,0.5,0,0,0", "--width", "96", "--height", "72", "--out",
                                        out.string()};
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream sout, serr;
    const int status = app::run_cli(static_cast<int>(argv.size()), argv.data(), sout, serr);
    const bool served = post && post->status == 200 && get && get->status == 200 &&
                        post->has_header("X-Render-Millis");
    bool equal = false;
    std::size_t size = 0;
    if (served && status == 0) {
        const auto png = io::read_file(out);
        size = png.size();
        equal = std::string(png.begin(), png.end()) == post->body && get->body == post->body;
    }
    report("service-cli-equivalence", served && status == 0 && equal,
           fmt("POST /render, GET /render and cli render %s (%zu bytes, http %s, cli exit %d)",
               equal ? "byte identical" : "differ", size, served ? "ok" : "failed", status));
}

} // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
    gradient_suite();
    grouped_kernel();
    analytic_box();
    architecture_audit();

    TempDir dir("acceptance");
    const auto toy = make_toy(dir / "data");
    hyper::Model* trained = nullptr;
    std::unique_ptr<hyper::Model> owner;
    if (quick) {
        auto cfg = hyper::ModelConfig::shrunk(kToyShrink);
        cfg.frames = toy->dataset.frames;
        cfg.bounds = toy->dataset.bounds;
        owner = std::make_unique<hyper::Model>(cfg);
        trained = owner.get();
    } else {
        toy_training(*toy, trained, owner);
        ess_fidelity(*toy, *trained);
        layout_ablation(*toy);
    }
    occupancy_format(*trained);
    service_cli(*trained, dir);
    std::printf("%d failed\n", failures);
    return failures == 0 ? 0 : 1;
}
