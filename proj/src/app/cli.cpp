// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/app/cli.hpp>

#include <dynmap/app/http.hpp>
#include <dynmap/app/service.hpp>
#include <dynmap/io/checkpoint.hpp>
#include <dynmap/io/png.hpp>
#include <dynmap/io/synthetic.hpp>
#include <dynmap/train/trainer.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dynmap::app {

using nlohmann::json;
namespace fs = std::filesystem;

hyper::ModelConfig model_config_for(const json& section, int frames, const SceneBounds& bounds) {
    hyper::ModelConfig c;
    if (section.contains("decoder")) {
        json full = section;
        full["frames"] = frames;
        full["bounds"] = {{"min", {bounds.min.x, bounds.min.y, bounds.min.z}},
                          {"max", {bounds.max.x, bounds.max.y, bounds.max.z}}};
        if (!full.contains("seed")) {
            full["seed"] = c.seed;
        }
        return hyper::model_config_from_json(full);
    }
    c = hyper::ModelConfig::shrunk(section.value("shrink", 1));
    const auto layout = section.value("layout", std::string("orthogonal"));
    if (layout == "xy_only") {
        c.decoder.layout = hyper::PlaneLayout::xy_only;
    } else if (layout != "orthogonal") {
        throw std::invalid_argument("unknown plane layout '" + layout + "'");
    }
    c.seed = section.value("seed", c.seed);
    c.frames = frames;
    c.bounds = bounds;
    c.validate();
    return c;
}

namespace {

struct Loaded {
    std::shared_ptr<hyper::Model> model;
    std::string id;
};

Loaded load_model(const fs::path& ckpt) {
    const auto bytes = io::read_file(ckpt);
    return {std::shared_ptr<hyper::Model>(io::deserialize_checkpoint(bytes)), content_id(bytes)};
}

std::vector<double> number_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) {
            throw std::invalid_argument("'" + s + "' is not a comma-separated number list");
        }
    }
    return out;
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
}

std::string frame_name(int frame, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%03d.%s", frame, ext);
    return buf;
}

// Every flag of the invoked subcommand, for provenance.
json echo_args(const CLI::App& sub) {
    json j = json::object();
    for (const auto* opt : sub.get_options()) {
        if (opt->get_name() == "--help" || opt->count() == 0) {
            continue;
        }
        const auto r = opt->results();
        j[opt->get_name()] = r.size() == 1 ? json(r.front()) : json(r);
    }
    return j;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Volumetric video engine: train, render and serve dynamic scenes", "dynmap"};
    app.require_subcommand(1);

    // synth
    io::SynthSpec synth;
    std::string synth_out;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic multi-view video dataset");
    c_synth->add_option("--out", synth_out, "Dataset directory")->required();
    c_synth->add_option("--frames", synth.frames, "Frame count")->capture_default_str();
    c_synth->add_option("--cameras", synth.cameras, "Cameras on the ring")->capture_default_str();
    c_synth->add_option("--resolution", synth.resolution, "Image width and height")->capture_default_str();
    c_synth->add_option("--seed", synth.seed, "Scene seed")->capture_default_str();
    c_synth->add_option("--primitives", synth.primitives, "Sphere and box count")->capture_default_str();
    c_synth->add_flag("--view-tint", synth.view_tint, "Direction-dependent shading");

    // train
    std::string data_dir, config_path, train_out;
    int epochs_override = 0;
    auto* c_train = app.add_subcommand("train", "Fit a model to a dataset");
    c_train->add_option("--data", data_dir, "Dataset directory")->required();
    c_train->add_option("--config", config_path, "JSON with 'model' and 'train' sections")->required();
    c_train->add_option("--out", train_out, "Output directory")->required();
    c_train->add_option("--epochs", epochs_override, "Override the configured epoch count");

    // render
    std::string ckpt, pose, extrinsics, render_out;
    RenderRequest rq;
    bool no_ess = false, single_stage = false;
    ServiceOptions sopt;
    auto* c_render = app.add_subcommand("render", "Render one frame to PNG");
    c_render->add_option("--ckpt", ckpt, "Checkpoint")->required();
    c_render->add_option("--frame", rq.frame, "Frame index")->required();
    auto* pose_opt = c_render->add_option("--pose", pose, "Eye and target: ex,ey,ez,tx,ty,tz[,ux,uy,uz]");
    auto* ext_opt = c_render->add_option("--extrinsics", extrinsics, "World-from-camera [R|t], 12 numbers");
    pose_opt->excludes(ext_opt);
    c_render->add_option("--out", render_out, "Output PNG")->required();
    c_render->add_option("--width", rq.width, "Image width")->capture_default_str();
    c_render->add_option("--height", rq.height, "Image height")->capture_default_str();
    c_render->add_option("--fov", rq.fov_y_deg, "Vertical field of view in degrees")->capture_default_str();
    c_render->add_flag("--no-ess", no_ess, "Disable empty-space skipping");
    c_render->add_flag("--single-stage", single_stage, "Evaluate color at every sample");
    c_render->add_option("--occ-threshold", sopt.occupancy_threshold, "Occupancy density threshold")
        ->capture_default_str();
    c_render->add_option("--max-resolution", sopt.max_resolution, "Largest accepted width or height")
        ->capture_default_str();
    c_render->add_option("--threads", sopt.threads, "Render workers, 0 for all")->capture_default_str();

    // build-occ
    std::string occ_out;
    double occ_threshold = occ::kDefaultThreshold;
    auto* c_occ = app.add_subcommand("build-occ", "Build occupancy grids for every frame");
    c_occ->add_option("--ckpt", ckpt, "Checkpoint")->required();
    c_occ->add_option("--out", occ_out, "Output directory")->required();
    c_occ->add_option("--threshold", occ_threshold, "Density threshold")->capture_default_str();
    c_occ->add_option("--threads", sopt.threads, "Workers, 0 for all")->capture_default_str();

    // bench
    int bench_frames = 0, repeat = 3;
    std::string report_path;
    auto* c_bench = app.add_subcommand("bench", "Time rendering with and without empty-space skipping");
    c_bench->add_option("--ckpt", ckpt, "Checkpoint")->required();
    c_bench->add_option("--frames", bench_frames, "Frames to render, 0 for all")->capture_default_str();
    c_bench->add_option("--report", report_path, "JSON report path")->required();
    c_bench->add_option("--width", rq.width, "Image width")->capture_default_str();
    c_bench->add_option("--height", rq.height, "Image height")->capture_default_str();
    c_bench->add_option("--repeat", repeat, "Timed repetitions per frame")->capture_default_str();
    c_bench->add_option("--occ-threshold", sopt.occupancy_threshold, "Occupancy density threshold")
        ->capture_default_str();
    c_bench->add_option("--threads", sopt.threads, "Render workers, 0 for all")->capture_default_str();

    // serve
    std::string addr;
    auto* c_serve = app.add_subcommand("serve", "Serve /meta and /render over HTTP");
    c_serve->add_option("--ckpt", ckpt, "Checkpoint")->required();
    c_serve->add_option("--addr", addr, std::string("host:port, else $") + kAddrEnv + " or " + kDefaultAddr);
    c_serve->add_option("--max-resolution", sopt.max_resolution, "Largest accepted width or height")
        ->capture_default_str();
    c_serve->add_option("--occ-threshold", sopt.occupancy_threshold, "Occupancy density threshold")
        ->capture_default_str();
    c_serve->add_option("--threads", sopt.threads, "Render workers, 0 for all")->capture_default_str();

    // export
    std::string what, export_out;
    auto* c_export = app.add_subcommand("export", "Export latents, occupancy grids or decoded maps");
    c_export->add_option("--ckpt", ckpt, "Checkpoint")->required();
    c_export->add_option("--what", what, "latents, occ or maps")
        ->required()
        ->check(CLI::IsMember({"latents", "occ", "maps"}));
    c_export->add_option("--out", export_out, "Output file (latents) or directory")->required();
    c_export->add_option("--threshold", occ_threshold, "Density threshold for occ")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*c_synth) {
            const auto d = io::gen_synthetic(synth, synth_out);
            out << "wrote " << d.images.size() << " images to " << synth_out << '\n';
            return 0;
        }
        if (*c_train) {
            std::ifstream in(config_path);
            if (!in) {
                throw std::runtime_error("cannot read config '" + config_path + "'");
            }
            const json cfg = json::parse(in);
            const auto dataset = io::load_dataset(data_dir);
            auto tc = train::train_config_from_json(cfg.value("train", json::object()));
            if (epochs_override > 0) {
                tc.epochs = epochs_override;
            }
            tc.out_dir = train_out;
            const auto mc = model_config_for(cfg.value("model", json::object()), dataset.frames, dataset.bounds);
            write_json(fs::path(train_out) / "run.json",
                       {{"args", echo_args(*c_train)}, {"model", hyper::to_json(mc)}, {"train", train::to_json(tc)}});
            hyper::Model model(mc);
            train::Trainer trainer(model, dataset, io::load_views(dataset), tc);
            const auto result = trainer.run([&](const train::EpochRecord& r) {
                out << "epoch " << r.epoch << " L_c " << r.color << " L_m " << r.mask << " total " << r.total << '\n';
            });
            out << "trained " << tc.epochs << " epochs in " << result.seconds << " s, skipped "
                << result.skipped_steps << " steps\n";
            return 0;
        }
        if (*c_render) {
            if (!pose.empty()) {
                const auto v = number_list(pose);
                if (v.size() != 6 && v.size() != 9) {
                    throw std::invalid_argument("--pose needs 6 or 9 numbers");
                }
                rq.position = {v[0], v[1], v[2]};
                rq.look_at = {v[3], v[4], v[5]};
                if (v.size() == 9) {
                    rq.up = {v[6], v[7], v[8]};
                }
            } else if (!extrinsics.empty()) {
                const auto v = number_list(extrinsics);
                if (v.size() != 12) {
                    throw std::invalid_argument("--extrinsics needs 12 numbers");
                }
                rq.extrinsics.emplace();
                std::copy(v.begin(), v.end(), rq.extrinsics->begin());
            }
            rq.use_ess = !no_ess;
            rq.two_stage = !single_stage;
            auto [model, id] = load_model(ckpt);
            if (pose.empty() && extrinsics.empty()) {
                const RenderService probe(model, id, sopt);
                const auto d = probe.default_request();
                rq.position = d.position;
                rq.look_at = d.look_at;
                rq.up = d.up;
            }
            RenderService service(model, id, sopt);
            const auto res = service.render(rq);
            io::write_file(render_out, res.png);
            out << "rendered frame " << rq.frame << " in " << res.millis << " ms to " << render_out << '\n';
            return 0;
        }
        if (*c_occ) {
            auto [model, id] = load_model(ckpt);
            fs::create_directories(occ_out);
            hyper::DecodeCache cache(*model, 1);
            for (int f = 0; f < model->frames(); ++f) {
                const auto vol = occ::build(*model, *cache.get(f), {}, occ_threshold, sopt.threads);
                occ::save(vol, fs::path(occ_out) / frame_name(f, "occ"));
                out << "frame " << f << ": " << vol.count() << " occupied voxels\n";
            }
            write_json(fs::path(occ_out) / "occ.json", {{"args", echo_args(*c_occ)}, {"model", id}});
            return 0;
        }
        if (*c_bench) {
            auto [model, id] = load_model(ckpt);
            RenderService service(model, id, sopt);
            const int frames = bench_frames > 0 ? std::min(bench_frames, model->frames()) : model->frames();
            const auto cams = io::ring_cameras(model->bounds(), 8, std::max(rq.width, rq.height), rq.fov_y_deg, 0.25);
            json per_frame = json::array();
            double off_ms = 0, on_ms = 0, min_psnr = INFINITY;
            hyper::DecodeCache cache(*model, 1);
            for (int f = 0; f < frames; ++f) {
                const auto set = cache.get(f);
                const auto vol = service.occupancy(f);
                const auto& cam = cams[static_cast<std::size_t>(f) % cams.size()];
                render::RenderOptions o;
                o.threads = sopt.threads;
                auto time = [&](bool ess, render::Image& img) {
                    o.use_ess = ess;
                    double best = INFINITY;
                    for (int r = 0; r < std::max(1, repeat); ++r) {
                        const auto t0 = std::chrono::steady_clock::now();
                        img = render::render_image(*model, *set, cam, o, ess ? vol.get() : nullptr);
                        best = std::min(best, std::chrono::duration<double, std::milli>(
                                                  std::chrono::steady_clock::now() - t0)
                                                  .count());
                    }
                    return best;
                };
                render::Image a, b;
                const double ms_off = time(false, a);
                const double ms_on = time(true, b);
                const double p = render::psnr(b.rgb, a.rgb);
                off_ms += ms_off;
                on_ms += ms_on;
                min_psnr = std::min(min_psnr, p);
                per_frame.push_back({{"frame", f}, {"ms_ess_off", ms_off}, {"ms_ess_on", ms_on}, {"psnr", p},
                                     {"density_evals_off", a.stats.density_evals},
                                     {"density_evals_on", b.stats.density_evals}});
            }
            const json report{{"args", echo_args(*c_bench)},
                              {"model", id},
                              {"frames", per_frame},
                              {"ms_per_frame_ess_off", off_ms / frames},
                              {"ms_per_frame_ess_on", on_ms / frames},
                              {"speedup", off_ms / on_ms},
                              {"min_psnr_ess_vs_full", std::isfinite(min_psnr) ? json(min_psnr) : json("inf")}};
            write_json(report_path, report);
            out << "ESS off " << off_ms / frames << " ms/frame, on " << on_ms / frames << " ms/frame, speedup "
                << off_ms / on_ms << '\n';
            return 0;
        }
        if (*c_serve) {
            auto [model, id] = load_model(ckpt);
            RenderService service(model, id, sopt);
            HttpServer server(service);
            const auto bind = parse_addr(resolve_addr(addr));
            const int port = server.bind(bind);
            out << "serving " << id << " on " << bind.host << ":" << port << std::endl;
            server.listen();
            return 0;
        }
        if (*c_export) {
            auto [model, id] = load_model(ckpt);
            if (what == "latents") {
                json codes = json::array();
                for (int f = 0; f < model->frames(); ++f) {
                    codes.push_back(model->latents().values(f));
                }
                write_json(export_out, {{"args", echo_args(*c_export)}, {"model", id}, {"latents", codes}});
            } else if (what == "occ") {
                fs::create_directories(export_out);
                hyper::DecodeCache cache(*model, 1);
                for (int f = 0; f < model->frames(); ++f) {
                    occ::save(occ::build(*model, *cache.get(f), {}, occ_threshold),
                              fs::path(export_out) / frame_name(f, "occ"));
                }
                write_json(fs::path(export_out) / "occ.json", {{"args", echo_args(*c_export)}, {"model", id}});
            } else {
                fs::create_directories(export_out);
                hyper::DecodeCache cache(*model, 1);
                for (int f = 0; f < model->frames(); ++f) {
                    const auto set = cache.get(f);
                    json maps = json::array();
                    std::vector<std::uint8_t> blob;
                    auto append = [&](const char* head, const maps::MlpMap& m) {
                        const auto v = m.cells.values();
                        maps.push_back({{"head", head},
                                        {"plane", std::string(enc::plane_name(m.plane))},
                                        {"resolution", m.resolution},
                                        {"params_per_cell", m.params},
                                        {"offset", blob.size() / sizeof(float)},
                                        {"count", v.size()}});
                        for (const double x : v) {
                            const auto f32 = static_cast<float>(x);
                            const auto* p = reinterpret_cast<const std::uint8_t*>(&f32);
                            blob.insert(blob.end(), p, p + sizeof f32);
                        }
                    };
                    for (const auto& m : set->density) {
                        append("density", m);
                    }
                    for (const auto& m : set->color) {
                        append("color", m);
                    }
                    io::write_file(fs::path(export_out) / frame_name(f, "bin"), blob);
                    write_json(fs::path(export_out) / frame_name(f, "json"),
                               {{"args", echo_args(*c_export)}, {"model", id}, {"frame", f},
                                {"dtype", "float32-le"}, {"maps", maps}});
                }
            }
            out << "exported " << what << " to " << export_out << '\n';
            return 0;
        }
    } catch (const RequestError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace dynmap::app
