// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/train/trainer.hpp>

#include <dynmap/core/log.hpp>
#include <dynmap/diff/ops.hpp>
#include <dynmap/io/checkpoint.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace dynmap::train {

using diff::Tensor;

Loss compute_loss(const Tensor& rendered, std::span<const double> target_rgb, std::span<const double> target_mask,
                  std::span<const Tensor> latents, double lambda_kl, double lambda_mask) {
    if (rendered.ndim() != 2 || rendered.dim(1) != 4) {
        throw std::invalid_argument("compute_loss: rendered batch must be [R x 4], got " +
                                    diff::shape_str(rendered.shape()));
    }
    const auto rays = static_cast<std::size_t>(rendered.dim(0));
    if (target_rgb.size() != rays * 3 || (!target_mask.empty() && target_mask.size() != rays)) {
        throw std::invalid_argument("compute_loss: target batch does not match " + std::to_string(rays) + " rays");
    }
    // Target and column selectors share the [R x 4] layout of the renders.
    std::vector<double> target(rays * 4), rgb_cols(rays * 4, 0.0), mask_cols(rays * 4, 0.0);
    for (std::size_t r = 0; r < rays; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            target[r * 4 + c] = target_rgb[r * 3 + c];
            rgb_cols[r * 4 + c] = 1;
        }
        target[r * 4 + 3] = target_mask.empty() ? 0.0 : target_mask[r];
        mask_cols[r * 4 + 3] = 1;
    }
    const diff::Shape shape{static_cast<std::int64_t>(rays), 4};
    const Tensor residual = diff::sub(rendered, Tensor::from(shape, target));
    Loss out;
    out.report.lambda_kl = lambda_kl;
    out.report.lambda_mask = lambda_mask;
    const Tensor color = diff::sum_squares(diff::mul(residual, Tensor::from(shape, rgb_cols)));
    out.report.color = color.item();
    out.total = color;
    if (!target_mask.empty()) {
        const Tensor mask = diff::sum_squares(diff::mul(residual, Tensor::from(shape, mask_cols)));
        out.report.mask = mask.item();
        out.total = diff::add(out.total, diff::scale(mask, lambda_mask));
    }
    for (const auto& z : latents) {
        const Tensor kl = diff::scale(diff::sum_squares(z), 0.5);
        out.report.kl += kl.item();
        out.total = diff::add(out.total, diff::scale(kl, lambda_kl));
    }
    return out;
}

Adam::Adam(std::vector<hyper::ParameterGroup> groups, AdamOptions options)
    : groups_(std::move(groups)), options_(options) {
    for (const auto& g : groups_) {
        m_.emplace_back();
        v_.emplace_back();
        for (const auto& t : g.tensors) {
            m_.back().emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
            v_.back().emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
        }
    }
}

void Adam::zero_grad() {
    for (auto& g : groups_) {
        for (auto& t : g.tensors) {
            t.zero_grad();
        }
    }
}

bool Adam::step(double lr_scale, std::string* offender) {
    for (const auto& g : groups_) {
        for (const auto& t : g.tensors) {
            if (!t.has_grad()) {
                continue;
            }
            const bool finite = diff::dispatch(t.grad().dtype(), [&](auto tag) {
                using T = decltype(tag);
                for (const T v : t.grad().template span<T>()) {
                    if (!std::isfinite(v)) {
                        return false;
                    }
                }
                return true;
            });
            if (!finite) {
                if (offender != nullptr) {
                    *offender = g.name;
                }
                return false;
            }
        }
    }
    ++t_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
        auto& g = groups_[gi];
        const double lr = g.base_lr * lr_scale;
        for (std::size_t ti = 0; ti < g.tensors.size(); ++ti) {
            auto& t = g.tensors[ti];
            if (!t.has_grad()) {
                continue;
            }
            auto& m = m_[gi][ti];
            auto& v = v_[gi][ti];
            diff::dispatch(t.buffer().dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto x = t.template data<T>();
                const auto gr = t.grad().template span<T>();
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double gv = gr[i];
                    m[i] = b1 * m[i] + (1 - b1) * gv;
                    v[i] = b2 * v[i] + (1 - b2) * gv * gv;
                    x[i] = static_cast<T>(x[i] - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps));
                }
            });
        }
    }
    return true;
}

double lr_multiplier(double epoch) { return std::pow(0.1, epoch / 400.0); }

nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"steps_per_epoch", c.steps_per_epoch},
            {"image_batch", c.image_batch},
            {"batch_rays", c.batch_rays},
            {"samples_per_ray", c.samples_per_ray},
            {"seed", c.seed},
            {"lambda_kl", c.lambda_kl},
            {"lambda_mask", c.lambda_mask},
            {"checkpoint_every", c.checkpoint_every},
            {"background", c.background}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.image_batch = j.value("image_batch", c.image_batch);
    c.batch_rays = j.value("batch_rays", c.batch_rays);
    c.samples_per_ray = j.value("samples_per_ray", c.samples_per_ray);
    c.seed = j.value("seed", c.seed);
    c.lambda_kl = j.value("lambda_kl", c.lambda_kl);
    c.lambda_mask = j.value("lambda_mask", c.lambda_mask);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.background = j.value("background", c.background);
    if (c.epochs < 1 || c.steps_per_epoch < 1 || c.image_batch < 1 || c.batch_rays < 1 || c.samples_per_ray < 1) {
        throw std::invalid_argument("training config: epochs, steps, batch sizes and samples must be positive");
    }
    return c;
}

Trainer::Trainer(hyper::Model& model, const io::Dataset& dataset, std::vector<io::View> views, TrainConfig config)
    : model_(model), dataset_(dataset), views_(std::move(views)), config_(std::move(config)),
      adam_(model.parameter_groups()), rng_(config_.seed), use_mask_(dataset.masks != io::MaskMode::none) {
    if (model.frames() != dataset.frames) {
        throw std::invalid_argument("model has " + std::to_string(model.frames()) + " frames, dataset has " +
                                    std::to_string(dataset.frames));
    }
    if (!(model.bounds().min == dataset.bounds.min) || !(model.bounds().max == dataset.bounds.max)) {
        throw std::invalid_argument("model bounds differ from the dataset bounds");
    }
    if (views_.empty()) {
        throw std::invalid_argument("dataset has no images");
    }
    // Only rays through the scene box carry a gradient; sample among those.
    for (const auto& c : dataset.cameras) {
        const auto rays = render::gen_rays(c.camera, dataset.bounds);
        hit_rays_.emplace_back();
        hit_pixels_.emplace_back();
        for (std::size_t p = 0; p < rays.size(); ++p) {
            if (rays[p].hit) {
                hit_rays_.back().push_back(rays[p]);
                hit_pixels_.back().push_back(static_cast<std::int64_t>(p));
            }
        }
    }
}

LossReport Trainer::step(double epoch) {
    std::vector<std::size_t> batch(static_cast<std::size_t>(config_.image_batch));
    for (auto& b : batch) {
        b = static_cast<std::size_t>(rng_() % views_.size());
    }
    adam_.zero_grad();
    std::map<int, maps::MlpMapSet> sets;
    for (const auto b : batch) {
        const int f = views_[b].frame;
        if (!sets.count(f)) {
            sets.emplace(f, model_.decode(f));
        }
    }

    LossReport report;
    report.lambda_kl = config_.lambda_kl;
    report.lambda_mask = config_.lambda_mask;
    Tensor total;
    std::vector<render::Ray> rays;
    std::vector<render::RaySamples> samples;
    std::vector<double> target_rgb, target_mask;
    for (const auto b : batch) {
        const auto& view = views_[b];
        const auto cam = static_cast<std::size_t>(view.camera);
        const auto& pool = hit_pixels_[cam];
        rays.clear();
        target_rgb.clear();
        target_mask.clear();
        if (pool.empty()) {
            continue;
        }
        for (int r = 0; r < config_.batch_rays; ++r) {
            const auto k = static_cast<std::size_t>(rng_() % pool.size());
            const auto p = static_cast<std::size_t>(pool[k]);
            rays.push_back(hit_rays_[cam][k]);
            for (std::size_t c = 0; c < 3; ++c) {
                target_rgb.push_back(view.rgb[p * 3 + c]);
            }
            if (use_mask_) {
                target_mask.push_back(view.mask[p]);
            }
        }
        samples.resize(rays.size());
        for (std::size_t r = 0; r < rays.size(); ++r) {
            render::sample_train(rays[r], config_.samples_per_ray, rng_, samples[r]);
        }
        const Tensor rendered = render::trace_rays(model_, sets.at(view.frame), rays, samples, config_.background);
        const Tensor z = model_.latents().latent(view.frame);
        auto loss = compute_loss(rendered, target_rgb, target_mask, std::span<const Tensor>(&z, 1), config_.lambda_kl,
                                 config_.lambda_mask);
        report.color += loss.report.color;
        report.mask += loss.report.mask;
        report.kl += loss.report.kl;
        total = total.defined() ? diff::add(total, loss.total) : loss.total;
    }
    for (const auto& [name, v] : {std::pair{"color loss", report.color}, std::pair{"mask loss", report.mask},
                                  std::pair{"latent prior", report.kl}}) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("training diverged: non-finite ") + name + " at epoch " +
                                     std::to_string(epoch));
        }
    }
    if (!total.defined()) {
        return report;
    }
    total.backward();

    grad_norms_.clear();
    for (const auto& g : adam_.groups()) {
        double s = 0;
        for (const auto& t : g.tensors) {
            if (t.has_grad()) {
                for (const double v : t.grad().to_doubles()) {
                    s += v * v;
                }
            }
        }
        grad_norms_.emplace_back(g.name, std::sqrt(s));
    }
    std::string offender;
    if (!adam_.step(lr_multiplier(epoch), &offender)) {
        ++skipped_;
        log_warn("skipped optimizer step: non-finite gradient in group '" + offender + "'");
    }
    return report;
}

TrainResult Trainer::run(const std::function<void(const EpochRecord&)>& on_epoch) {
    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    if (!config_.out_dir.empty()) {
        std::filesystem::create_directories(config_.out_dir);
    }
    for (int e = 0; e < config_.epochs; ++e) {
        EpochRecord rec;
        rec.epoch = e + 1;
        for (int s = 0; s < config_.steps_per_epoch; ++s) {
            const auto r = step(e + static_cast<double>(s) / config_.steps_per_epoch);
            rec.color += r.color;
            rec.kl += r.kl;
            rec.mask += r.mask;
            rec.total += r.total();
        }
        const double n = config_.steps_per_epoch;
        rec.color /= n;
        rec.kl /= n;
        rec.mask /= n;
        rec.total /= n;
        rec.lr = hyper::kNetworkLearningRate * lr_multiplier(e + 1);
        result.curve.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }
        if (config_.checkpoint_every > 0 && !config_.out_dir.empty() && (e + 1) % config_.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%04d.ckpt", e + 1);
            io::save_checkpoint(model_, config_.out_dir / name);
        }
    }
    if (!config_.out_dir.empty()) {
        io::save_checkpoint(model_, config_.out_dir / "model.ckpt");
        write_loss_curve(config_.out_dir / "loss.csv", result.curve);
    }
    result.skipped_steps = skipped_;
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

TrainResult train(hyper::Model& model, const io::Dataset& dataset, const TrainConfig& config) {
    Trainer trainer(model, dataset, io::load_views(dataset), config);
    return trainer.run();
}

void write_loss_curve(const std::filesystem::path& path, std::span<const EpochRecord> curve) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write loss curve '" + path.string() + "'");
    }
    out << "epoch,L_c,L_KL,L_m,total,lr\n";
    char line[256];
    for (const auto& r : curve) {
        std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.color, r.kl, r.mask, r.total,
                      r.lr);
        out << line;
    }
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

bool loss_trend_ok(std::span<const EpochRecord> curve) {
    if (curve.size() < 50) {
        return false;
    }
    std::vector<double> early, late;
    for (const auto& r : curve) {
        if (r.epoch >= 1 && r.epoch <= 10) {
            early.push_back(r.total);
        } else if (r.epoch >= 41 && r.epoch <= 50) {
            late.push_back(r.total);
        }
    }
    return early.size() == 10 && late.size() == 10 && median(late) < median(early);
}

double color_error(std::span<const float> rendered, std::span<const float> reference) {
    if (rendered.size() != reference.size()) {
        throw std::invalid_argument("color_error: images differ in size");
    }
    double s = 0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double d = static_cast<double>(rendered[i]) - reference[i];
        s += d * d;
    }
    return s;
}

} // namespace dynmap::train
