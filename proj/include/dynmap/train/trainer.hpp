// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/hyper/model.hpp>
#include <dynmap/io/dataset.hpp>
#include <dynmap/render/renderer.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dynmap::train {

inline constexpr double kLambdaKl = 1e-6;
inline constexpr double kLambdaMask = 0.1;

struct LossReport {
    double color = 0; ///< sum over rays of the squared RGB error
    double kl = 0;    ///< half squared norm of the batch latents
    double mask = 0;  ///< sum over rays of the squared opacity error
    double lambda_kl = kLambdaKl;
    double lambda_mask = kLambdaMask;

    double total() const { return color + lambda_kl * kl + lambda_mask * mask; }
};

struct Loss {
    diff::Tensor total;
    LossReport report;
};

/// `rendered` is [R x 4] (RGB, opacity). `target_rgb` holds 3R values and
/// `target_mask` R values, or nothing to drop the mask term.
Loss compute_loss(const diff::Tensor& rendered, std::span<const double> target_rgb,
                  std::span<const double> target_mask, std::span<const diff::Tensor> latents,
                  double lambda_kl = kLambdaKl, double lambda_mask = kLambdaMask);

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected adaptive moments, one state per tensor.
class Adam {
public:
    explicit Adam(std::vector<hyper::ParameterGroup> groups, AdamOptions options = {});

    /// Applies one update with each group's base rate times `lr_scale`.
    /// Returns false and leaves every parameter unchanged when any gradient
    /// is non-finite; `offender` then names the tensor's group.
    bool step(double lr_scale, std::string* offender = nullptr);
    void zero_grad();

    std::int64_t steps() const { return t_; }
    const std::vector<hyper::ParameterGroup>& groups() const { return groups_; }

private:
    std::vector<hyper::ParameterGroup> groups_;
    AdamOptions options_;
    std::vector<std::vector<std::vector<double>>> m_, v_;
    std::int64_t t_ = 0;
};

/// 0.1^(epoch / 400), applied continuously.
double lr_multiplier(double epoch);

struct TrainConfig {
    int epochs = 50;
    int steps_per_epoch = 50;
    int image_batch = 8;
    int batch_rays = 1024;
    int samples_per_ray = render::kTrainSamples;
    std::uint64_t seed = 7;
    double lambda_kl = kLambdaKl;
    double lambda_mask = kLambdaMask;
    /// Epochs between checkpoints written to `out_dir`; 0 disables them.
    int checkpoint_every = 0;
    std::filesystem::path out_dir;
    render::Rgb background{0, 0, 0};
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Per-epoch means of the per-step losses; epochs count from 1.
struct EpochRecord {
    int epoch = 0;
    double color = 0;
    double kl = 0;
    double mask = 0;
    double total = 0;
    double lr = 0; ///< network rate at the end of the epoch
};

struct TrainResult {
    std::vector<EpochRecord> curve;
    std::int64_t skipped_steps = 0;
    double seconds = 0;
};

class Trainer {
public:
    /// The model must match the dataset's frame count and bounds.
    Trainer(hyper::Model& model, const io::Dataset& dataset, std::vector<io::View> views, TrainConfig config);

    /// One optimizer step at (fractional) epoch `epoch`.
    LossReport step(double epoch);
    TrainResult run(const std::function<void(const EpochRecord&)>& on_epoch = {});

    /// Gradient norms per parameter group after the last step's backward.
    const std::vector<std::pair<std::string, double>>& last_grad_norms() const { return grad_norms_; }

private:
    hyper::Model& model_;
    const io::Dataset& dataset_;
    std::vector<io::View> views_;
    TrainConfig config_;
    Adam adam_;
    Rng rng_;
    bool use_mask_;
    std::vector<std::vector<render::Ray>> hit_rays_;
    std::vector<std::vector<std::int64_t>> hit_pixels_;
    std::vector<std::pair<std::string, double>> grad_norms_;
    std::int64_t skipped_ = 0;
};

TrainResult train(hyper::Model& model, const io::Dataset& dataset, const TrainConfig& config);

void write_loss_curve(const std::filesystem::path& path, std::span<const EpochRecord> curve);

/// Median total loss of epochs 41-50 below that of epochs 1-10.
bool loss_trend_ok(std::span<const EpochRecord> curve);

/// Sum of squared RGB errors of a rendered image against a reference.
double color_error(std::span<const float> rendered, std::span<const float> reference);

} // namespace dynmap::train
