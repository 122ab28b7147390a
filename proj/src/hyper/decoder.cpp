// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/hyper/decoder.hpp>

#include <dynmap/diff/ops.hpp>

#include <stdexcept>

namespace dynmap::hyper {

LatentTable::LatentTable(int frames, int dim, Rng& rng) : codes_(diff::Tensor::zeros({frames, dim}, true)) {
    normal_fill(codes_, 0.0, 0.01, rng);
}

diff::Tensor LatentTable::latent(int frame) const {
    if (frame < 0 || frame >= frames()) {
        throw std::out_of_range("latent: frame " + std::to_string(frame) + " outside [0, " +
                                std::to_string(frames()) + ")");
    }
    return diff::reshape(diff::slice_rows(codes_, frame, frame + 1), {dim()});
}

std::vector<double> LatentTable::values(int frame) const {
    diff::NoGradGuard guard;
    return latent(frame).values();
}

namespace {
constexpr int kUpKernel = 4;
constexpr int kHeadKernel = 3;
} // namespace

std::size_t Decoder::add_param(std::string name, diff::Shape shape, std::int64_t fan_in, bool bias, Rng& rng) {
    diff::Tensor t = diff::Tensor::zeros(std::move(shape), true);
    if (!bias) {
        kaiming_uniform(t, fan_in, rng);
    } else {
        const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
        uniform_fill(t, -b, b, rng);
    }
    params_.push_back({std::move(name), std::move(t)});
    return params_.size() - 1;
}

Decoder::Decoder(const DecoderConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const auto& bc = config_.backbone_channels;
    const int s = config_.stem_resolution;
    const int stem = bc.front() * s * s;
    fc_ = add_param("stem.weight", {config_.latent_dim, stem}, config_.latent_dim, false, rng);
    add_param("stem.bias", {stem}, config_.latent_dim, true, rng);
    for (std::size_t i = 1; i < bc.size(); ++i) {
        const std::string n = "backbone." + std::to_string(i - 1);
        const std::int64_t fan_in = std::int64_t{bc[i - 1]} * kUpKernel * kUpKernel / 4;
        deconv_.push_back(add_param(n + ".weight", {bc[i - 1], bc[i], kUpKernel, kUpKernel}, fan_in, false, rng));
        add_param(n + ".bias", {bc[i]}, fan_in, true, rng);
    }
    const int cb = bc.back();
    const int planes = config_.plane_count();
    const std::int64_t head_fan = std::int64_t{cb} * kHeadKernel * kHeadKernel;
    triplane_ = add_param("triplane.weight", {3 * config_.feature_dim, cb, kHeadKernel, kHeadKernel}, head_fan, false,
                          rng);
    add_param("triplane.bias", {3 * config_.feature_dim}, head_fan, true, rng);
    const auto shape = config_.mlp_shape();
    density_ = add_param("density.weight", {planes * shape.density_params(), cb, kHeadKernel, kHeadKernel}, head_fan,
                         false, rng);
    add_param("density.bias", {planes * shape.density_params()}, head_fan, true, rng);
    int cin = cb;
    for (std::size_t i = 0; i < config_.color_channels.size(); ++i) {
        const int cout = config_.color_channels[i];
        const std::string n = "color." + std::to_string(i);
        const std::int64_t fan = std::int64_t{cin} * kHeadKernel * kHeadKernel;
        color_.push_back(add_param(n + ".weight", {cout, cin, kHeadKernel, kHeadKernel}, fan, false, rng));
        add_param(n + ".bias", {cout}, fan, true, rng);
        cin = cout;
    }
    const std::int64_t fan = std::int64_t{cin} * kHeadKernel * kHeadKernel;
    color_out_ = add_param("color.out.weight", {planes * shape.color_params(), cin, kHeadKernel, kHeadKernel}, fan,
                           false, rng);
    add_param("color.out.bias", {planes * shape.color_params()}, fan, true, rng);
}

std::int64_t Decoder::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) {
        n += p.tensor.numel();
    }
    return n;
}

diff::Tensor& Decoder::parameter(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) {
            return p.tensor;
        }
    }
    throw std::out_of_range("decoder has no parameter '" + name + "'");
}

Decoder::HeadLayers Decoder::head_layers() const {
    return {triplane_, triplane_ + 1, density_, density_ + 1, color_out_, color_out_ + 1};
}

namespace {

diff::Tensor checked(diff::Tensor t, const std::string& layer) {
    diff::check_finite(t, "decoder layer '" + layer + "'");
    return t;
}

// Splits a [groups*P x R x R] head output into per-plane [R*R x P] tensors.
std::vector<diff::Tensor> split_planes(const diff::Tensor& head, int groups) {
    const auto channels = head.dim(0);
    const auto r = head.dim(1);
    const auto per = channels / groups;
    diff::Tensor flat = diff::reshape(head, {channels, r * r});
    std::vector<diff::Tensor> out;
    for (int g = 0; g < groups; ++g) {
        out.push_back(diff::transpose(diff::slice_rows(flat, g * per, (g + 1) * per)));
    }
    return out;
}

} // namespace

maps::MlpMapSet Decoder::decode(const diff::Tensor& z, int frame) const {
    if (z.ndim() != 1 || z.dim(0) != config_.latent_dim) {
        throw std::invalid_argument("decode: latent must be [" + std::to_string(config_.latent_dim) + "]");
    }
    diff::check_finite(z, "latent code");
    const auto& bc = config_.backbone_channels;
    const int s = config_.stem_resolution;

    diff::Tensor h = diff::matmul(diff::reshape(z, {1, config_.latent_dim}), param(fc_));
    h = checked(diff::relu(diff::add(h, param(fc_ + 1))), "stem");
    h = diff::reshape(h, {bc.front(), s, s});
    for (std::size_t i = 0; i < deconv_.size(); ++i) {
        h = diff::relu(diff::deconv2d(h, param(deconv_[i]), param(deconv_[i] + 1), 2, 1));
        h = checked(std::move(h), "backbone." + std::to_string(i));
    }

    const int planes = config_.plane_count();
    const auto shape = config_.mlp_shape();
    maps::MlpMapSet set;
    set.shape = shape;
    set.frame = frame;

    diff::Tensor tri = checked(diff::conv2d(h, param(triplane_), param(triplane_ + 1), 1, 1), "triplane");
    set.triplane.resolution = static_cast<int>(tri.dim(1));
    set.triplane.channels = config_.feature_dim;
    auto tri_planes = split_planes(tri, 3);
    for (int p = 0; p < 3; ++p) {
        set.triplane.planes[static_cast<std::size_t>(p)] = tri_planes[static_cast<std::size_t>(p)];
    }

    diff::Tensor dens = checked(diff::conv2d(h, param(density_), param(density_ + 1), 1, 1), "density");
    auto dens_planes = split_planes(dens, planes);
    for (int p = 0; p < planes; ++p) {
        set.density.push_back({enc::kOrthogonalPlanes[static_cast<std::size_t>(p)], static_cast<int>(dens.dim(1)),
                               shape.density_params(), dens_planes[static_cast<std::size_t>(p)]});
    }

    diff::Tensor c = h;
    for (std::size_t i = 0; i < color_.size(); ++i) {
        c = diff::relu(diff::conv2d(c, param(color_[i]), param(color_[i] + 1), 2, 1));
        c = checked(std::move(c), "color." + std::to_string(i));
    }
    c = checked(diff::conv2d(c, param(color_out_), param(color_out_ + 1), 1, 1), "color.out");
    auto color_planes = split_planes(c, planes);
    for (int p = 0; p < planes; ++p) {
        set.color.push_back({enc::kOrthogonalPlanes[static_cast<std::size_t>(p)], static_cast<int>(c.dim(1)),
                             shape.color_params(), color_planes[static_cast<std::size_t>(p)]});
    }
    return set;
}

} // namespace dynmap::hyper
