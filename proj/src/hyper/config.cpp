// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/hyper/config.hpp>

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dynmap::hyper {

int DecoderConfig::backbone_resolution() const {
    return stem_resolution << (static_cast<int>(backbone_channels.size()) - 1);
}

int DecoderConfig::color_resolution() const {
    int r = backbone_resolution();
    for (std::size_t i = 0; i < color_channels.size(); ++i) {
        r = (r + 1) / 2;
    }
    return r;
}

void DecoderConfig::validate() const {
    if (latent_dim < 1 || stem_resolution < 1 || backbone_channels.empty() || feature_dim < 1 || hidden_dim < 1) {
        throw std::invalid_argument("invalid decoder configuration");
    }
    for (int c : backbone_channels) {
        if (c < 1) {
            throw std::invalid_argument("invalid backbone channel width");
        }
    }
    for (int c : color_channels) {
        if (c < 1) {
            throw std::invalid_argument("invalid color head channel width");
        }
    }
}

ModelConfig ModelConfig::defaults() { return ModelConfig{}; }

ModelConfig ModelConfig::shrunk(int factor) {
    if (factor < 1 || (factor & (factor - 1)) != 0) {
        throw std::invalid_argument("shrink factor must be a power of two");
    }
    ModelConfig c;
    int steps = 0;
    while ((1 << steps) < factor) {
        ++steps;
    }
    auto& d = c.decoder;
    const auto full = d.backbone_channels;
    const int deconvs = std::max(0, static_cast<int>(full.size()) - 1 - steps);
    d.backbone_channels.clear();
    d.backbone_channels.push_back(std::max(4, full.front() / factor));
    for (int i = 0; i < deconvs; ++i) {
        d.backbone_channels.push_back(std::max(4, full[full.size() - static_cast<std::size_t>(deconvs - i)] / factor));
    }
    for (auto& ch : d.color_channels) {
        ch = std::max(4, ch / factor);
    }
    c.hash.min_resolution = std::max(2, c.hash.min_resolution / factor);
    c.hash.max_resolution = std::max(c.hash.min_resolution, c.hash.max_resolution / factor);
    c.hash.log2_table_size = std::max(8, c.hash.log2_table_size - 2 * steps);
    return c;
}

double ModelConfig::normalized_time(int frame) const {
    if (frame < 0 || frame >= frames) {
        throw std::out_of_range("frame " + std::to_string(frame) + " outside [0, " + std::to_string(frames) + ")");
    }
    return frames > 1 ? static_cast<double>(frame) / (frames - 1) : 0.0;
}

void ModelConfig::validate() const {
    decoder.validate();
    hash.validate();
    if (frames < 1) {
        throw std::invalid_argument("model needs at least one frame");
    }
    if (!bounds.valid()) {
        throw std::invalid_argument("scene bounds must have positive volume");
    }
}

namespace {
nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }
Vec3 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
} // namespace

nlohmann::json to_json(const ModelConfig& c) {
    const auto& d = c.decoder;
    return {
        {"decoder",
         {{"latent_dim", d.latent_dim},
          {"stem_resolution", d.stem_resolution},
          {"backbone_channels", d.backbone_channels},
          {"feature_dim", d.feature_dim},
          {"hidden_dim", d.hidden_dim},
          {"color_channels", d.color_channels},
          {"layout", d.layout == PlaneLayout::orthogonal ? "orthogonal" : "xy_only"}}},
        {"hash",
         {{"levels", c.hash.levels},
          {"log2_table_size", c.hash.log2_table_size},
          {"features", c.hash.features},
          {"min_resolution", c.hash.min_resolution},
          {"max_resolution", c.hash.max_resolution}}},
        {"frames", c.frames},
        {"bounds", {{"min", vec_json(c.bounds.min)}, {"max", vec_json(c.bounds.max)}}},
        {"seed", c.seed},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    const auto& d = j.at("decoder");
    c.decoder.latent_dim = d.at("latent_dim").get<int>();
    c.decoder.stem_resolution = d.at("stem_resolution").get<int>();
    c.decoder.backbone_channels = d.at("backbone_channels").get<std::vector<int>>();
    c.decoder.feature_dim = d.at("feature_dim").get<int>();
    c.decoder.hidden_dim = d.at("hidden_dim").get<int>();
    c.decoder.color_channels = d.at("color_channels").get<std::vector<int>>();
    const auto layout = d.at("layout").get<std::string>();
    if (layout == "orthogonal") {
        c.decoder.layout = PlaneLayout::orthogonal;
    } else if (layout == "xy_only") {
        c.decoder.layout = PlaneLayout::xy_only;
    } else {
        throw std::invalid_argument("unknown plane layout '" + layout + "'");
    }
    const auto& h = j.at("hash");
    c.hash.levels = h.at("levels").get<int>();
    c.hash.log2_table_size = h.at("log2_table_size").get<int>();
    c.hash.features = h.at("features").get<int>();
    c.hash.min_resolution = h.at("min_resolution").get<int>();
    c.hash.max_resolution = h.at("max_resolution").get<int>();
    c.frames = j.at("frames").get<int>();
    c.bounds.min = json_vec(j.at("bounds").at("min"));
    c.bounds.max = json_vec(j.at("bounds").at("max"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

} // namespace dynmap::hyper
