// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/hyper/model.hpp>

#include <dynmap/maps/mlp_map.hpp>

#include <algorithm>
#include <stdexcept>

namespace dynmap::hyper {

namespace {
Rng seeded(std::uint64_t seed) { return Rng(seed); }
} // namespace

Model::Model(const ModelConfig& config) : config_(config) {
    config_.validate();
    Rng rng = seeded(config_.seed);
    latents_ = LatentTable(config_.frames, config_.decoder.latent_dim, rng);
    decoder_ = Decoder(config_.decoder, rng);
    projector_ = enc::FeatureProjector(config_.hash.encoded_dim(), config_.decoder.feature_dim, rng);
    hash_ = enc::HashTableSet(config_.hash, config_.seed + 1);
}

maps::MlpMapSet Model::decode(int frame) const { return decoder_.decode(latents_.latent(frame), frame); }

diff::Tensor Model::features(const maps::MlpMapSet& set, std::span<const Vec3> unit_points) const {
    return enc::point_embed(hash_, projector_, set.triplane, unit_points, config_.normalized_time(set.frame));
}

std::vector<double> Model::density(const maps::MlpMapSet& set, std::span<const Vec3> unit_points) const {
    diff::NoGradGuard guard;
    constexpr std::size_t kChunk = 8192;
    std::vector<double> out;
    out.reserve(unit_points.size());
    for (std::size_t b = 0; b < unit_points.size(); b += kChunk) {
        const auto pts = unit_points.subspan(b, std::min(kChunk, unit_points.size() - b));
        const auto sigma = maps::batched_eval(set, pts, features(set, pts), diff::Tensor(), maps::Head::density);
        const auto v = sigma.values();
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

std::vector<ParameterGroup> Model::parameter_groups() {
    std::vector<ParameterGroup> groups;
    groups.push_back({"latents", kNetworkLearningRate, {latents_.codes()}});
    ParameterGroup dec{"decoder", kNetworkLearningRate, {}};
    for (auto& p : decoder_.parameters()) {
        dec.tensors.push_back(p.tensor);
    }
    groups.push_back(std::move(dec));
    groups.push_back({"hash", kHashLearningRate, {hash_.tables()[0], hash_.tables()[1], hash_.tables()[2]}});
    groups.push_back({"projector", kNetworkLearningRate, {projector_.weight()}});
    return groups;
}

std::vector<NamedTensor> Model::named_parameters() {
    std::vector<NamedTensor> out;
    out.push_back({"latents", latents_.codes()});
    for (auto& p : decoder_.parameters()) {
        out.push_back({"decoder." + p.name, p.tensor});
    }
    for (auto p : enc::kOrthogonalPlanes) {
        out.push_back({"hash." + std::string(enc::plane_name(p)), hash_.table(p)});
    }
    out.push_back({"projector", projector_.weight()});
    return out;
}

std::int64_t Model::parameter_count() const {
    std::int64_t n = latents_.codes().numel() + decoder_.parameter_count() + projector_.weight().numel();
    for (const auto& t : hash_.tables()) {
        n += t.numel();
    }
    return n;
}

DecodeCache::DecodeCache(const Model& model, std::size_t capacity) : model_(model), capacity_(capacity) {
    if (capacity_ == 0) {
        throw std::invalid_argument("decode cache capacity must be positive");
    }
}

std::shared_ptr<const maps::MlpMapSet> DecodeCache::get(int frame) {
    std::lock_guard lock(mutex_);
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->first == frame) {
            entries_.splice(entries_.begin(), entries_, it);
            return entries_.front().second;
        }
    }
    diff::NoGradGuard guard;
    auto set = std::make_shared<const maps::MlpMapSet>(model_.decode(frame));
    ++decodes_;
    entries_.emplace_front(frame, set);
    if (entries_.size() > capacity_) {
        entries_.pop_back();
    }
    return set;
}

std::int64_t DecodeCache::decode_count() const {
    std::lock_guard lock(mutex_);
    return decodes_;
}

void DecodeCache::clear() {
    std::lock_guard lock(mutex_);
    entries_.clear();
}

} // namespace dynmap::hyper
