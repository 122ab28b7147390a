// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/hyper/model.hpp>
#include <dynmap/occ/occupancy.hpp>
#include <dynmap/render/renderer.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace dynmap::app {

/// Thrown for requests that are well-formed but cannot be served.
struct RequestError : std::runtime_error {
    enum class Kind { bad_request, not_found, too_large };
    RequestError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
    Kind kind;
};

struct RenderRequest {
    int frame = 0;
    /// Pose as eye + target + up, or a full world-from-camera [R | t].
    Vec3 position{0, 0, 0};
    Vec3 look_at{0, 0, 0};
    Vec3 up{0, 0, 1};
    std::optional<std::array<double, 12>> extrinsics;
    double fov_y_deg = 50;
    int width = 256;
    int height = 256;
    bool use_ess = true;
    bool two_stage = true;

    render::Camera camera() const;
};

/// Canonical JSON form; parse(to_json(r)) == r and equal requests dump to
/// equal strings.
nlohmann::json to_json(const RenderRequest& r);
RenderRequest request_from_json(const nlohmann::json& j);
/// Query-string form used by GET /render: frame, width, height, fov, ess,
/// two_stage, pos=x,y,z, target=x,y,z, up=x,y,z or extrinsics=12 numbers.
RenderRequest request_from_query(const std::map<std::string, std::string>& query);

struct ServiceOptions {
    int max_resolution = 1024;
    /// Occupancy threshold used for empty-space skipping; half the default
    /// build threshold keeps the grid conservative.
    double occupancy_threshold = occ::kDefaultThreshold / 2;
    int threads = 1;
    std::size_t decode_cache = 4;
};

struct RenderResponse {
    std::vector<std::uint8_t> png;
    double millis = 0;
    render::RenderStats stats;
};

/// Renders PNG frames from a loaded model. Shared by the CLI and the HTTP
/// front end so both produce the same bytes for the same request.
class RenderService {
public:
    RenderService(std::shared_ptr<hyper::Model> model, std::string model_id, ServiceOptions options = {});

    nlohmann::json meta() const;
    RenderResponse render(const RenderRequest& request);

    /// Occupancy for `frame`, built on first use.
    std::shared_ptr<const occ::OccupancyVolume> occupancy(int frame);
    void set_occupancy(int frame, std::shared_ptr<const occ::OccupancyVolume> volume);

    const hyper::Model& model() const { return *model_; }
    const std::string& model_id() const { return model_id_; }
    const ServiceOptions& options() const { return options_; }

    /// The default viewpoint: on the x axis at twice the bounds diagonal.
    RenderRequest default_request() const;

private:
    std::shared_ptr<hyper::Model> model_;
    std::string model_id_;
    ServiceOptions options_;
    hyper::DecodeCache cache_;
    std::mutex occ_mutex_;
    std::map<int, std::shared_ptr<const occ::OccupancyVolume>> occ_;
};

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string content_id(std::span<const std::uint8_t> bytes);

} // namespace dynmap::app
