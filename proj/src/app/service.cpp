// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/app/service.hpp>

#include <dynmap/io/png.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dynmap::app {

using nlohmann::json;
using Kind = RequestError::Kind;

render::Camera RenderRequest::camera() const {
    if (width < 1 || height < 1) {
        throw RequestError(Kind::bad_request, "resolution must be positive");
    }
    if (!(fov_y_deg > 0 && fov_y_deg < 180)) {
        throw RequestError(Kind::bad_request, "fov must lie in (0, 180) degrees");
    }
    try {
        if (extrinsics) {
            const double fy = 0.5 * height / std::tan(0.5 * fov_y_deg * std::acos(-1.0) / 180);
            const std::array<double, 9> k{fy, 0, 0.5 * (width - 1), 0, fy, 0.5 * (height - 1), 0, 0, 1};
            return render::Camera::from_matrices(width, height, k, *extrinsics);
        }
        if (norm(look_at - position) == 0 || norm(cross(look_at - position, up)) == 0) {
            throw RequestError(Kind::bad_request, "pose is degenerate: eye equals target or up is parallel to view");
        }
        return render::Camera::look_at(position, look_at, up, width, height, fov_y_deg);
    } catch (const std::invalid_argument& e) {
        throw RequestError(Kind::bad_request, e.what());
    }
}

namespace {

json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 to_vec(const json& j, const char* field) {
    if (!j.is_array() || j.size() != 3) {
        throw RequestError(Kind::bad_request, std::string("field '") + field + "' must hold 3 numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<double> numbers(const std::string& s, const char* field) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw RequestError(Kind::bad_request, std::string("field '") + field + "' is not a number list");
        }
    }
    return out;
}

bool flag(const std::string& s, const char* field) {
    if (s == "1" || s == "true" || s == "on") {
        return true;
    }
    if (s == "0" || s == "false" || s == "off") {
        return false;
    }
    throw RequestError(Kind::bad_request, std::string("field '") + field + "' must be a boolean");
}

} // namespace

json to_json(const RenderRequest& r) {
    json j{{"frame", r.frame},       {"fov", r.fov_y_deg},  {"width", r.width},
           {"height", r.height},     {"use_ess", r.use_ess}, {"two_stage", r.two_stage}};
    if (r.extrinsics) {
        j["extrinsics"] = std::vector<double>(r.extrinsics->begin(), r.extrinsics->end());
    } else {
        j["position"] = vec(r.position);
        j["look_at"] = vec(r.look_at);
        j["up"] = vec(r.up);
    }
    return j;
}

RenderRequest request_from_json(const json& j) {
    if (!j.is_object()) {
        throw RequestError(Kind::bad_request, "render request must be a JSON object");
    }
    static const char* known[] = {"frame",  "fov",     "width",     "height",    "use_ess",
                                  "two_stage", "extrinsics", "position", "look_at", "up"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw RequestError(Kind::bad_request, "unknown request field '" + key + "'");
        }
    }
    RenderRequest r;
    try {
        r.frame = j.value("frame", r.frame);
        r.fov_y_deg = j.value("fov", r.fov_y_deg);
        r.width = j.value("width", r.width);
        r.height = j.value("height", r.height);
        r.use_ess = j.value("use_ess", r.use_ess);
        r.two_stage = j.value("two_stage", r.two_stage);
        if (j.contains("extrinsics")) {
            const auto e = j.at("extrinsics").get<std::vector<double>>();
            if (e.size() != 12) {
                throw RequestError(Kind::bad_request, "field 'extrinsics' must hold 12 numbers");
            }
            r.extrinsics.emplace();
            std::copy(e.begin(), e.end(), r.extrinsics->begin());
        } else {
            if (!j.contains("position") || !j.contains("look_at")) {
                throw RequestError(Kind::bad_request, "request needs 'position' and 'look_at' or 'extrinsics'");
            }
            r.position = to_vec(j.at("position"), "position");
            r.look_at = to_vec(j.at("look_at"), "look_at");
            if (j.contains("up")) {
                r.up = to_vec(j.at("up"), "up");
            }
        }
    } catch (const json::exception& e) {
        throw RequestError(Kind::bad_request, std::string("malformed render request: ") + e.what());
    }
    return r;
}

RenderRequest request_from_query(const std::map<std::string, std::string>& q) {
    json j = json::object();
    for (const auto& [key, value] : q) {
        if (key == "frame" || key == "width" || key == "height") {
            const auto v = numbers(value, key.c_str());
            if (v.size() != 1 || v[0] != std::floor(v[0])) {
                throw RequestError(Kind::bad_request, "field '" + key + "' must be an integer");
            }
            j[key] = static_cast<int>(v[0]);
        } else if (key == "fov") {
            const auto v = numbers(value, "fov");
            if (v.size() != 1) {
                throw RequestError(Kind::bad_request, "field 'fov' must be one number");
            }
            j["fov"] = v[0];
        } else if (key == "ess" || key == "use_ess") {
            j["use_ess"] = flag(value, "ess");
        } else if (key == "two_stage") {
            j["two_stage"] = flag(value, "two_stage");
        } else if (key == "pos" || key == "position" || key == "target" || key == "look_at" || key == "up" ||
                   key == "extrinsics") {
            const std::string name = key == "pos" ? "position" : (key == "target" ? "look_at" : key);
            j[name] = numbers(value, name.c_str());
        } else {
            throw RequestError(Kind::bad_request, "unknown query parameter '" + key + "'");
        }
    }
    return request_from_json(j);
}

RenderService::RenderService(std::shared_ptr<hyper::Model> model, std::string model_id, ServiceOptions options)
    : model_(std::move(model)), model_id_(std::move(model_id)), options_(options),
      cache_(*model_, options.decode_cache) {}

RenderRequest RenderService::default_request() const {
    const auto& b = model_->bounds();
    RenderRequest r;
    r.look_at = b.center();
    r.position = b.center() + Vec3{2 * b.diagonal(), 0, 0};
    r.up = {0, 0, 1};
    return r;
}

json RenderService::meta() const {
    const auto& b = model_->bounds();
    return {{"frames", model_->frames()},
            {"bounds", {{"min", vec(b.min)}, {"max", vec(b.max)}}},
            {"default_camera", to_json(default_request())},
            {"model", model_id_},
            {"max_resolution", options_.max_resolution}};
}

std::shared_ptr<const occ::OccupancyVolume> RenderService::occupancy(int frame) {
    std::lock_guard lock(occ_mutex_);
    auto it = occ_.find(frame);
    if (it == occ_.end()) {
        const auto set = cache_.get(frame);
        auto vol = std::make_shared<const occ::OccupancyVolume>(
            occ::build(*model_, *set, {}, options_.occupancy_threshold, options_.threads));
        it = occ_.emplace(frame, std::move(vol)).first;
    }
    return it->second;
}

void RenderService::set_occupancy(int frame, std::shared_ptr<const occ::OccupancyVolume> volume) {
    std::lock_guard lock(occ_mutex_);
    occ_[frame] = std::move(volume);
}

RenderResponse RenderService::render(const RenderRequest& req) {
    if (req.frame < 0 || req.frame >= model_->frames()) {
        throw RequestError(Kind::not_found, "frame " + std::to_string(req.frame) + " outside [0, " +
                                                std::to_string(model_->frames() - 1) + "]");
    }
    if (req.width > options_.max_resolution || req.height > options_.max_resolution) {
        throw RequestError(Kind::too_large, "resolution " + std::to_string(req.width) + "x" +
                                                std::to_string(req.height) + " exceeds the maximum " +
                                                std::to_string(options_.max_resolution));
    }
    const auto cam = req.camera();
    const auto start = std::chrono::steady_clock::now();
    const auto set = cache_.get(req.frame);
    std::shared_ptr<const occ::OccupancyVolume> vol;
    if (req.use_ess) {
        vol = occupancy(req.frame);
    }
    render::RenderOptions opt;
    opt.use_ess = req.use_ess;
    opt.two_stage = req.two_stage;
    opt.threads = options_.threads;
    const auto img = render::render_image(*model_, *set, cam, opt, vol.get());
    RenderResponse out;
    out.stats = img.stats;
    io::Image8 png{img.width, img.height, 4, render::to_rgba8(img)};
    out.png = io::encode_png(png, {{"dynmap.request", to_json(req).dump()}, {"dynmap.model", model_id_}});
    out.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::string content_id(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto b : bytes) {
        h = (h ^ b) * 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace dynmap::app
