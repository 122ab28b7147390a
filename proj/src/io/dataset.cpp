// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/io/dataset.hpp>

#include <dynmap/io/png.hpp>

#include <json.hpp>

#include <fstream>
#include <map>
#include <stdexcept>

namespace dynmap::io {

using nlohmann::json;

double Dataset::normalized_time(int frame) const {
    if (frame < 0 || frame >= frames) {
        throw std::out_of_range("frame " + std::to_string(frame) + " outside the dataset");
    }
    return frames > 1 ? static_cast<double>(frame) / (frames - 1) : 0.0;
}

namespace {

[[noreturn]] void fail(const std::filesystem::path& file, const std::string& what) {
    throw std::runtime_error(file.string() + ": " + what);
}

const char* mask_name(MaskMode m) {
    switch (m) {
    case MaskMode::none: return "none";
    case MaskMode::alpha: return "alpha";
    case MaskMode::files: return "files";
    }
    return "none";
}

Vec3 vec3(const json& j, const std::filesystem::path& file, const std::string& field) {
    if (!j.is_array() || j.size() != 3) {
        fail(file, "field '" + field + "' must be an array of 3 numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Width, height and channel count from the PNG header alone.
Image8 probe(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("missing image file '" + path.string() + "'");
    }
    return read_png(path);
}

} // namespace

Dataset load_dataset(const std::filesystem::path& root) {
    const auto file = root / kManifestName;
    std::ifstream in(file);
    if (!in) {
        throw std::runtime_error("missing manifest '" + file.string() + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(file, std::string("invalid JSON: ") + e.what());
    }
    Dataset d;
    d.root = root;
    try {
        if (j.at("version").get<int>() != kManifestVersion) {
            fail(file, "unsupported manifest version " + j.at("version").dump());
        }
        d.frames = j.at("frames").get<int>();
        if (d.frames < 1) {
            fail(file, "field 'frames' must be positive");
        }
        d.bounds.min = vec3(j.at("bounds").at("min"), file, "bounds.min");
        d.bounds.max = vec3(j.at("bounds").at("max"), file, "bounds.max");
        if (!d.bounds.valid()) {
            fail(file, "field 'bounds' must have min < max on every axis");
        }
        const auto masks = j.value("masks", std::string("none"));
        if (masks == "none") {
            d.masks = MaskMode::none;
        } else if (masks == "alpha") {
            d.masks = MaskMode::alpha;
        } else if (masks == "files") {
            d.masks = MaskMode::files;
        } else {
            fail(file, "field 'masks' must be none, alpha or files");
        }
        std::map<std::string, int> by_name;
        for (const auto& c : j.at("cameras")) {
            const auto name = c.at("name").get<std::string>();
            const auto k = c.at("K").get<std::vector<double>>();
            const auto rt = c.at("extrinsics").get<std::vector<double>>();
            try {
                d.cameras.push_back({name, render::Camera::from_matrices(c.at("width").get<int>(),
                                                                         c.at("height").get<int>(), k, rt)});
            } catch (const std::invalid_argument& e) {
                fail(file, "camera '" + name + "': " + e.what());
            }
            if (!by_name.emplace(name, static_cast<int>(d.cameras.size()) - 1).second) {
                fail(file, "duplicate camera name '" + name + "'");
            }
        }
        for (const auto& im : j.at("images")) {
            ImageRef ref;
            ref.frame = im.at("frame").get<int>();
            const auto cam = im.at("camera").get<std::string>();
            ref.path = im.at("path").get<std::string>();
            const auto it = by_name.find(cam);
            if (it == by_name.end()) {
                fail(file, "image '" + ref.path + "' references unknown camera '" + cam + "'");
            }
            ref.camera = it->second;
            if (ref.frame < 0 || ref.frame >= d.frames) {
                fail(file, "image '" + ref.path + "' has frame " + std::to_string(ref.frame) + " out of range");
            }
            if (d.masks == MaskMode::files) {
                if (!im.contains("mask")) {
                    fail(file, "image '" + ref.path + "' has no 'mask' entry but masks are declared as files");
                }
                ref.mask_path = im.at("mask").get<std::string>();
            }
            d.images.push_back(std::move(ref));
        }
    } catch (const json::exception& e) {
        fail(file, std::string("malformed manifest: ") + e.what());
    }

    for (const auto& ref : d.images) {
        const auto& cam = d.cameras[static_cast<std::size_t>(ref.camera)].camera;
        const auto img = probe(root / ref.path);
        if (img.width != cam.width || img.height != cam.height) {
            fail(root / ref.path, "resolution " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                      " does not match camera '" + d.cameras[static_cast<std::size_t>(ref.camera)].name +
                                      "'");
        }
        if (d.masks == MaskMode::alpha && img.channels != 4) {
            fail(root / ref.path, "masks are declared in the alpha channel but the image has no alpha");
        }
        if (d.masks == MaskMode::files) {
            const auto m = probe(root / ref.mask_path);
            if (m.width != cam.width || m.height != cam.height) {
                fail(root / ref.mask_path, "mask resolution does not match its camera");
            }
        }
    }
    return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& root) {
    json j;
    j["version"] = kManifestVersion;
    j["frames"] = d.frames;
    j["bounds"] = {{"min", {d.bounds.min.x, d.bounds.min.y, d.bounds.min.z}},
                   {"max", {d.bounds.max.x, d.bounds.max.y, d.bounds.max.z}}};
    j["masks"] = mask_name(d.masks);
    j["cameras"] = json::array();
    for (const auto& c : d.cameras) {
        const auto k = c.camera.intrinsics_matrix();
        const auto rt = c.camera.extrinsics_matrix();
        j["cameras"].push_back({{"name", c.name},
                                {"width", c.camera.width},
                                {"height", c.camera.height},
                                {"K", std::vector<double>(k.begin(), k.end())},
                                {"extrinsics", std::vector<double>(rt.begin(), rt.end())}});
    }
    j["images"] = json::array();
    for (const auto& im : d.images) {
        json e{{"frame", im.frame},
               {"camera", d.cameras.at(static_cast<std::size_t>(im.camera)).name},
               {"path", im.path}};
        if (d.masks == MaskMode::files) {
            e["mask"] = im.mask_path;
        }
        j["images"].push_back(std::move(e));
    }
    std::filesystem::create_directories(root);
    std::ofstream out(root / kManifestName);
    if (!out) {
        throw std::runtime_error("cannot write '" + (root / kManifestName).string() + "'");
    }
    out << j.dump(2) << '\n';
}

std::vector<View> load_views(const Dataset& d) {
    std::vector<View> views;
    views.reserve(d.images.size());
    for (const auto& ref : d.images) {
        const auto img = read_png(d.root / ref.path);
        View v;
        v.frame = ref.frame;
        v.camera = ref.camera;
        v.width = img.width;
        v.height = img.height;
        const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
        const auto ch = static_cast<std::size_t>(img.channels);
        v.rgb.resize(n * 3);
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t c = 0; c < 3; ++c) {
                v.rgb[p * 3 + c] = img.pixels[p * ch + (ch >= 3 ? c : 0)] / 255.0f;
            }
        }
        if (d.masks == MaskMode::alpha) {
            v.mask.resize(n);
            for (std::size_t p = 0; p < n; ++p) {
                v.mask[p] = img.pixels[p * ch + 3] / 255.0f;
            }
        } else if (d.masks == MaskMode::files) {
            const auto m = read_png(d.root / ref.mask_path);
            const auto mc = static_cast<std::size_t>(m.channels);
            v.mask.resize(n);
            for (std::size_t p = 0; p < n; ++p) {
                v.mask[p] = m.pixels[p * mc] / 255.0f;
            }
        }
        views.push_back(std::move(v));
    }
    return views;
}

} // namespace dynmap::io
