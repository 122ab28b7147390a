// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/core/geometry.hpp>
#include <dynmap/render/camera.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dynmap::io {

enum class MaskMode { none, alpha, files };

struct CameraRecord {
    std::string name;
    render::Camera camera;
};

struct ImageRef {
    int frame = 0;
    int camera = 0;          ///< index into Dataset::cameras
    std::string path;        ///< relative to the dataset root
    std::string mask_path;   ///< set only with MaskMode::files
};

/// Multi-view video: one image per (frame, camera) pair listed in
/// manifest.json under the dataset root.
struct Dataset {
    std::filesystem::path root;
    int frames = 0;
    SceneBounds bounds;
    MaskMode masks = MaskMode::none;
    std::vector<CameraRecord> cameras;
    std::vector<ImageRef> images;

    /// frame / (frames - 1), or 0 for a single frame.
    double normalized_time(int frame) const;
};

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

/// Parses and validates root/manifest.json: every image and mask must exist
/// and match its camera's resolution, rotations must be orthonormal and the
/// bounds must have positive volume. Errors name the offending file or field.
Dataset load_dataset(const std::filesystem::path& root);

/// Writes root/manifest.json for `dataset` (images are not touched).
void write_dataset(const Dataset& dataset, const std::filesystem::path& root);

/// Decoded training view: linear RGB in [0, 1] and an optional mask.
struct View {
    int frame = 0;
    int camera = 0;
    int width = 0;
    int height = 0;
    std::vector<float> rgb;
    std::vector<float> mask; ///< empty without masks
};

std::vector<View> load_views(const Dataset& dataset);

} // namespace dynmap::io
