// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/hyper/model.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace dynmap::io {

// Layout, all little-endian:
//   "DYNMAPCK" | u32 version | u32 n, config JSON (n bytes) | u32 tensor count
//   per tensor: u16 n, name | u8 dtype (0 f32, 1 f64) | u8 rank | i64 dims | raw values
inline constexpr char kCheckpointMagic[8] = {'D', 'Y', 'N', 'M', 'A', 'P', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(hyper::Model& model);

/// Rebuilds the model from the config echo and fills every parameter. Throws
/// std::runtime_error on bad magic or version, truncation, unknown or missing
/// tensors and shape or count mismatches against the config.
std::unique_ptr<hyper::Model> deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(hyper::Model& model, const std::filesystem::path& path);
std::unique_ptr<hyper::Model> load_checkpoint(const std::filesystem::path& path);

/// Reals stored for the hash tables (three tables of levels x size x F).
std::int64_t hash_payload_reals(hyper::Model& model);

} // namespace dynmap::io
