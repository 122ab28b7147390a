// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dynmap::io {

/// 8-bit image with 1 (gray), 3 (RGB) or 4 (RGBA) interleaved channels.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

using TextChunks = std::vector<std::pair<std::string, std::string>>;

/// Encodes with fixed zlib settings so equal inputs give equal bytes.
std::vector<std::uint8_t> encode_png(const Image8& image, const TextChunks& text = {});
Image8 decode_png(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const Image8& image, const TextChunks& text = {});
Image8 read_png(const std::filesystem::path& path);

/// Text chunks stored in an encoded PNG, in file order.
TextChunks png_text(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace dynmap::io
