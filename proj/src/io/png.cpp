// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/io/png.hpp>

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace dynmap::io {

namespace {

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("png: ") + msg); }
void png_quiet(png_structp, png_const_charp) {}

int color_type(int channels) {
    switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGBA;
    default: throw std::invalid_argument("png: unsupported channel count " + std::to_string(channels));
    }
}

struct Reader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
};

void read_cb(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<Reader*>(png_get_io_ptr(png));
    if (r->pos + n > r->data.size()) {
        png_error(png, "truncated stream");
    }
    std::memcpy(out, r->data.data() + r->pos, n);
    r->pos += n;
}

void write_cb(png_structp png, png_bytep in, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), in, in + n);
}

void flush_cb(png_structp) {}

} // namespace

std::vector<std::uint8_t> encode_png(const Image8& image, const TextChunks& text) {
    if (image.width < 1 || image.height < 1 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw std::invalid_argument("png: pixel buffer does not match the image size");
    }
    const int ct = color_type(image.channels);
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: cannot allocate encoder");
    }
    try {
        png_set_write_fn(png, &out, write_cb, flush_cb);
        png_set_compression_level(png, 6);
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8, ct,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        std::vector<::png_text> chunks(text.size());
        for (std::size_t i = 0; i < text.size(); ++i) {
            chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
            chunks[i].key = const_cast<char*>(text[i].first.c_str());
            chunks[i].text = const_cast<char*>(text[i].second.c_str());
            chunks[i].text_length = text[i].second.size();
        }
        if (!chunks.empty()) {
            png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));
        }
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
        for (int y = 0; y < image.height; ++y) {
            png_write_row(png, const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * stride));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

namespace {

template <class Fn>
void with_reader(std::span<const std::uint8_t> bytes, Fn&& fn) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw std::runtime_error("png: not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: cannot allocate decoder");
    }
    Reader reader{bytes, 0};
    try {
        png_set_read_fn(png, &reader, read_cb);
        fn(png, info);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
}

} // namespace

Image8 decode_png(std::span<const std::uint8_t> bytes) {
    Image8 img;
    with_reader(bytes, [&](png_structp png, png_infop info) {
        png_read_info(png, info);
        const int depth = png_get_bit_depth(png, info);
        const int ct = png_get_color_type(png, info);
        if (depth == 16) {
            png_set_strip_16(png);
        }
        if (ct == PNG_COLOR_TYPE_PALETTE) {
            png_set_palette_to_rgb(png);
        }
        if (ct == PNG_COLOR_TYPE_GRAY && depth < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
        }
        if (png_get_valid(png, info, PNG_INFO_tRNS)) {
            png_set_tRNS_to_alpha(png);
        }
        if (ct == PNG_COLOR_TYPE_GRAY_ALPHA) {
            png_set_gray_to_rgb(png);
        }
        png_read_update_info(png, info);
        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        img.channels = png_get_channels(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        img.pixels.resize(stride * static_cast<std::size_t>(img.height));
        std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
        for (int y = 0; y < img.height; ++y) {
            rows[static_cast<std::size_t>(y)] = img.pixels.data() + static_cast<std::size_t>(y) * stride;
        }
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    });
    return img;
}

TextChunks png_text(std::span<const std::uint8_t> bytes) {
    TextChunks out;
    with_reader(bytes, [&](png_structp png, png_infop info) {
        png_read_info(png, info);
        png_textp text = nullptr;
        int n = 0;
        png_get_text(png, info, &text, &n);
        for (int i = 0; i < n; ++i) {
            out.emplace_back(text[i].key, std::string(text[i].text, text[i].text_length));
        }
    });
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

void write_png(const std::filesystem::path& path, const Image8& image, const TextChunks& text) {
    write_file(path, encode_png(image, text));
}

Image8 read_png(const std::filesystem::path& path) {
    try {
        return decode_png(read_file(path));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

} // namespace dynmap::io
