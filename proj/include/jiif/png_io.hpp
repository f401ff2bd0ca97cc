#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <png.h>

#include "jiif/errors.hpp"
#include "jiif/image.hpp"

namespace jiif {

namespace detail_png {

struct FileHandle {
    std::FILE* f = nullptr;
    explicit FileHandle(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (f) std::fclose(f);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

}  // namespace detail_png

/// Read an 8-bit RGB PNG into a [0,1]-valued 3-channel image. Palette, gray,
/// 16-bit, and alpha variants are converted on the fly.
inline RasterImage read_rgb8(const std::string& path) {
    detail_png::FileHandle fh(path, "rb");
    if (!fh.f) throw DataError("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng init failed for: " + path);
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG: " + path);
    }
    png_init_io(png, fh.f);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (depth == 16) png_set_strip_16(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    pixels.resize(static_cast<size_t>(h) * w * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    RasterImage out(static_cast<int64_t>(h), static_cast<int64_t>(w), 3);
    for (int64_t c = 0; c < 3; ++c) {
        double* plane = out.plane(c);
        for (int64_t y = 0; y < out.height; ++y)
            for (int64_t x = 0; x < out.width; ++x)
                plane[y * out.width + x] =
                    pixels[static_cast<size_t>((y * out.width + x) * 3 + c)] / 255.0;
    }
    return out;
}

/// Read a single-channel PNG as raw sample counts (0..65535 for 16-bit files,
/// 0..255 for 8-bit). Physical meaning comes from dataset metadata.
inline RasterImage read_gray16(const std::string& path) {
    detail_png::FileHandle fh(path, "rb");
    if (!fh.f) throw DataError("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng init failed for: " + path);
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG: " + path);
    }
    png_init_io(png, fh.f);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("expected single-channel depth PNG: " + path);
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const bool wide = depth == 16;
    const size_t stride = static_cast<size_t>(w) * (wide ? 2 : 1);
    raw.resize(static_cast<size_t>(h) * stride);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + static_cast<size_t>(y) * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    RasterImage out(static_cast<int64_t>(h), static_cast<int64_t>(w), 1);
    for (int64_t i = 0; i < out.height * out.width; ++i) {
        if (wide) {
            // PNG stores 16-bit samples big-endian.
            const size_t o = static_cast<size_t>(i) * 2;
            out.data[static_cast<size_t>(i)] =
                static_cast<double>((static_cast<uint16_t>(raw[o]) << 8) | raw[o + 1]);
        } else {
            out.data[static_cast<size_t>(i)] = static_cast<double>(raw[static_cast<size_t>(i)]);
        }
    }
    return out;
}

/// Write a 3-channel [0,1] image as 8-bit RGB. Values are clamped.
inline void write_rgb8(const RasterImage& img, const std::string& path) {
    require(img.channels == 3, "write_rgb8: need a 3-channel image");
    detail_png::FileHandle fh(path, "wb");
    if (!fh.f) throw DataError("cannot write image: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng init failed for: " + path);
    }
    std::vector<png_byte> pixels(static_cast<size_t>(img.height) * img.width * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int64_t y = 0; y < img.height; ++y) {
        for (int64_t x = 0; x < img.width; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                pixels[static_cast<size_t>((y * img.width + x) * 3 + c)] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        rows[static_cast<size_t>(y)] = pixels.data() + static_cast<size_t>(y) * img.width * 3;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG write failed: " + path);
    }
    png_init_io(png, fh.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Write a single-channel image of raw counts as 16-bit gray. Values are
/// rounded and clamped to [0, 65535].
inline void write_gray16(const RasterImage& img, const std::string& path) {
    require(img.channels == 1, "write_gray16: need a single-channel image");
    detail_png::FileHandle fh(path, "wb");
    if (!fh.f) throw DataError("cannot write image: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng init failed for: " + path);
    }
    std::vector<png_byte> raw(static_cast<size_t>(img.height) * img.width * 2);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int64_t y = 0; y < img.height; ++y) {
        for (int64_t x = 0; x < img.width; ++x) {
            const double v = std::clamp(img.at(0, y, x), 0.0, 65535.0);
            const auto s = static_cast<uint16_t>(std::lround(v));
            const size_t o = static_cast<size_t>((y * img.width + x) * 2);
            raw[o] = static_cast<png_byte>(s >> 8);
            raw[o + 1] = static_cast<png_byte>(s & 0xff);
        }
        rows[static_cast<size_t>(y)] = raw.data() + static_cast<size_t>(y) * img.width * 2;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG write failed: " + path);
    }
    png_init_io(png, fh.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace jiif
