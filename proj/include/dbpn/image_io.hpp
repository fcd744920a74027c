// SPDX-License-Identifier: Apache-2.0
#pragma once

// PNG (via libpng) and binary PPM/PGM readers/writers, 8-bit only.
// Pixels are mapped to [0,1] floats as byte/255; writers emit
// round(v*255) after clamping, so 8-bit content round-trips exactly.

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include "dbpn/image.hpp"

namespace dbpn {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline bool has_suffix(const std::string& s, const char* suf) {
    const std::size_t n = std::strlen(suf);
    return s.size() >= n && s.compare(s.size() - n, n, suf) == 0;
}

inline ImagePlane load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed for " + path);
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported bit depth (16) in " + path + "; 8-bit images only");
    }
    const int ctype = png_get_color_type(png, info);
    if (ctype == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (ctype == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(msg_cat("unsupported channel count ", channels, " in ", path));
    }
    const std::size_t stride = png_get_rowbytes(png, info);
    pixels.resize(stride * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImagePlane img(static_cast<int>(h), static_cast<int>(w), channels,
                   channels == 3 ? Colorspace::RGB : Colorspace::Y);
    for (png_uint_32 y = 0; y < h; ++y)
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(c, static_cast<int>(y), static_cast<int>(x)) =
                    pixels[y * stride + x * channels + c] / 255.f;
    return img;
}

inline void save_png(const ImagePlane& img, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot write image: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed for " + path);
    }
    std::vector<png_byte> row(static_cast<std::size_t>(img.w) * img.c);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.w, img.h, 8,
                 img.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < img.c; ++c) {
                const float v = std::clamp(img.at(c, y, x), 0.f, 1.f);
                row[static_cast<std::size_t>(x) * img.c + c] =
                    static_cast<png_byte>(v * 255.f + 0.5f);
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Binary PPM (P6) / PGM (P5), maxval 255.
inline ImagePlane load_pnm(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open image: " + path);
    auto token = [&]() -> std::string {
        std::string t;
        int ch;
        while ((ch = std::fgetc(f.get())) != EOF) {
            if (ch == '#') {  // comment to end of line
                while ((ch = std::fgetc(f.get())) != EOF && ch != '\n') {}
                continue;
            }
            if (std::isspace(ch)) {
                if (!t.empty()) break;
                continue;
            }
            t.push_back(static_cast<char>(ch));
        }
        return t;
    };
    const std::string magic = token();
    if (magic != "P5" && magic != "P6")
        throw IoError("not a binary PGM/PPM (magic '" + magic + "'): " + path);
    const int channels = magic == "P6" ? 3 : 1;
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw IoError("malformed PNM header in " + path);
    }
    if (w <= 0 || h <= 0) throw IoError("bad PNM dimensions in " + path);
    if (maxval != 255)
        throw IoError(msg_cat("unsupported PNM maxval ", maxval, " in ", path, "; 8-bit only"));
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * channels);
    if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
        throw IoError("truncated PNM pixel data in " + path);
    ImagePlane img(h, w, channels, channels == 3 ? Colorspace::RGB : Colorspace::Y);
    std::size_t i = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) img.at(c, y, x) = buf[i++] / 255.f;
    return img;
}

inline void save_pnm(const ImagePlane& img, const std::string& path) {
    const bool color = img.c == 3;
    DBPN_CHECK(img.c == 1 || img.c == 3, "PNM save: unsupported channel count ", img.c);
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot write image: " + path);
    std::fprintf(f.get(), "%s\n%d %d\n255\n", color ? "P6" : "P5", img.w, img.h);
    std::vector<unsigned char> buf(static_cast<std::size_t>(img.w) * img.h * img.c);
    std::size_t i = 0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < img.c; ++c) {
                const float v = std::clamp(img.at(c, y, x), 0.f, 1.f);
                buf[i++] = static_cast<unsigned char>(v * 255.f + 0.5f);
            }
    if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size())
        throw IoError("short write to " + path);
}

}  // namespace detail

inline ImagePlane load_image(const std::string& path) {
    if (detail::has_suffix(path, ".png") || detail::has_suffix(path, ".PNG"))
        return detail::load_png(path);
    if (detail::has_suffix(path, ".ppm") || detail::has_suffix(path, ".pgm"))
        return detail::load_pnm(path);
    throw IoError("unsupported image format (need .png/.ppm/.pgm): " + path);
}

inline void save_image(const ImagePlane& img, const std::string& path) {
    if (detail::has_suffix(path, ".png") || detail::has_suffix(path, ".PNG")) {
        detail::save_png(img, path);
        return;
    }
    if (detail::has_suffix(path, ".ppm") || detail::has_suffix(path, ".pgm")) {
        detail::save_pnm(img, path);
        return;
    }
    throw IoError("unsupported image format (need .png/.ppm/.pgm): " + path);
}

}  // namespace dbpn
