// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/image.hpp"

#include "egogs/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace egogs {

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

Mask mask_not(const Mask &m) {
    Mask out(m.width, m.height);
    for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = m.data[i] ? 0 : 1;
    return out;
}

Mask mask_and(const Mask &a, const Mask &b) {
    Mask out(a.width, a.height);
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = (a.data[i] && b.data[i]) ? 1 : 0;
    return out;
}

Mask mask_or(const Mask &a, const Mask &b) {
    Mask out(a.width, a.height);
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = (a.data[i] || b.data[i]) ? 1 : 0;
    return out;
}

Mask dilate_mask(const Mask &mask, int radius) {
    if (radius <= 0) return mask;
    // Separable: a square element is a row pass followed by a column pass.
    Mask rows(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const int x0 = std::max(0, x - radius), x1 = std::min(mask.width - 1, x + radius);
            for (int xx = x0; xx <= x1; ++xx) rows.at(xx, y) = 1;
        }
    }
    Mask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!rows.at(x, y)) continue;
            const int y0 = std::max(0, y - radius), y1 = std::min(mask.height - 1, y + radius);
            for (int yy = y0; yy <= y1; ++yy) out.at(x, yy) = 1;
        }
    }
    return out;
}

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads any PNG and converts it to 8-bit with the requested channel count
// (1 = gray, 3 = RGB).
std::vector<std::uint8_t> read_png_raw(const std::filesystem::path &path, int want_channels, int &width,
                                       int &height) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error(ErrorKind::Load, "cannot open image " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw Error(ErrorKind::Load, "libpng init failed");
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Load, "malformed PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    const bool is_gray = color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA;
    if (want_channels == 3 && is_gray) png_set_gray_to_rgb(png);
    if (want_channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    const std::size_t stride = png_get_rowbytes(png, info);
    pixels.resize(stride * height);
    rows.resize(height);
    for (int y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

void write_png_raw(const std::filesystem::path &path, const std::uint8_t *pixels, int width, int height,
                   int channels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error(ErrorKind::Load, "cannot write image " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw Error(ErrorKind::Load, "libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Load, "PNG write failed " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * width * channels));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

Image read_png_rgb(const std::filesystem::path &path) {
    int w = 0, h = 0;
    const auto raw = read_png_raw(path, 3, w, h);
    Image img(w, h, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = raw[i] / 255.0;
    return img;
}

Mask read_png_mask(const std::filesystem::path &path) {
    int w = 0, h = 0;
    const auto raw = read_png_raw(path, 1, w, h);
    Mask m(w, h);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = raw[i] / 255.0 >= 0.5 ? 1 : 0;
    return m;
}

void write_png_rgb(const std::filesystem::path &path, const Image &image) {
    std::vector<std::uint8_t> raw(image.pixels() * 3);
    for (std::size_t p = 0; p < image.pixels(); ++p) {
        for (int c = 0; c < 3; ++c) {
            const double v = image.channels == 3 ? image.data[p * 3 + c] : image.data[p * image.channels];
            raw[p * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
    }
    write_png_raw(path, raw.data(), image.width, image.height, 3);
}

void write_png_mask(const std::filesystem::path &path, const Mask &mask) {
    std::vector<std::uint8_t> raw(mask.pixels());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mask.data[i] ? 255 : 0;
    write_png_raw(path, raw.data(), mask.width, mask.height, 1);
}

} // namespace egogs
