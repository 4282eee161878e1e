// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace egogs {

/// Row-major H x W x C image of doubles. Colors live in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    double &at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    double at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    bool same_shape(const Image &o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool operator==(const Image &) const = default;
};

/// Binary H x W mask, one byte per pixel holding 0 or 1.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t &at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    std::size_t count() const;
    bool operator==(const Mask &) const = default;
};

Mask mask_not(const Mask &m);
Mask mask_and(const Mask &a, const Mask &b);
Mask mask_or(const Mask &a, const Mask &b);

/// Morphological dilation of the set (value 1) pixels with a square
/// structuring element of side 2*radius+1.
Mask dilate_mask(const Mask &mask, int radius);

Image read_png_rgb(const std::filesystem::path &path);
/// Grayscale PNG binarized at 0.5.
Mask read_png_mask(const std::filesystem::path &path);
void write_png_rgb(const std::filesystem::path &path, const Image &image);
void write_png_mask(const std::filesystem::path &path, const Mask &mask);

} // namespace egogs
