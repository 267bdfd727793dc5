#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace restain {

/// Error type thrown by all restain operations.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// 8-bit interleaved RGB raster, row-major. The external interchange form.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // width*height*3 bytes, RGB triples

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h) {
        if (w < 1 || h < 1)
            throw Error("RgbImage dimensions must be >= 1");
        data.assign(static_cast<std::size_t>(w) * h * 3, 0);
    }

    std::uint8_t& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }

    bool same_dims(const RgbImage& o) const {
        return width == o.width && height == o.height;
    }

    friend bool operator==(const RgbImage& a, const RgbImage& b) {
        return a.width == b.width && a.height == b.height && a.data == b.data;
    }
};

/// Single-channel floating-point plane (L, a, b, H or E map).
struct PlaneImage {
    int width = 0;
    int height = 0;
    std::vector<double> data; // width*height doubles

    PlaneImage() = default;
    PlaneImage(int w, int h, double fill = 0.0) : width(w), height(h) {
        if (w < 1 || h < 1)
            throw Error("PlaneImage dimensions must be >= 1");
        data.assign(static_cast<std::size_t>(w) * h, fill);
    }

    double& at(int x, int y) {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    double at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }

    std::size_t size() const { return data.size(); }

    bool same_dims(const PlaneImage& o) const {
        return width == o.width && height == o.height;
    }
};

/// Non-overlapping size x size tiles in row-major tile order.
/// Right/bottom remainders smaller than size are dropped; an image smaller
/// than size yields an empty list.
std::vector<RgbImage> extract_patches(const RgbImage& img, int size);

} // namespace restain
