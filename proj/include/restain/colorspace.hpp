#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "restain/image.hpp"

namespace restain {

/// Planar CIE Lab image. L in [0,100], a/b nominally in [-128,127].
struct LabImage {
    int width = 0;
    int height = 0;
    PlaneImage L, a, b;

    LabImage() = default;
    LabImage(int w, int h) : width(w), height(h), L(w, h), a(w, h), b(w, h) {}
};

// All conversions are sRGB (IEC 61966-2-1 transfer) with the D65 white
// point. The white point is taken as the row sums of the forward matrix so
// that (255,255,255) maps to L=100, a=b=0 exactly.
namespace color {

inline constexpr std::array<double, 9> kSrgbToXyz = {
    0.4124564, 0.3575761, 0.1804375,
    0.2126729, 0.7151522, 0.0721750,
    0.0193339, 0.1191920, 0.9503041,
};

inline constexpr double kWhiteX = kSrgbToXyz[0] + kSrgbToXyz[1] + kSrgbToXyz[2];
inline constexpr double kWhiteY = kSrgbToXyz[3] + kSrgbToXyz[4] + kSrgbToXyz[5];
inline constexpr double kWhiteZ = kSrgbToXyz[6] + kSrgbToXyz[7] + kSrgbToXyz[8];

constexpr std::array<double, 9> invert3x3(const std::array<double, 9>& m) {
    const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) -
                       m[1] * (m[3] * m[8] - m[5] * m[6]) +
                       m[2] * (m[3] * m[7] - m[4] * m[6]);
    const double d = 1.0 / det;
    return {
        (m[4] * m[8] - m[5] * m[7]) * d, (m[2] * m[7] - m[1] * m[8]) * d, (m[1] * m[5] - m[2] * m[4]) * d,
        (m[5] * m[6] - m[3] * m[8]) * d, (m[0] * m[8] - m[2] * m[6]) * d, (m[2] * m[3] - m[0] * m[5]) * d,
        (m[3] * m[7] - m[4] * m[6]) * d, (m[1] * m[6] - m[0] * m[7]) * d, (m[0] * m[4] - m[1] * m[3]) * d,
    };
}

inline constexpr std::array<double, 9> kXyzToSrgb = invert3x3(kSrgbToXyz);

inline constexpr double kDelta = 6.0 / 29.0;
inline constexpr double kDelta3 = kDelta * kDelta * kDelta;
// Floor applied inside power branches of the transfer functions so the
// differentiable variants keep finite gradients.
inline constexpr double kPowFloor = 1e-6;

/// sRGB transfer decode: [0,1] encoded -> linear.
inline double srgb_to_linear(double u) {
    return u <= 0.04045 ? u / 12.92 : std::pow(std::max((u + 0.055) / 1.055, kPowFloor), 2.4);
}
inline double srgb_to_linear_deriv(double u) {
    return u <= 0.04045 ? 1.0 / 12.92
                        : 2.4 / 1.055 * std::pow(std::max((u + 0.055) / 1.055, kPowFloor), 1.4);
}

/// sRGB transfer encode: linear -> [0,1] encoded.
inline double linear_to_srgb(double u) {
    return u <= 0.0031308 ? 12.92 * u : 1.055 * std::pow(std::max(u, kPowFloor), 1.0 / 2.4) - 0.055;
}
inline double linear_to_srgb_deriv(double u) {
    return u <= 0.0031308 ? 12.92 : 1.055 / 2.4 * std::pow(std::max(u, kPowFloor), 1.0 / 2.4 - 1.0);
}

/// CIE Lab companding function f(t).
inline double lab_f(double t) {
    return t > kDelta3 ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}
inline double lab_f_deriv(double t) {
    return t > kDelta3 ? 1.0 / (3.0 * std::cbrt(std::max(t, kPowFloor) * std::max(t, kPowFloor)))
                       : 1.0 / (3.0 * kDelta * kDelta);
}

/// Inverse of lab_f.
inline double lab_finv(double t) {
    return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}
inline double lab_finv_deriv(double t) {
    return t > kDelta ? 3.0 * t * t : 3.0 * kDelta * kDelta;
}

/// One 8-bit RGB pixel (0..255 doubles) to Lab.
inline void rgb_to_lab_pixel(double r, double g, double b, double& L, double& A, double& B) {
    const double lr = srgb_to_linear(r / 255.0);
    const double lg = srgb_to_linear(g / 255.0);
    const double lb = srgb_to_linear(b / 255.0);
    const double x = kSrgbToXyz[0] * lr + kSrgbToXyz[1] * lg + kSrgbToXyz[2] * lb;
    const double y = kSrgbToXyz[3] * lr + kSrgbToXyz[4] * lg + kSrgbToXyz[5] * lb;
    const double z = kSrgbToXyz[6] * lr + kSrgbToXyz[7] * lg + kSrgbToXyz[8] * lb;
    const double fx = lab_f(x / kWhiteX);
    const double fy = lab_f(y / kWhiteY);
    const double fz = lab_f(z / kWhiteZ);
    L = 116.0 * fy - 16.0;
    A = 500.0 * (fx - fy);
    B = 200.0 * (fy - fz);
}

/// One Lab pixel to continuous RGB on the 0..255 scale, no gamut clamp and
/// no quantization.
inline void lab_to_rgb_pixel(double L, double A, double B, double& r, double& g, double& b) {
    const double fy = (L + 16.0) / 116.0;
    const double fx = fy + A / 500.0;
    const double fz = fy - B / 200.0;
    const double x = kWhiteX * lab_finv(fx);
    const double y = kWhiteY * lab_finv(fy);
    const double z = kWhiteZ * lab_finv(fz);
    const double lr = kXyzToSrgb[0] * x + kXyzToSrgb[1] * y + kXyzToSrgb[2] * z;
    const double lg = kXyzToSrgb[3] * x + kXyzToSrgb[4] * y + kXyzToSrgb[5] * z;
    const double lb = kXyzToSrgb[6] * x + kXyzToSrgb[7] * y + kXyzToSrgb[8] * z;
    r = 255.0 * linear_to_srgb(lr);
    g = 255.0 * linear_to_srgb(lg);
    b = 255.0 * linear_to_srgb(lb);
}

/// Half-away-from-zero rounding clamped to the 8-bit range.
inline std::uint8_t quantize(double v) {
    const double c = std::clamp(v, 0.0, 255.0);
    return static_cast<std::uint8_t>(std::round(c));
}

} // namespace color

LabImage rgb_to_lab(const RgbImage& img);
RgbImage lab_to_rgb(const LabImage& img);

/// L plane of rgb_to_lab(img).
PlaneImage extract_L(const RgbImage& img);

} // namespace restain
