#pragma once

#include <array>
#include <filesystem>
#include <utility>

#include "restain/image.hpp"

namespace restain {

/// Beer-Lambert transform parameters: incident light level and the minimum
/// transmitted intensity admitted before the log (guards log(0) on
/// saturated-black pixels).
struct OdParams {
    double i0 = 255.0;
    double floor = 1.0;

    void validate() const {
        if (!(floor >= 1.0 && floor < i0 && i0 <= 255.0))
            throw Error("OdParams: require 1 <= floor < i0 <= 255");
    }
};

/// 3x3 pure-stain optical-density matrix. Rows are the H, E and residual
/// stain OD vectors; the inverse is cached at construction via the
/// closed-form adjugate.
class StainMatrix {
public:
    /// Hematoxylin / eosin / residual OD vectors from experimental
    /// statistics on H&E sections.
    static constexpr std::array<double, 9> kDefault = {
        0.65, 0.70, 0.29,
        0.07, 0.99, 0.11,
        0.27, 0.57, 0.78,
    };

    StainMatrix() : StainMatrix(kDefault) {}
    explicit StainMatrix(const std::array<double, 9>& rowMajor);

    /// Parses nine whitespace-separated floats (row-major) from a text file.
    static StainMatrix from_file(const std::filesystem::path& path);

    double m(int r, int c) const { return m_[r * 3 + c]; }
    double inv(int r, int c) const { return inv_[r * 3 + c]; }
    const std::array<double, 9>& rows() const { return m_; }
    const std::array<double, 9>& inverse() const { return inv_; }

    /// Copy with each row scaled to unit Euclidean norm.
    StainMatrix unit_rows() const;

private:
    std::array<double, 9> m_{};
    std::array<double, 9> inv_{};
};

/// Three OD planes, channel order R,G,B.
struct OdImage {
    int width = 0;
    int height = 0;
    std::array<PlaneImage, 3> od;

    OdImage() = default;
    OdImage(int w, int h) : width(w), height(h), od{PlaneImage(w, h), PlaneImage(w, h), PlaneImage(w, h)} {}
};

/// Per-pixel stain concentrations. H and E are clamped at 0; the residual
/// channel stays signed for diagnostics.
struct StainImage {
    int width = 0;
    int height = 0;
    PlaneImage h, e, residual;

    StainImage() = default;
    StainImage(int w, int h) : width(w), height(h), h(w, h), e(w, h), residual(w, h) {}
};

/// od = -ln(max(v, floor) / i0) per channel. Natural log throughout.
OdImage rgb_to_od(const RgbImage& img, const OdParams& p = {});

/// v = round(i0 * exp(-od)) clamped to [0,255].
RgbImage od_to_rgb(const OdImage& od, const OdParams& p = {});

/// Per pixel: concentration row vector A = y * M^-1 where y is the OD row
/// vector. H and E negatives (measurement noise) are zeroed.
StainImage deconvolve(const RgbImage& img, const StainMatrix& sm = {}, const OdParams& p = {});

/// Forward direction y = A * M, then od_to_rgb.
RgbImage restain(const StainImage& stain, const StainMatrix& sm = {}, const OdParams& p = {});

/// The H and E planes of deconvolve; producer of the network inputs.
std::pair<PlaneImage, PlaneImage> extract_he(const RgbImage& img, const StainMatrix& sm = {},
                                             const OdParams& p = {});

} // namespace restain
