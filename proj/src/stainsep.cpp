#include "restain/stainsep.hpp"

#include <cmath>
#include <fstream>

namespace restain {

StainMatrix::StainMatrix(const std::array<double, 9>& rowMajor) : m_(rowMajor) {
    const auto& m = m_;
    const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) -
                       m[1] * (m[3] * m[8] - m[5] * m[6]) +
                       m[2] * (m[3] * m[7] - m[4] * m[6]);
    if (std::abs(det) <= 1e-6)
        throw Error("StainMatrix: singular matrix (|det| <= 1e-6)");
    const double d = 1.0 / det;
    inv_ = {
        (m[4] * m[8] - m[5] * m[7]) * d, (m[2] * m[7] - m[1] * m[8]) * d, (m[1] * m[5] - m[2] * m[4]) * d,
        (m[5] * m[6] - m[3] * m[8]) * d, (m[0] * m[8] - m[2] * m[6]) * d, (m[2] * m[3] - m[0] * m[5]) * d,
        (m[3] * m[7] - m[4] * m[6]) * d, (m[1] * m[6] - m[0] * m[7]) * d, (m[0] * m[4] - m[1] * m[3]) * d,
    };
}

StainMatrix StainMatrix::from_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f)
        throw Error("cannot open stain matrix file: " + path.string());
    std::array<double, 9> m{};
    for (double& v : m) {
        if (!(f >> v))
            throw Error("stain matrix file must contain nine floats: " + path.string());
    }
    return StainMatrix(m);
}

StainMatrix StainMatrix::unit_rows() const {
    std::array<double, 9> out = m_;
    for (int r = 0; r < 3; ++r) {
        const double n = std::sqrt(out[r * 3] * out[r * 3] + out[r * 3 + 1] * out[r * 3 + 1] +
                                   out[r * 3 + 2] * out[r * 3 + 2]);
        if (n <= 0.0)
            throw Error("StainMatrix::unit_rows: zero row");
        for (int c = 0; c < 3; ++c)
            out[r * 3 + c] /= n;
    }
    return StainMatrix(out);
}

OdImage rgb_to_od(const RgbImage& img, const OdParams& p) {
    p.validate();
    OdImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    const double logI0 = std::log(p.i0);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double v = std::max(static_cast<double>(img.data[i * 3 + c]), p.floor);
            out.od[c].data[i] = logI0 - std::log(v);
        }
    }
    return out;
}

RgbImage od_to_rgb(const OdImage& od, const OdParams& p) {
    p.validate();
    RgbImage out(od.width, od.height);
    const std::size_t n = out.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double v = p.i0 * std::exp(-od.od[c].data[i]);
            out.data[i * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    return out;
}

StainImage deconvolve(const RgbImage& img, const StainMatrix& sm, const OdParams& p) {
    const OdImage od = rgb_to_od(img, p);
    StainImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const double y0 = od.od[0].data[i];
        const double y1 = od.od[1].data[i];
        const double y2 = od.od[2].data[i];
        // row vector times cached inverse: A_j = sum_c y_c * inv(c, j)
        const double h = y0 * sm.inv(0, 0) + y1 * sm.inv(1, 0) + y2 * sm.inv(2, 0);
        const double e = y0 * sm.inv(0, 1) + y1 * sm.inv(1, 1) + y2 * sm.inv(2, 1);
        const double r = y0 * sm.inv(0, 2) + y1 * sm.inv(1, 2) + y2 * sm.inv(2, 2);
        out.h.data[i] = std::max(h, 0.0);
        out.e.data[i] = std::max(e, 0.0);
        out.residual.data[i] = r;
    }
    return out;
}

RgbImage restain(const StainImage& stain, const StainMatrix& sm, const OdParams& p) {
    if (!stain.h.same_dims(stain.e) || !stain.h.same_dims(stain.residual))
        throw Error("restain: plane dimensions differ");
    OdImage od(stain.width, stain.height);
    const std::size_t n = od.od[0].size();
    for (std::size_t i = 0; i < n; ++i) {
        const double a0 = stain.h.data[i];
        const double a1 = stain.e.data[i];
        const double a2 = stain.residual.data[i];
        for (int c = 0; c < 3; ++c)
            od.od[c].data[i] = a0 * sm.m(0, c) + a1 * sm.m(1, c) + a2 * sm.m(2, c);
    }
    return od_to_rgb(od, p);
}

std::pair<PlaneImage, PlaneImage> extract_he(const RgbImage& img, const StainMatrix& sm, const OdParams& p) {
    StainImage s = deconvolve(img, sm, p);
    return {std::move(s.h), std::move(s.e)};
}

} // namespace restain
