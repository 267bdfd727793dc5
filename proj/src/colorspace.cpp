#include "restain/colorspace.hpp"

namespace restain {

LabImage rgb_to_lab(const RgbImage& img) {
    LabImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        color::rgb_to_lab_pixel(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2],
                                out.L.data[i], out.a.data[i], out.b.data[i]);
    }
    return out;
}

RgbImage lab_to_rgb(const LabImage& img) {
    if (!img.L.same_dims(img.a) || !img.L.same_dims(img.b))
        throw Error("lab_to_rgb: plane dimensions differ");
    RgbImage out(img.width, img.height);
    const std::size_t n = out.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        double r, g, b;
        color::lab_to_rgb_pixel(img.L.data[i], img.a.data[i], img.b.data[i], r, g, b);
        out.data[i * 3 + 0] = color::quantize(r);
        out.data[i * 3 + 1] = color::quantize(g);
        out.data[i * 3 + 2] = color::quantize(b);
    }
    return out;
}

PlaneImage extract_L(const RgbImage& img) {
    PlaneImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        double L, a, b;
        color::rgb_to_lab_pixel(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2], L, a, b);
        out.data[i] = L;
    }
    return out;
}

} // namespace restain
