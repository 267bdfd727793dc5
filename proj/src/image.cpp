#include "restain/image.hpp"

namespace restain {

std::vector<RgbImage> extract_patches(const RgbImage& img, int size) {
    if (size < 1)
        throw Error("patch size must be >= 1");

    const int tilesX = img.width / size;
    const int tilesY = img.height / size;

    std::vector<RgbImage> patches;
    patches.reserve(static_cast<std::size_t>(tilesX) * tilesY);

    for (int ty = 0; ty < tilesY; ++ty) {
        for (int tx = 0; tx < tilesX; ++tx) {
            RgbImage patch(size, size);
            for (int y = 0; y < size; ++y) {
                const std::uint8_t* src = &img.data[((static_cast<std::size_t>(ty) * size + y) * img.width + static_cast<std::size_t>(tx) * size) * 3];
                std::uint8_t* dst = &patch.data[static_cast<std::size_t>(y) * size * 3];
                std::copy(src, src + static_cast<std::size_t>(size) * 3, dst);
            }
            patches.push_back(std::move(patch));
        }
    }
    return patches;
}

} // namespace restain
