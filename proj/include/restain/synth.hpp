#pragma once

#include <cstdint>
#include <filesystem>

#include "restain/image.hpp"
#include "restain/stainsep.hpp"

namespace restain {

/// One synthetic staining/scanning style: a (unit-row) stain matrix, per-dye
/// intensity scales and the blank-slide background colour. Stands in for a
/// physical scanner profile.
struct SynthStyle {
    StainMatrix stains;               // rows are normalized on construction paths below
    double intensityH = 1.0;          // s_H, in (0, 4]
    double intensityE = 1.0;          // s_E, in (0, 4]
    std::array<std::uint8_t, 3> background = {255, 255, 255};
    std::uint64_t seed = 0;

    void validate() const;
};

/// Style built on the default stain vectors: the reference "target" look.
SynthStyle default_style_a(std::uint64_t seed);

/// A visibly different style: rotated stain vectors and shifted dye
/// intensities, same brightness regime as style A.
SynthStyle default_style_b(std::uint64_t seed);

/// Composes an RGB image from concentration maps: per channel
/// pixel = background * exp(-(sH*aH*M_row1 + sE*aE*M_row2)).
/// Pixels with aH = aE = 0 reproduce the style background exactly.
RgbImage render_stains(const PlaneImage& aH, const PlaneImage& aE, const SynthStyle& style);

/// Deterministic synthetic H&E-like tile: 5-20 elliptical nucleus blobs on a
/// diffuse cytoplasm field, concentrations capped at 2.5 OD.
RgbImage synth_image(const SynthStyle& style, int width, int height, std::uint64_t rngSeed);

/// Writes countPerStyle PNGs per style plus a manifest (one
/// "relative_path<TAB>style_label" line per image, labels "A" and "B").
/// Creates outDir if missing. Returns the manifest path.
std::filesystem::path synth_corpus(const SynthStyle& styleA, const SynthStyle& styleB,
                                   int countPerStyle, int width, int height,
                                   const std::filesystem::path& outDir);

/// Parsed manifest record.
struct ManifestEntry {
    std::filesystem::path path; // resolved against the manifest directory
    std::string label;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifestPath);

} // namespace restain
