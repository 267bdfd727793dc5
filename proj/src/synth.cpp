#include "restain/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "restain/png_io.hpp"

namespace restain {

void SynthStyle::validate() const {
    if (!(intensityH > 0.0 && intensityH <= 4.0) || !(intensityE > 0.0 && intensityE <= 4.0))
        throw Error("SynthStyle: intensity scales must be in (0, 4]");
    for (int r = 0; r < 3; ++r) {
        const double n = std::sqrt(stains.m(r, 0) * stains.m(r, 0) + stains.m(r, 1) * stains.m(r, 1) +
                                   stains.m(r, 2) * stains.m(r, 2));
        if (std::abs(n - 1.0) > 1e-9)
            throw Error("SynthStyle: stain matrix rows must be unit-norm");
    }
}

SynthStyle default_style_a(std::uint64_t seed) {
    SynthStyle s;
    s.stains = StainMatrix().unit_rows();
    s.intensityH = 1.0;
    s.intensityE = 1.0;
    s.background = {252, 250, 247};
    s.seed = seed;
    return s;
}

SynthStyle default_style_b(std::uint64_t seed) {
    // Stain vectors rotated toward a purpler hematoxylin and a yellower
    // eosin, with a noticeably stronger hematoxylin and weaker eosin uptake;
    // overall brightness stays comparable to style A so luminance statistics
    // roughly match across the two corpora.
    SynthStyle s;
    s.stains = StainMatrix({0.40, 0.54, 0.74,
                            0.30, 0.88, 0.20,
                            0.40, 0.45, 0.75})
                   .unit_rows();
    s.intensityH = 1.45;
    s.intensityE = 0.65;
    s.background = {247, 245, 252};
    s.seed = seed;
    return s;
}

RgbImage render_stains(const PlaneImage& aH, const PlaneImage& aE, const SynthStyle& style) {
    style.validate();
    if (!aH.same_dims(aE))
        throw Error("render_stains: concentration maps must share dimensions");
    RgbImage out(aH.width, aH.height);
    const std::size_t n = aH.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double h = style.intensityH * aH.data[i];
        const double e = style.intensityE * aE.data[i];
        for (int c = 0; c < 3; ++c) {
            const double od = h * style.stains.m(0, c) + e * style.stains.m(1, c);
            const double v = style.background[c] * std::exp(-od);
            out.data[i * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    return out;
}

namespace {

// Adds an anisotropic Gaussian bump; contributions below ~exp(-8) of the
// peak are skipped via a bounding box.
void add_blob(PlaneImage& plane, double cx, double cy, double rx, double ry, double angle, double peak) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double extent = 2.0 * std::max(rx, ry);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - extent)));
    const int x1 = std::min(plane.width - 1, static_cast<int>(std::ceil(cx + extent)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - extent)));
    const int y1 = std::min(plane.height - 1, static_cast<int>(std::ceil(cy + extent)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double u = (ca * dx + sa * dy) / rx;
            const double v = (-sa * dx + ca * dy) / ry;
            const double d2 = u * u + v * v;
            if (d2 < 4.0)
                plane.at(x, y) += peak * std::exp(-2.0 * d2);
        }
    }
}

} // namespace

RgbImage synth_image(const SynthStyle& style, int width, int height, std::uint64_t rngSeed) {
    if (width < 1 || height < 1)
        throw Error("synth_image: dimensions must be positive");
    style.validate();

    std::seed_seq seq{static_cast<std::uint32_t>(style.seed), static_cast<std::uint32_t>(style.seed >> 32),
                      static_cast<std::uint32_t>(rngSeed), static_cast<std::uint32_t>(rngSeed >> 32)};
    std::mt19937_64 rng(seq);

    const double minDim = std::min(width, height);
    PlaneImage aH(width, height, 0.0);
    PlaneImage aE(width, height, 0.0);

    // Nuclei: compact elliptical hematoxylin blobs with a little eosin uptake.
    // Counts and radii are kept in fairly narrow bands so that small corpora
    // of tiles share a comparable nucleus/cytoplasm composition; wildly
    // uneven cellularity would swamp cross-tile histogram comparisons.
    std::uniform_int_distribution<int> blobCount(10, 16);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int nBlobs = blobCount(rng);
    for (int i = 0; i < nBlobs; ++i) {
        const double cx = u01(rng) * width;
        const double cy = u01(rng) * height;
        const double rx = std::max(2.5, (0.05 + 0.05 * u01(rng)) * minDim);
        const double ry = std::max(2.5, rx * (0.55 + 0.45 * u01(rng)));
        const double angle = u01(rng) * 3.14159265358979323846;
        const double peak = 1.0 + 1.2 * u01(rng);
        add_blob(aH, cx, cy, rx, ry, angle, peak);
        add_blob(aE, cx, cy, rx, ry, angle, 0.08 * peak);
    }

    // Cytoplasm: a diffuse low-frequency eosin field.
    std::uniform_int_distribution<int> fieldCount(4, 6);
    const int nFields = fieldCount(rng);
    for (int i = 0; i < nFields; ++i) {
        const double cx = u01(rng) * width;
        const double cy = u01(rng) * height;
        const double r = (0.18 + 0.22 * u01(rng)) * minDim;
        const double peak = 0.25 + 0.5 * u01(rng);
        add_blob(aE, cx, cy, r, r, 0.0, peak);
    }

    // Dense chromatin displaces eosinophilic material, so strong hematoxylin
    // suppresses the local eosin uptake. Without this no near-pure nucleus
    // pixels exist and the tiles would not be a separable two-dye mixture.
    for (std::size_t i = 0; i < aE.data.size(); ++i)
        aE.data[i] *= 1.0 - 0.9 * std::min(aH.data[i], 1.2) / 1.2;

    // Cap concentrations so exp(-Ac) stays clear of the quantization floor.
    for (double& v : aH.data) v = std::min(v, 2.5);
    for (double& v : aE.data) v = std::min(v, 2.5);

    return render_stains(aH, aE, style);
}

std::filesystem::path synth_corpus(const SynthStyle& styleA, const SynthStyle& styleB, int countPerStyle,
                                   int width, int height, const std::filesystem::path& outDir) {
    if (countPerStyle < 1)
        throw Error("synth_corpus: countPerStyle must be >= 1");
    std::filesystem::create_directories(outDir);

    const std::filesystem::path manifestPath = outDir / "manifest.tsv";
    std::ofstream manifest(manifestPath, std::ios::binary | std::ios::trunc);
    if (!manifest)
        throw Error("cannot write manifest: " + manifestPath.string());

    auto emit = [&](const SynthStyle& style, const char* prefix, const char* label) {
        for (int i = 0; i < countPerStyle; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "%s_%04d.png", prefix, i);
            save_png(synth_image(style, width, height, static_cast<std::uint64_t>(i)), outDir / name);
            manifest << name << '\t' << label << '\n';
        }
    };
    emit(styleA, "a", "A");
    emit(styleB, "b", "B");

    manifest.close();
    if (!manifest)
        throw Error("manifest write failed: " + manifestPath.string());
    return manifestPath;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifestPath) {
    std::ifstream f(manifestPath);
    if (!f)
        throw Error("cannot open manifest: " + manifestPath.string());
    const std::filesystem::path base = manifestPath.parent_path();

    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("malformed manifest line (expected path<TAB>label): " + line);
        const std::string rel = line.substr(0, tab);
        const std::string label = line.substr(tab + 1);
        if (rel.empty() || label.empty())
            throw Error("malformed manifest line (expected path<TAB>label): " + line);
        entries.push_back({base / rel, label});
    }
    return entries;
}

} // namespace restain
