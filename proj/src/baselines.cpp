#include "restain/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace restain {

LabStats lab_stats(const LabImage& img) {
    const std::size_t n = img.L.size();
    if (n == 0)
        throw Error("lab_stats: empty image");
    double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
    const PlaneImage* planes[3] = {&img.L, &img.a, &img.b};
    for (int c = 0; c < 3; ++c) {
        for (double v : planes[c]->data) {
            sum[c] += v;
            sq[c] += v * v;
        }
    }
    LabStats s;
    double* means[3] = {&s.meanL, &s.meanA, &s.meanB};
    double* stds[3] = {&s.stdL, &s.stdA, &s.stdB};
    for (int c = 0; c < 3; ++c) {
        *means[c] = sum[c] / n;
        *stds[c] = std::sqrt(std::max(0.0, sq[c] / n - *means[c] * *means[c]));
    }
    return s;
}

LabStats lab_stats(const RgbImage& img) {
    return lab_stats(rgb_to_lab(img));
}

void save_lab_stats(const LabStats& s, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        throw Error("cannot write Lab stats: " + path.string());
    f.precision(17);
    f << "meanL " << s.meanL << "\nmeanA " << s.meanA << "\nmeanB " << s.meanB
      << "\nstdL " << s.stdL << "\nstdA " << s.stdA << "\nstdB " << s.stdB << "\n";
    if (!f)
        throw Error("Lab stats write failed: " + path.string());
}

LabStats load_lab_stats(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f)
        throw Error("cannot open Lab stats: " + path.string());
    LabStats s;
    std::string key;
    double value;
    int seen = 0;
    while (f >> key >> value) {
        if (key == "meanL") s.meanL = value;
        else if (key == "meanA") s.meanA = value;
        else if (key == "meanB") s.meanB = value;
        else if (key == "stdL") s.stdL = value;
        else if (key == "stdA") s.stdA = value;
        else if (key == "stdB") s.stdB = value;
        else throw Error("unknown Lab stats field: " + key);
        ++seen;
    }
    if (seen != 6)
        throw Error("Lab stats file must contain six labeled floats: " + path.string());
    return s;
}

RgbImage reinhard_normalize(const RgbImage& src, const LabStats& target) {
    LabImage lab = rgb_to_lab(src);
    const LabStats s = lab_stats(lab);

    PlaneImage* planes[3] = {&lab.L, &lab.a, &lab.b};
    const double srcMean[3] = {s.meanL, s.meanA, s.meanB};
    const double srcStd[3] = {s.stdL, s.stdA, s.stdB};
    const double tgtMean[3] = {target.meanL, target.meanA, target.meanB};
    const double tgtStd[3] = {target.stdL, target.stdA, target.stdB};

    for (int c = 0; c < 3; ++c) {
        if (srcStd[c] < 1e-6) {
            const double shift = tgtMean[c] - srcMean[c];
            for (double& v : planes[c]->data) v += shift;
        } else {
            const double gain = tgtStd[c] / srcStd[c];
            for (double& v : planes[c]->data) v = (v - srcMean[c]) * gain + tgtMean[c];
        }
    }
    return lab_to_rgb(lab);
}

double percentile_nearest_rank(std::vector<double> values, double pct) {
    if (values.empty())
        throw Error("percentile of empty sample");
    std::sort(values.begin(), values.end());
    const double rank = std::ceil(pct / 100.0 * static_cast<double>(values.size()));
    const std::size_t idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size())));
    return values[idx - 1];
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix.
// Eigenvalues come out descending with matching unit eigenvectors (columns).
void symmetric_eigen3(const double a[9], double eigenvalues[3], double eigenvectors[9]) {
    double m[9];
    std::copy(a, a + 9, m);
    double v[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::abs(m[1]) + std::abs(m[2]) + std::abs(m[5]);
        if (off < 1e-15)
            break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double apq = m[p * 3 + q];
                if (std::abs(apq) < 1e-18)
                    continue;
                const double app = m[p * 3 + p], aqq = m[q * 3 + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double mkp = m[k * 3 + p], mkq = m[k * 3 + q];
                    m[k * 3 + p] = c * mkp - s * mkq;
                    m[k * 3 + q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double mpk = m[p * 3 + k], mqk = m[q * 3 + k];
                    m[p * 3 + k] = c * mpk - s * mqk;
                    m[q * 3 + k] = s * mpk + c * mqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k * 3 + p], vkq = v[k * 3 + q];
                    v[k * 3 + p] = c * vkp - s * vkq;
                    v[k * 3 + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    int order[3] = {0, 1, 2};
    const double lam[3] = {m[0], m[4], m[8]};
    std::sort(order, order + 3, [&](int i, int j) { return lam[i] > lam[j]; });
    for (int i = 0; i < 3; ++i) {
        eigenvalues[i] = lam[order[i]];
        for (int k = 0; k < 3; ++k)
            eigenvectors[k * 3 + i] = v[k * 3 + order[i]];
    }
}

struct OdSample {
    double v[3];
};

std::vector<OdSample> tissue_od_samples(const RgbImage& img, const MacenkoParams& p, const OdParams& odp) {
    odp.validate();
    const double logI0 = std::log(odp.i0);
    std::vector<OdSample> samples;
    samples.reserve(img.pixel_count());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        OdSample s;
        double mag2 = 0;
        for (int c = 0; c < 3; ++c) {
            const double v = std::max(static_cast<double>(img.data[i * 3 + c]), odp.floor);
            s.v[c] = logI0 - std::log(v);
            mag2 += s.v[c] * s.v[c];
        }
        if (mag2 > p.betaOdThreshold * p.betaOdThreshold)
            samples.push_back(s);
    }
    return samples;
}

} // namespace

StainMatrix macenko_estimate(const RgbImage& img, const MacenkoParams& p, const OdParams& odp) {
    p.validate();
    const std::vector<OdSample> od = tissue_od_samples(img, p, odp);
    if (od.size() < 100)
        throw Error("insufficient tissue: only " + std::to_string(od.size()) +
                    " pixels above the OD threshold (need 100)");

    double mean[3] = {0, 0, 0};
    for (const auto& s : od)
        for (int c = 0; c < 3; ++c)
            mean[c] += s.v[c];
    for (double& m : mean)
        m /= static_cast<double>(od.size());

    double cov[9] = {};
    for (const auto& s : od) {
        const double d[3] = {s.v[0] - mean[0], s.v[1] - mean[1], s.v[2] - mean[2]};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                cov[r * 3 + c] += d[r] * d[c];
    }
    for (double& c : cov)
        c /= static_cast<double>(od.size());

    double lam[3], vec[9];
    symmetric_eigen3(cov, lam, vec);
    // The relative floor sits well above the variance that 8-bit quantization
    // noise induces off a single stain direction (~1e-4 of the leading
    // eigenvalue) and well below any genuine second dye.
    if (lam[1] <= 1e-8 || lam[1] <= 1e-3 * lam[0])
        throw Error("degenerate covariance: OD samples span fewer than two stain directions");

    // Plane basis from the two dominant eigenvectors, oriented so the mean
    // OD projects positively (stain vectors live in the positive octant).
    double e1[3] = {vec[0], vec[3], vec[6]};
    double e2[3] = {vec[1], vec[4], vec[7]};
    auto dot3 = [](const double* x, const double* y) { return x[0] * y[0] + x[1] * y[1] + x[2] * y[2]; };
    if (dot3(e1, mean) < 0)
        for (double& x : e1) x = -x;
    if (dot3(e2, mean) < 0)
        for (double& x : e2) x = -x;

    std::vector<double> angles;
    angles.reserve(od.size());
    for (const auto& s : od)
        angles.push_back(std::atan2(dot3(e2, s.v), dot3(e1, s.v)));

    const double aLo = percentile_nearest_rank(angles, p.alphaPercentile);
    const double aHi = percentile_nearest_rank(angles, 100.0 - p.alphaPercentile);

    auto direction = [&](double phi, double out[3]) {
        const double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < 3; ++k)
            out[k] = c * e1[k] + s * e2[k];
        // flip into the physical (non-negative absorbance) half-space
        if (out[0] + out[1] + out[2] < 0)
            for (int k = 0; k < 3; ++k)
                out[k] = -out[k];
        const double n = std::sqrt(dot3(out, out));
        for (int k = 0; k < 3; ++k)
            out[k] /= n;
    };

    double v1[3], v2[3];
    direction(aLo, v1);
    direction(aHi, v2);

    // H absorbs more red light than E.
    const double* h = v1[0] >= v2[0] ? v1 : v2;
    const double* e = v1[0] >= v2[0] ? v2 : v1;

    double r[3] = {h[1] * e[2] - h[2] * e[1], h[2] * e[0] - h[0] * e[2], h[0] * e[1] - h[1] * e[0]};
    const double rn = std::sqrt(dot3(r, r));
    if (rn < 1e-9)
        throw Error("degenerate covariance: estimated stain vectors are collinear");
    for (double& x : r)
        x /= rn;
    if (r[0] + r[1] + r[2] < 0)
        for (double& x : r)
            x = -x;

    return StainMatrix({h[0], h[1], h[2], e[0], e[1], e[2], r[0], r[1], r[2]});
}

StainMaxima macenko_maxima(const RgbImage& img, const StainMatrix& sm, const MacenkoParams& p,
                           const OdParams& odp) {
    p.validate();
    const StainImage s = deconvolve(img, sm, odp);
    StainMaxima m;
    m.cH = percentile_nearest_rank(s.h.data, p.concPercentile);
    m.cE = percentile_nearest_rank(s.e.data, p.concPercentile);
    return m;
}

RgbImage macenko_normalize(const RgbImage& src, const StainMatrix& targetSm, const StainMaxima& targetMaxC,
                           const MacenkoParams& p, const OdParams& odp) {
    const StainMatrix srcSm = macenko_estimate(src, p, odp);
    StainImage s = deconvolve(src, srcSm, odp);

    const double srcH = percentile_nearest_rank(s.h.data, p.concPercentile);
    const double srcE = percentile_nearest_rank(s.e.data, p.concPercentile);
    const double gainH = srcH > 1e-9 ? targetMaxC.cH / srcH : 1.0;
    const double gainE = srcE > 1e-9 ? targetMaxC.cE / srcE : 1.0;
    for (double& v : s.h.data) v *= gainH;
    for (double& v : s.e.data) v *= gainE;

    return restain(s, targetSm, odp);
}

} // namespace restain
