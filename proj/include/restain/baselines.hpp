#pragma once

#include <filesystem>

#include "restain/colorspace.hpp"
#include "restain/stainsep.hpp"

namespace restain {

/// Per-channel Lab statistics (population std).
struct LabStats {
    double meanL = 0, meanA = 0, meanB = 0;
    double stdL = 0, stdA = 0, stdB = 0;
};

LabStats lab_stats(const RgbImage& img);
LabStats lab_stats(const LabImage& img);

/// Persisted as six labeled floats (meanL meanA meanB stdL stdA stdB).
void save_lab_stats(const LabStats& s, const std::filesystem::path& path);
LabStats load_lab_stats(const std::filesystem::path& path);

/// Lab-statistics transfer: per channel out = (in - mu_src) * sigma_tgt/sigma_src + mu_tgt.
/// Channels with sigma_src < 1e-6 are shifted only.
RgbImage reinhard_normalize(const RgbImage& src, const LabStats& target);

struct MacenkoParams {
    double alphaPercentile = 1.0;  // angle percentile, percent
    double betaOdThreshold = 0.15; // tissue OD magnitude threshold
    double concPercentile = 99.0;  // robust max-concentration percentile

    void validate() const {
        if (!(alphaPercentile > 0.0 && alphaPercentile < 50.0))
            throw Error("MacenkoParams: alphaPercentile must be in (0, 50)");
        if (!(betaOdThreshold > 0.0))
            throw Error("MacenkoParams: betaOdThreshold must be > 0");
        if (!(concPercentile > 0.0 && concPercentile <= 100.0))
            throw Error("MacenkoParams: concPercentile must be in (0, 100]");
    }
};

/// SVD-style stain-vector estimation: tissue pixels are those with OD
/// magnitude above beta; the two dominant eigenvectors of the OD covariance
/// span the stain plane; the alpha / (100-alpha) angle percentiles give the
/// stain directions. Rows are unit-norm; the row with the larger
/// red-absorption component is H; the residual row is the normalized cross
/// product. Throws on insufficient tissue (< 100 pixels) or a rank-deficient
/// OD covariance.
StainMatrix macenko_estimate(const RgbImage& img, const MacenkoParams& p = {}, const OdParams& odp = {});

/// Robust per-stain maxima of a concentration image (concPercentile,
/// nearest-rank).
struct StainMaxima {
    double cH = 0;
    double cE = 0;
};

StainMaxima macenko_maxima(const RgbImage& img, const StainMatrix& sm, const MacenkoParams& p = {},
                           const OdParams& odp = {});

/// Deconvolves src with its own estimated matrix, rescales H and E so their
/// concPercentile values match targetMaxC, re-stains with targetSm.
RgbImage macenko_normalize(const RgbImage& src, const StainMatrix& targetSm, const StainMaxima& targetMaxC,
                           const MacenkoParams& p = {}, const OdParams& odp = {});

/// Nearest-rank percentile of an unsorted sample (copies and sorts).
double percentile_nearest_rank(std::vector<double> values, double pct);

} // namespace restain
