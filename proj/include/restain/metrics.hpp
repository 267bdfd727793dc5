#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "restain/image.hpp"

namespace restain {

// Full-reference quality metrics. Symmetric: mse, rmse, ssim, ms_ssim, uqi.
// Reference-directional (first argument is the reference): psnr, ergas, rase.
// RGB images are reduced to ITU-R 601 luminance (0.299R + 0.587G + 0.114B)
// for the windowed metrics; mse/rmse/psnr run over all three channels and
// ergas/rase per band by definition.

double mse(const RgbImage& x, const RgbImage& y);
double rmse(const RgbImage& x, const RgbImage& y);

inline constexpr double kPsnrCap = 100.0; // dB, returned when MSE < 255^2 * 1e-10
double psnr(const RgbImage& ref, const RgbImage& test);

// 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, L=255, valid mode.
double ssim(const RgbImage& x, const RgbImage& y);
double ssim_plane(const PlaneImage& x, const PlaneImage& y);

// Weights renormalize when the image supports fewer than five dyadic scales
// (min dimension must stay >= 11 at the coarsest scale used).
double ms_ssim(const RgbImage& x, const RgbImage& y);
double ms_ssim_plane(const PlaneImage& x, const PlaneImage& y);

// Sliding 8x8 uniform window universal quality index.
double uqi(const RgbImage& x, const RgbImage& y);
double uqi_plane(const PlaneImage& x, const PlaneImage& y);

double ergas(const RgbImage& ref, const RgbImage& test, double ratio = 1.0);
double rase(const RgbImage& ref, const RgbImage& test);

// 2x2 mean downsampling (trailing odd row/column dropped); the dyadic step
// between ms_ssim scales, exposed for compositional checks.
PlaneImage downsample2_mean(const PlaneImage& p);

PlaneImage to_gray601(const RgbImage& img);

// Name -> metric lookup used by evaluation and the CLI.
const std::vector<std::string>& metric_names();
double compute_metric(const std::string& name, const RgbImage& ref, const RgbImage& test);

struct MetricReport {
    std::vector<std::string> metrics;
    std::vector<std::string> pairNames;
    std::vector<std::vector<double>> values; // [pair][metric]
    std::vector<double> mean, stddev;        // [metric], population std
};

// Computes every requested metric for every (reference, test) pair and the
// mean/std aggregates. Throws on an empty pair list or unknown metric name.
MetricReport evaluate_set(const std::vector<std::pair<const RgbImage*, const RgbImage*>>& pairs,
                          const std::vector<std::string>& metrics,
                          const std::vector<std::string>& pairNames);

// Tab-separated report: one row per pair, then `metric<TAB>mean<TAB>std`
// aggregate rows; floats carry 6 significant digits.
void write_report(const MetricReport& report, std::ostream& out);

} // namespace restain
