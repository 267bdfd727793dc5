#include "restain/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <sstream>

namespace restain {

namespace {

constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0); // 6.5025
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0); // 58.5225
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr int kUqiWindow = 8;
constexpr std::array<double, 5> kMsWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

void require_same_dims(const RgbImage& a, const RgbImage& b, const char* what) {
    if (!a.same_dims(b))
        throw Error(std::string(what) + ": image dimensions differ");
}

void require_same_dims(const PlaneImage& a, const PlaneImage& b, const char* what) {
    if (!a.same_dims(b))
        throw Error(std::string(what) + ": plane dimensions differ");
}

std::array<double, kSsimWindow> gaussian_kernel() {
    std::array<double, kSsimWindow> k{};
    const int half = kSsimWindow / 2;
    double sum = 0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (double& v : k)
        v /= sum;
    return k;
}

// Valid-mode separable filtering with a normalized kernel.
PlaneImage filter_valid(const PlaneImage& p, const std::array<double, kSsimWindow>& k) {
    const int outW = p.width - kSsimWindow + 1;
    const int outH = p.height - kSsimWindow + 1;
    PlaneImage horiz(outW, p.height);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < outW; ++x) {
            double acc = 0;
            for (int i = 0; i < kSsimWindow; ++i)
                acc += k[i] * p.at(x + i, y);
            horiz.at(x, y) = acc;
        }
    PlaneImage out(outW, outH);
    for (int y = 0; y < outH; ++y)
        for (int x = 0; x < outW; ++x) {
            double acc = 0;
            for (int i = 0; i < kSsimWindow; ++i)
                acc += k[i] * horiz.at(x, y + i);
            out.at(x, y) = acc;
        }
    return out;
}

PlaneImage multiply(const PlaneImage& a, const PlaneImage& b) {
    PlaneImage out(a.width, a.height);
    for (std::size_t i = 0; i < a.size(); ++i)
        out.data[i] = a.data[i] * b.data[i];
    return out;
}

// Mean luminance term and mean contrast-structure term of the SSIM map.
std::pair<double, double> ssim_terms(const PlaneImage& x, const PlaneImage& y) {
    require_same_dims(x, y, "ssim");
    if (x.width < kSsimWindow || x.height < kSsimWindow)
        throw Error("ssim: image too small, need at least " + std::to_string(kSsimWindow) +
                    " px per side");
    const auto k = gaussian_kernel();
    const PlaneImage mx = filter_valid(x, k);
    const PlaneImage my = filter_valid(y, k);
    const PlaneImage mxx = filter_valid(multiply(x, x), k);
    const PlaneImage myy = filter_valid(multiply(y, y), k);
    const PlaneImage mxy = filter_valid(multiply(x, y), k);

    double lumSum = 0, csSum = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double ux = mx.data[i], uy = my.data[i];
        const double vx = mxx.data[i] - ux * ux;
        const double vy = myy.data[i] - uy * uy;
        const double cxy = mxy.data[i] - ux * uy;
        lumSum += (2.0 * ux * uy + kC1) / (ux * ux + uy * uy + kC1);
        csSum += (2.0 * cxy + kC2) / (vx + vy + kC2);
    }
    const double n = static_cast<double>(mx.size());
    return {lumSum / n, csSum / n};
}

// Mean of the full SSIM map (per-window luminance * contrast-structure).
double ssim_map_mean(const PlaneImage& x, const PlaneImage& y) {
    const auto k = gaussian_kernel();
    const PlaneImage mx = filter_valid(x, k);
    const PlaneImage my = filter_valid(y, k);
    const PlaneImage mxx = filter_valid(multiply(x, x), k);
    const PlaneImage myy = filter_valid(multiply(y, y), k);
    const PlaneImage mxy = filter_valid(multiply(x, y), k);

    double sum = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double ux = mx.data[i], uy = my.data[i];
        const double vx = mxx.data[i] - ux * ux;
        const double vy = myy.data[i] - uy * uy;
        const double cxy = mxy.data[i] - ux * uy;
        sum += ((2.0 * ux * uy + kC1) * (2.0 * cxy + kC2)) /
               ((ux * ux + uy * uy + kC1) * (vx + vy + kC2));
    }
    return sum / static_cast<double>(mx.size());
}

std::array<double, 3> band_rmse(const RgbImage& ref, const RgbImage& test) {
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (std::size_t i = 0; i < ref.pixel_count(); ++i) {
            const double d = static_cast<double>(ref.data[i * 3 + c]) - test.data[i * 3 + c];
            acc += d * d;
        }
        out[c] = std::sqrt(acc / static_cast<double>(ref.pixel_count()));
    }
    return out;
}

std::array<double, 3> band_means(const RgbImage& ref) {
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (std::size_t i = 0; i < ref.pixel_count(); ++i)
            acc += ref.data[i * 3 + c];
        out[c] = acc / static_cast<double>(ref.pixel_count());
        if (out[c] == 0)
            throw Error("zero-mean band: reference channel " + std::to_string(c) +
                        " is entirely black");
    }
    return out;
}

} // namespace

PlaneImage to_gray601(const RgbImage& img) {
    PlaneImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        out.data[i] = 0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] +
                      0.114 * img.data[i * 3 + 2];
    return out;
}

double mse(const RgbImage& x, const RgbImage& y) {
    require_same_dims(x, y, "mse");
    double acc = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - y.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.data.size());
}

double rmse(const RgbImage& x, const RgbImage& y) {
    return std::sqrt(mse(x, y));
}

double psnr(const RgbImage& ref, const RgbImage& test) {
    const double m = mse(ref, test);
    if (m < 255.0 * 255.0 * 1e-10)
        return kPsnrCap;
    return 10.0 * std::log10(255.0 * 255.0 / m);
}

double ssim_plane(const PlaneImage& x, const PlaneImage& y) {
    require_same_dims(x, y, "ssim");
    if (x.width < kSsimWindow || x.height < kSsimWindow)
        throw Error("ssim: image too small, need at least " + std::to_string(kSsimWindow) +
                    " px per side");
    return ssim_map_mean(x, y);
}

double ssim(const RgbImage& x, const RgbImage& y) {
    require_same_dims(x, y, "ssim");
    return ssim_plane(to_gray601(x), to_gray601(y));
}

PlaneImage downsample2_mean(const PlaneImage& p) {
    const int w = p.width / 2, h = p.height / 2;
    if (w < 1 || h < 1)
        throw Error("downsample2_mean: plane too small");
    PlaneImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = 0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) +
                                   p.at(2 * x, 2 * y + 1) + p.at(2 * x + 1, 2 * y + 1));
    return out;
}

double ms_ssim_plane(const PlaneImage& x, const PlaneImage& y) {
    require_same_dims(x, y, "ms_ssim");
    int scales = 0;
    {
        int mind = std::min(x.width, x.height);
        while (scales < 5 && mind >= kSsimWindow) {
            ++scales;
            mind /= 2;
        }
    }
    if (scales == 0)
        throw Error("ms_ssim: image too small, need at least " + std::to_string(kSsimWindow) +
                    " px per side at the finest scale");

    double weightSum = 0;
    for (int s = 0; s < scales; ++s)
        weightSum += kMsWeights[s];

    PlaneImage cx = x, cy = y;
    double result = 1.0;
    for (int s = 0; s < scales; ++s) {
        const double w = kMsWeights[s] / weightSum;
        if (s + 1 < scales) {
            const double cs = std::max(ssim_terms(cx, cy).second, 0.0);
            result *= std::pow(cs, w);
            cx = downsample2_mean(cx);
            cy = downsample2_mean(cy);
        } else {
            const double full = std::max(ssim_map_mean(cx, cy), 0.0);
            result *= std::pow(full, w);
        }
    }
    return result;
}

double ms_ssim(const RgbImage& x, const RgbImage& y) {
    require_same_dims(x, y, "ms_ssim");
    return ms_ssim_plane(to_gray601(x), to_gray601(y));
}

double uqi_plane(const PlaneImage& x, const PlaneImage& y) {
    require_same_dims(x, y, "uqi");
    if (x.width < kUqiWindow || x.height < kUqiWindow)
        throw Error("uqi: image too small, need at least " + std::to_string(kUqiWindow) +
                    " px per side");
    const double invN = 1.0 / (kUqiWindow * kUqiWindow);
    double qSum = 0;
    std::size_t count = 0;
    for (int wy = 0; wy + kUqiWindow <= x.height; ++wy)
        for (int wx = 0; wx + kUqiWindow <= x.width; ++wx) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int dy = 0; dy < kUqiWindow; ++dy)
                for (int dx = 0; dx < kUqiWindow; ++dx) {
                    const double a = x.at(wx + dx, wy + dy);
                    const double b = y.at(wx + dx, wy + dy);
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            const double ux = sx * invN, uy = sy * invN;
            const double vx = sxx * invN - ux * ux;
            const double vy = syy * invN - uy * uy;
            const double cxy = sxy * invN - ux * uy;
            const double varSum = vx + vy;
            const double meanSq = ux * ux + uy * uy;
            double q;
            if (varSum != 0 && meanSq != 0)
                q = 4.0 * cxy * ux * uy / (varSum * meanSq);
            else if (meanSq != 0)
                q = 2.0 * ux * uy / meanSq; // flat windows: luminance term only
            else
                q = 1.0; // both flat at zero: identical
            qSum += q;
            ++count;
        }
    return qSum / static_cast<double>(count);
}

double uqi(const RgbImage& x, const RgbImage& y) {
    require_same_dims(x, y, "uqi");
    return uqi_plane(to_gray601(x), to_gray601(y));
}

double ergas(const RgbImage& ref, const RgbImage& test, double ratio) {
    require_same_dims(ref, test, "ergas");
    const auto r = band_rmse(ref, test);
    const auto m = band_means(ref);
    double acc = 0;
    for (int c = 0; c < 3; ++c)
        acc += (r[c] / m[c]) * (r[c] / m[c]);
    return 100.0 * ratio * std::sqrt(acc / 3.0);
}

double rase(const RgbImage& ref, const RgbImage& test) {
    require_same_dims(ref, test, "rase");
    const auto r = band_rmse(ref, test);
    const auto m = band_means(ref);
    const double meanOfMeans = (m[0] + m[1] + m[2]) / 3.0;
    double acc = 0;
    for (int c = 0; c < 3; ++c)
        acc += r[c] * r[c];
    return 100.0 / meanOfMeans * std::sqrt(acc / 3.0);
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {"mse",    "rmse", "psnr",  "ssim",
                                                   "ms-ssim", "uqi",  "ergas", "rase"};
    return names;
}

double compute_metric(const std::string& name, const RgbImage& ref, const RgbImage& test) {
    if (name == "mse") return mse(ref, test);
    if (name == "rmse") return rmse(ref, test);
    if (name == "psnr") return psnr(ref, test);
    if (name == "ssim") return ssim(ref, test);
    if (name == "ms-ssim") return ms_ssim(ref, test);
    if (name == "uqi") return uqi(ref, test);
    if (name == "ergas") return ergas(ref, test);
    if (name == "rase") return rase(ref, test);
    std::string valid;
    for (const std::string& n : metric_names())
        valid += (valid.empty() ? "" : ", ") + n;
    throw Error("unknown metric '" + name + "'; valid metrics: " + valid);
}

MetricReport evaluate_set(const std::vector<std::pair<const RgbImage*, const RgbImage*>>& pairs,
                          const std::vector<std::string>& metrics,
                          const std::vector<std::string>& pairNames) {
    if (pairs.empty())
        throw Error("evaluate_set: no image pairs given");
    if (pairNames.size() != pairs.size())
        throw Error("evaluate_set: pair name count mismatch");

    MetricReport rep;
    rep.metrics = metrics.empty() ? metric_names() : metrics;
    rep.pairNames = pairNames;
    rep.values.reserve(pairs.size());
    for (const auto& [ref, test] : pairs) {
        std::vector<double> row;
        row.reserve(rep.metrics.size());
        for (const std::string& m : rep.metrics)
            row.push_back(compute_metric(m, *ref, *test));
        rep.values.push_back(std::move(row));
    }

    const double n = static_cast<double>(pairs.size());
    rep.mean.resize(rep.metrics.size());
    rep.stddev.resize(rep.metrics.size());
    for (std::size_t m = 0; m < rep.metrics.size(); ++m) {
        double sum = 0, sq = 0;
        for (const auto& row : rep.values) {
            sum += row[m];
            sq += row[m] * row[m];
        }
        rep.mean[m] = sum / n;
        rep.stddev[m] = std::sqrt(std::max(0.0, sq / n - rep.mean[m] * rep.mean[m]));
    }
    return rep;
}

namespace {

std::string fmt6(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

} // namespace

void write_report(const MetricReport& report, std::ostream& out) {
    out << "pair";
    for (const std::string& m : report.metrics)
        out << '\t' << m;
    out << '\n';
    for (std::size_t i = 0; i < report.values.size(); ++i) {
        out << report.pairNames[i];
        for (double v : report.values[i])
            out << '\t' << fmt6(v);
        out << '\n';
    }
    for (std::size_t m = 0; m < report.metrics.size(); ++m)
        out << report.metrics[m] << '\t' << fmt6(report.mean[m]) << '\t' << fmt6(report.stddev[m])
            << '\n';
}

} // namespace restain
