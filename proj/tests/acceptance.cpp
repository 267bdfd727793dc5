// End-to-end acceptance gate. Runs ten numbered checks covering the stain
// round trip, colour conversions, gradients, metric oracles, the training
// and normalization experiments, and checkpoint integrity. Each check prints
// a single PASS/FAIL line with its duration; the process exits non-zero if
// any check fails. Oracles here (closed forms, brute-force windows, finite
// differences) are written out independently rather than shared with the
// unit tests.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "restain/colorspace.hpp"
#include "restain/commands.hpp"
#include "restain/losses.hpp"
#include "restain/metrics.hpp"
#include "restain/nn/adam.hpp"
#include "restain/nn/graph.hpp"
#include "restain/nn/network.hpp"
#include "restain/nn/ops.hpp"
#include "restain/png_io.hpp"
#include "restain/stainsep.hpp"
#include "restain/synth.hpp"
#include "restain/trainer.hpp"

namespace fs = std::filesystem;
using namespace restain;
using nn::Tensor;
using nn::Var;

namespace {

// ---------------------------------------------------------------------------
// Harness

class CheckFailure : public std::runtime_error {
public:
    explicit CheckFailure(const std::string& what) : std::runtime_error(what) {}
};

void require(bool ok, const std::string& why) {
    if (!ok)
        throw CheckFailure(why);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

int gFailed = 0;
fs::path gWork;

// Model/image produced by the domain-transfer check, reused by the stability
// check when available so a training failure there has a visible cause.
fs::path gTransferModel;
fs::path gTransferImage;

void run_check(int id, const std::string& title, const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string reason;
    bool ok = true;
    try {
        body();
    } catch (const std::exception& e) {
        ok = false;
        reason = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " ("
              << std::fixed << std::setprecision(1) << secs << "s)" << std::defaultfloat;
    if (!ok) {
        std::cout << " -- " << reason;
        ++gFailed;
    }
    std::cout << "\n" << std::flush;
}

// ---------------------------------------------------------------------------
// Shared input builders

Tensor seeded_tensor(int n, int c, int h, int w, std::uint64_t seed, double lo, double hi) {
    Tensor t(n, c, h, w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data)
        v = dist(rng);
    return t;
}

// Keeps every sample at least `margin` from zero so kinked functions are
// smooth at the probe points.
Tensor seeded_tensor_off_zero(int n, int c, int h, int w, std::uint64_t seed, double margin) {
    Tensor t = seeded_tensor(n, c, h, w, seed, -2.0, 2.0);
    for (double& v : t.data)
        if (std::abs(v) < margin)
            v = v < 0 ? -margin : margin;
    return t;
}

PlaneImage random_plane(int w, int h, std::uint64_t seed, double lo, double hi) {
    PlaneImage p(w, h);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : p.data)
        v = dist(rng);
    return p;
}

RgbImage constant_image(int w, int h, int level) {
    RgbImage img(w, h);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<std::uint8_t>(level);
    return img;
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(static_cast<bool>(in), "cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle

double forward_scalar(const std::function<Var(Var)>& build, const Tensor& x) {
    Var root = build(nn::make_leaf(x, "probe"));
    require(root.val().data.size() == 1, "gradient probe must reduce to a scalar");
    return root.val().data[0];
}

void fd_check(const std::string& what, const std::function<Var(Var)>& build, const Tensor& x0,
              double tol) {
    Var leaf = nn::make_leaf(x0, "probe", true);
    Var root = build(leaf);
    nn::backward(root);
    require(leaf.has_grad(), what + ": no gradient reached the probe leaf");
    const Tensor analytic = leaf.node->grad;
    require(analytic.data.size() == x0.data.size(), what + ": gradient shape mismatch");

    const double h = 1e-5;
    Tensor x = x0;
    for (std::size_t i = 0; i < x0.data.size(); ++i) {
        x.data[i] = x0.data[i] + h;
        const double fp = forward_scalar(build, x);
        x.data[i] = x0.data[i] - h;
        const double fm = forward_scalar(build, x);
        x.data[i] = x0.data[i];
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic.data[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        require(rel <= tol, what + ": coordinate " + std::to_string(i) + " analytic " + fmt(a) +
                                " vs central difference " + fmt(numeric) + " (rel " + fmt(rel) + ")");
    }
}

// Weighted reduction with distinct per-element weights; a plain sum would
// miss permuted or misindexed gradients.
Var weighted_sum(Var x, const Tensor& mask) {
    return nn::sum_all(nn::mul(x, nn::make_leaf(mask, "mask")));
}

Tensor ramp_like(const Tensor& like) {
    Tensor m = like;
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = 0.1 + 0.013 * static_cast<double>(i % 97);
    return m;
}

Tensor lab_tensor_from_dyes(const std::vector<double>& dh, const std::vector<double>& de, int w,
                            int ht, const StainMatrix& sm) {
    Tensor lab(1, 3, ht, w);
    for (int y = 0; y < ht; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                                  static_cast<std::size_t>(x);
            double rgb[3];
            for (int c = 0; c < 3; ++c) {
                const double od = dh[i] * sm.m(0, c) + de[i] * sm.m(1, c);
                rgb[c] = 255.0 * std::exp(-od);
            }
            double L, A, B;
            color::rgb_to_lab_pixel(rgb[0], rgb[1], rgb[2], L, A, B);
            lab.at(0, 0, y, x) = L;
            lab.at(0, 1, y, x) = A;
            lab.at(0, 2, y, x) = B;
        }
    return lab;
}

// ---------------------------------------------------------------------------
// Brute-force windowed metrics (direct 2-D formulas, no separable filtering)

double brute_ssim(const PlaneImage& x, const PlaneImage& y) {
    const int win = 11;
    const double sigma = 1.5;
    double w2d[11][11];
    double wsum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double di = i - 5, dj = j - 5;
            w2d[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            wsum += w2d[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j)
            w2d[i][j] /= wsum;

    const double c1 = 6.5025, c2 = 58.5225;
    double sum = 0;
    int count = 0;
    for (int wy = 0; wy + win <= x.height; ++wy)
        for (int wx = 0; wx + win <= x.width; ++wx) {
            double ux = 0, uy = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    ux += w2d[i][j] * x.at(wx + j, wy + i);
                    uy += w2d[i][j] * y.at(wx + j, wy + i);
                }
            double vx = 0, vy = 0, cxy = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double dx = x.at(wx + j, wy + i) - ux;
                    const double dy = y.at(wx + j, wy + i) - uy;
                    vx += w2d[i][j] * dx * dx;
                    vy += w2d[i][j] * dy * dy;
                    cxy += w2d[i][j] * dx * dy;
                }
            sum += ((2 * ux * uy + c1) * (2 * cxy + c2)) /
                   ((ux * ux + uy * uy + c1) * (vx + vy + c2));
            ++count;
        }
    return sum / count;
}

double brute_uqi(const PlaneImage& x, const PlaneImage& y) {
    const int win = 8;
    double qSum = 0;
    int count = 0;
    for (int wy = 0; wy + win <= x.height; ++wy)
        for (int wx = 0; wx + win <= x.width; ++wx) {
            double ux = 0, uy = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    ux += x.at(wx + j, wy + i);
                    uy += y.at(wx + j, wy + i);
                }
            ux /= win * win;
            uy /= win * win;
            double vx = 0, vy = 0, cxy = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double dx = x.at(wx + j, wy + i) - ux;
                    const double dy = y.at(wx + j, wy + i) - uy;
                    vx += dx * dx;
                    vy += dy * dy;
                    cxy += dx * dy;
                }
            vx /= win * win;
            vy /= win * win;
            cxy /= win * win;
            double q;
            if (vx + vy != 0 && ux * ux + uy * uy != 0)
                q = 4 * cxy * ux * uy / ((vx + vy) * (ux * ux + uy * uy));
            else if (ux * ux + uy * uy != 0)
                q = 2 * ux * uy / (ux * ux + uy * uy);
            else
                q = 1.0;
            qSum += q;
            ++count;
        }
    return qSum / count;
}

// ---------------------------------------------------------------------------
// Criterion bodies

// 1. Deconvolve-then-restain must reproduce bright pixels whose H and E
//    solves come out nonnegative (for those the concentration clamp is
//    inactive, so only 8-bit rounding separates the two sides).
void check_stain_round_trip() {
    const StainMatrix sm;
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> chan(10, 255);

    const int n = 1000;
    RgbImage img(n, 1);
    int picked = 0;
    while (picked < n) {
        const int r = chan(rng), g = chan(rng), b = chan(rng);
        const double od[3] = {std::log(255.0 / r), std::log(255.0 / g), std::log(255.0 / b)};
        const double cH = od[0] * sm.inv(0, 0) + od[1] * sm.inv(1, 0) + od[2] * sm.inv(2, 0);
        const double cE = od[0] * sm.inv(0, 1) + od[1] * sm.inv(1, 1) + od[2] * sm.inv(2, 1);
        if (cH < 0 || cE < 0)
            continue;
        img.at(picked, 0, 0) = static_cast<std::uint8_t>(r);
        img.at(picked, 0, 1) = static_cast<std::uint8_t>(g);
        img.at(picked, 0, 2) = static_cast<std::uint8_t>(b);
        ++picked;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const StainImage s = deconvolve(img, sm);
    const RgbImage back = restain::restain(s, sm);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    int worst = 0;
    for (std::size_t i = 0; i < img.data.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<int>(img.data[i]) -
                                         static_cast<int>(back.data[i])));
    require(worst <= 1, "worst channel error " + std::to_string(worst) + " exceeds 1");
    require(secs < 1.0, "round trip took " + fmt(secs) + "s (limit 1s)");
}

// 2. The built-in stain matrix and its cached inverse.
void check_matrix_sanity() {
    const StainMatrix sm;
    const std::array<double, 9> expected = {0.65, 0.70, 0.29, 0.07, 0.99, 0.11, 0.27, 0.57, 0.78};
    for (int i = 0; i < 9; ++i)
        require(sm.rows()[static_cast<std::size_t>(i)] == expected[static_cast<std::size_t>(i)],
                "matrix entry " + std::to_string(i) + " is not the documented value");
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k)
                s += sm.m(i, k) * sm.inv(k, j);
            const double err = std::abs(s - (i == j ? 1.0 : 0.0));
            require(err < 1e-10, "M*M^-1 entry (" + std::to_string(i) + "," + std::to_string(j) +
                                     ") off identity by " + fmt(err));
        }
}

// 3. sRGB -> Lab -> sRGB on a 16x16x16 grid of the 8-bit cube.
void check_lab_round_trip() {
    double worst = 0;
    for (int r = 0; r < 256; r += 17)
        for (int g = 0; g < 256; g += 17)
            for (int b = 0; b < 256; b += 17) {
                double L, A, B;
                color::rgb_to_lab_pixel(r, g, b, L, A, B);
                double ro, go, bo;
                color::lab_to_rgb_pixel(L, A, B, ro, go, bo);
                worst = std::max({worst, std::abs(ro - r), std::abs(go - g), std::abs(bo - b)});
            }
    require(worst <= 1.0, "worst channel error " + fmt(worst) + " exceeds 1");
}

// 4. Central finite differences against every layer's recorded gradient and
//    against the composed losses (including the staining loss through the
//    Lab -> RGB -> OD chain).
void check_gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    const double layerTol = 1e-4;
    const double lossTol = 1e-3;

    // Convolution, both strides, wrt input, weights and bias.
    {
        const Tensor x0 = seeded_tensor(1, 2, 6, 6, 10, -1.0, 1.0);
        const Tensor w0 = seeded_tensor(3, 2, 3, 3, 11, -0.5, 0.5);
        const Tensor b0 = seeded_tensor(1, 3, 1, 1, 12, -0.5, 0.5);
        for (int stride : {1, 2}) {
            Tensor mask;
            {
                Var probe = nn::conv2d(nn::make_leaf(x0), nn::make_leaf(w0), nn::make_leaf(b0),
                                       stride, 1, "t");
                mask = ramp_like(probe.val());
            }
            const std::string tag = "conv2d stride " + std::to_string(stride);
            fd_check(tag + " wrt input",
                     [&](Var v) {
                         return weighted_sum(
                             nn::conv2d(v, nn::make_leaf(w0), nn::make_leaf(b0), stride, 1, "t"),
                             mask);
                     },
                     x0, layerTol);
            fd_check(tag + " wrt weights",
                     [&](Var v) {
                         return weighted_sum(
                             nn::conv2d(nn::make_leaf(x0), v, nn::make_leaf(b0), stride, 1, "t"),
                             mask);
                     },
                     w0, layerTol);
            fd_check(tag + " wrt bias",
                     [&](Var v) {
                         return weighted_sum(
                             nn::conv2d(nn::make_leaf(x0), nn::make_leaf(w0), v, stride, 1, "t"),
                             mask);
                     },
                     b0, layerTol);
        }
    }

    const Tensor smooth = seeded_tensor(1, 2, 4, 4, 20, -2.0, 2.0);
    const Tensor kinked = seeded_tensor_off_zero(1, 2, 4, 4, 21, 0.05);
    const Tensor positive = seeded_tensor(1, 2, 4, 4, 22, 0.2, 2.0);
    const Tensor mask44 = ramp_like(smooth);

    fd_check("leaky_relu", [&](Var v) { return weighted_sum(nn::leaky_relu(v), mask44); }, kinked,
             layerTol);
    fd_check("relu", [&](Var v) { return weighted_sum(nn::relu(v), mask44); }, kinked, layerTol);
    fd_check("abs_val", [&](Var v) { return weighted_sum(nn::abs_val(v), mask44); }, kinked,
             layerTol);
    fd_check("sigmoid", [&](Var v) { return weighted_sum(nn::sigmoid(v), mask44); }, smooth,
             layerTol);
    fd_check("tanh_act", [&](Var v) { return weighted_sum(nn::tanh_act(v), mask44); }, smooth,
             layerTol);
    fd_check("log_val", [&](Var v) { return weighted_sum(nn::log_val(v), mask44); }, positive,
             layerTol);

    // Clamp with every input at least 0.05 away from both bounds.
    {
        Tensor t = seeded_tensor(1, 2, 4, 4, 23, -2.0, 2.0);
        for (double& v : t.data)
            if (std::abs(std::abs(v) - 1.0) < 0.05)
                v += v > 0 ? 0.1 : -0.1;
        fd_check("clamp_val", [&](Var v) { return weighted_sum(nn::clamp_val(v, -1.0, 1.0), mask44); },
                 t, layerTol);
    }

    {
        Tensor up;
        {
            Var probe = nn::upsample2(nn::make_leaf(smooth));
            up = ramp_like(probe.val());
        }
        fd_check("upsample2", [&](Var v) { return weighted_sum(nn::upsample2(v), up); }, smooth,
                 layerTol);
    }

    {
        const Tensor other = seeded_tensor(1, 3, 4, 4, 24, -1.0, 1.0);
        Tensor cat;
        {
            Var probe = nn::concat_c(nn::make_leaf(smooth), nn::make_leaf(other));
            cat = ramp_like(probe.val());
        }
        fd_check("concat_c wrt first",
                 [&](Var v) { return weighted_sum(nn::concat_c(v, nn::make_leaf(other)), cat); },
                 smooth, layerTol);
        fd_check("concat_c wrt second",
                 [&](Var v) { return weighted_sum(nn::concat_c(nn::make_leaf(smooth), v), cat); },
                 other, layerTol);
    }

    {
        const Tensor other = seeded_tensor(1, 2, 4, 4, 25, -1.0, 1.0);
        fd_check("add", [&](Var v) { return weighted_sum(nn::add(v, nn::make_leaf(other)), mask44); },
                 smooth, layerTol);
        fd_check("sub wrt subtrahend",
                 [&](Var v) { return weighted_sum(nn::sub(nn::make_leaf(other), v), mask44); },
                 smooth, layerTol);
        fd_check("mul wrt left",
                 [&](Var v) { return weighted_sum(nn::mul(v, nn::make_leaf(other)), mask44); },
                 smooth, layerTol);
        fd_check("mul wrt right",
                 [&](Var v) { return weighted_sum(nn::mul(nn::make_leaf(other), v), mask44); },
                 smooth, layerTol);
    }

    fd_check("add_scalar", [&](Var v) { return weighted_sum(nn::add_scalar(v, 0.37), mask44); },
             smooth, layerTol);
    fd_check("mul_scalar", [&](Var v) { return weighted_sum(nn::mul_scalar(v, -1.8), mask44); },
             smooth, layerTol);

    {
        const Tensor x3 = seeded_tensor(1, 3, 3, 3, 26, -1.0, 1.0);
        const Tensor mask3 = ramp_like(x3);
        const std::array<double, 9> m = {1.2, -0.3, 0.4, 0.05, 0.9, -0.2, 0.6, 0.1, 1.1};
        fd_check("channel_matmul3",
                 [&](Var v) { return weighted_sum(nn::channel_matmul3(v, m, "mix"), mask3); }, x3,
                 layerTol);

        Tensor one;
        {
            Var probe = nn::select_channel(nn::make_leaf(x3), 1);
            one = ramp_like(probe.val());
        }
        fd_check("select_channel",
                 [&](Var v) { return weighted_sum(nn::select_channel(v, 1), one); }, x3, layerTol);
        fd_check("stack3 of selected channels",
                 [&](Var v) {
                     return weighted_sum(nn::stack3(nn::select_channel(v, 2), nn::select_channel(v, 0),
                                                    nn::select_channel(v, 1)),
                                         mask3);
                 },
                 x3, layerTol);
    }

    fd_check("mean_all", [&](Var v) { return nn::mean_all(v); }, smooth, layerTol);
    fd_check("sum_all", [&](Var v) { return nn::sum_all(v); }, smooth, layerTol);

    // Losses. Scores stay inside (0,1) and away from the BCE clamp.
    {
        Tensor real(1, 1, 2, 2), fake(1, 1, 2, 2);
        std::mt19937_64 rng(27);
        std::uniform_real_distribution<double> dist(0.08, 0.92);
        for (double& v : real.data)
            v = dist(rng);
        for (double& v : fake.data)
            v = dist(rng);
        fd_check("gan_loss_d wrt real scores",
                 [&](Var v) { return gan_loss_d(v, nn::make_leaf(fake)); }, real, lossTol);
        fd_check("gan_loss_d wrt fake scores",
                 [&](Var v) { return gan_loss_d(nn::make_leaf(real), v); }, fake, lossTol);
        fd_check("gan_loss_g", [&](Var v) { return gan_loss_g(v); }, fake, lossTol);
    }

    {
        // Prediction kept at least 0.1 from the target in every coordinate so
        // the absolute value is smooth at the probe points.
        const Tensor pred = seeded_tensor(1, 3, 4, 4, 28, -1.0, 1.0);
        Tensor target = pred;
        std::mt19937_64 rng(29);
        std::uniform_real_distribution<double> off(0.1, 0.6);
        std::bernoulli_distribution sign(0.5);
        for (double& v : target.data)
            v += sign(rng) ? off(rng) : -off(rng);
        fd_check("l1_lab_loss", [&](Var v) { return l1_lab_loss(v, target); }, pred, lossTol);
    }

    const StainMatrix sm;
    std::vector<double> dyeH(16), dyeE(16);
    {
        std::mt19937_64 rng(30);
        std::uniform_real_distribution<double> dh(0.3, 1.2);
        std::uniform_real_distribution<double> de(0.2, 0.8);
        for (std::size_t i = 0; i < 16; ++i) {
            dyeH[i] = dh(rng);
            dyeE[i] = de(rng);
        }
    }
    std::vector<double> predH = dyeH, predE = dyeE;
    for (double& v : predH)
        v += 0.1;
    for (double& v : predE)
        v += 0.05;
    const Tensor lab0 = lab_tensor_from_dyes(predH, predE, 4, 4, sm);
    Tensor tH(1, 1, 4, 4), tE(1, 1, 4, 4);
    tH.data = dyeH;
    tE.data = dyeE;

    fd_check("staining_loss through the colour chain",
             [&](Var v) { return staining_loss(v, tH, tE, sm); }, lab0, lossTol);

    {
        Tensor scores(1, 1, 2, 2);
        scores.data = {0.3, 0.6, 0.45, 0.7};
        Tensor target = lab0;
        for (double& v : target.data)
            v += 0.25;
        LossWeights w;
        w.lambdaGan = 0.3;
        w.lambdaL1 = 0.7;
        w.lambdaStaining = 1.3;
        fd_check("total_loss wrt the predicted Lab",
                 [&](Var v) {
                     return total_loss(gan_loss_g(nn::make_leaf(scores)), l1_lab_loss(v, target),
                                       staining_loss(v, tH, tE, sm), w);
                 },
                 lab0, lossTol);
    }

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 120.0, "gradient suite took " + fmt(secs) + "s (limit 120s)");
}

// 5. Windowed metrics against direct per-window evaluation; the rest against
//    hand-computed closed forms.
void check_metric_oracles() {
    // Two seeded 16x16 pairs: independent noise and a correlated pair.
    const PlaneImage x1 = random_plane(16, 16, 501, 0.0, 255.0);
    const PlaneImage y1 = random_plane(16, 16, 502, 0.0, 255.0);
    const PlaneImage y2 = [&] {
        PlaneImage p = x1;
        const PlaneImage n = random_plane(16, 16, 503, -12.0, 12.0);
        for (std::size_t i = 0; i < p.data.size(); ++i)
            p.data[i] = 0.7 * p.data[i] + 30.0 + n.data[i];
        return p;
    }();

    for (const PlaneImage* pair : {&y1, &y2}) {
        const double libSsim = ssim_plane(x1, *pair);
        const double refSsim = brute_ssim(x1, *pair);
        require(std::abs(libSsim - refSsim) <= 1e-6,
                "ssim " + fmt(libSsim) + " vs brute force " + fmt(refSsim));
        const double libUqi = uqi_plane(x1, *pair);
        const double refUqi = brute_uqi(x1, *pair);
        require(std::abs(libUqi - refUqi) <= 1e-6,
                "uqi " + fmt(libUqi) + " vs brute force " + fmt(refUqi));
    }

    // Constant 16x16 images: level 0 vs 10 gives per-pixel squared error 100;
    // level 100 vs 110 gives band RMSE 10 on a mean-100 reference.
    const RgbImage zero = constant_image(16, 16, 0);
    const RgbImage ten = constant_image(16, 16, 10);
    require(std::abs(mse(zero, ten) - 100.0) <= 1e-9, "mse on constant images is not 100");
    require(std::abs(rmse(zero, ten) - 10.0) <= 1e-9, "rmse on constant images is not 10");
    const double expectedPsnr = 10.0 * std::log10(255.0 * 255.0 / 100.0);
    require(std::abs(psnr(zero, ten) - expectedPsnr) <= 1e-9,
            "psnr " + fmt(psnr(zero, ten)) + " vs closed form " + fmt(expectedPsnr));

    const RgbImage hundred = constant_image(16, 16, 100);
    const RgbImage oneTen = constant_image(16, 16, 110);
    require(std::abs(ergas(hundred, oneTen) - 10.0) <= 1e-9,
            "ergas " + fmt(ergas(hundred, oneTen)) + " vs closed form 10");
    require(std::abs(rase(hundred, oneTen) - 10.0) <= 1e-9,
            "rase " + fmt(rase(hundred, oneTen)) + " vs closed form 10");
}

// 6. A 200-step adversarial run on 64x64 tiles must at least halve the
//    total generator loss between the early and late step windows.
void check_training_smoke() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = gWork / "smoke";
    const fs::path manifest =
        synth_corpus(default_style_a(100), default_style_b(100), 10, 64, 64, dir / "data");

    TrainConfig cfg;
    cfg.manifest = manifest;
    cfg.styleLabel = "A";
    cfg.epochs = 1;
    cfg.batchSize = 4;
    cfg.patchSize = 64;
    cfg.stepsPerEpoch = 200;
    cfg.seed = 7;
    cfg.checkpointPath = dir / "model.ckpt";
    std::ostringstream log;
    const TrainResult r = cmd_train(cfg, log);
    require(r.history.size() == 200, "expected 200 steps, got " + std::to_string(r.history.size()));

    // 1-based steps 10..60 and 150..200, inclusive.
    double early = 0, late = 0;
    for (int i = 9; i <= 59; ++i)
        early += r.history[static_cast<std::size_t>(i)].total;
    early /= 51.0;
    for (int i = 149; i <= 199; ++i)
        late += r.history[static_cast<std::size_t>(i)].total;
    late /= 51.0;
    require(late <= 0.5 * early, "late-window loss " + fmt(late) + " is more than half of " +
                                     fmt(early) + " (ratio " + fmt(late / early) + ")");

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 600.0, "smoke run took " + fmt(secs) + "s (limit 600s)");
}

// 7. Train on one staining style, normalize tiles of another, and compare
//    hematoxylin histograms against the training corpus: the distance must
//    at least halve relative to the unnormalized inputs.
void check_domain_transfer() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = gWork / "transfer";
    const fs::path manifest =
        synth_corpus(default_style_a(200), default_style_b(200), 20, 128, 128, dir / "data");

    TrainConfig cfg;
    cfg.manifest = manifest;
    cfg.styleLabel = "A";
    cfg.epochs = 5;
    cfg.batchSize = 8;
    cfg.patchSize = 64;
    cfg.seed = 7;
    cfg.checkpointPath = dir / "model.ckpt";
    std::ostringstream log;
    cmd_train(cfg, log);

    // Pooled reference histogram over the style-A corpus, and the first ten
    // style-B tiles as the normalization inputs.
    const int bins = 64;
    std::vector<double> ref(bins, 0.0);
    std::vector<fs::path> bImages;
    int nA = 0;
    for (const ManifestEntry& e : read_manifest(manifest)) {
        if (e.label == "A") {
            const auto [h, ePlane] = extract_he(load_png(e.path));
            const std::vector<double> hist = value_histogram(h, bins);
            for (int i = 0; i < bins; ++i)
                ref[static_cast<std::size_t>(i)] += hist[static_cast<std::size_t>(i)];
            ++nA;
            if (gTransferImage.empty())
                gTransferImage = e.path;
        } else if (bImages.size() < 10) {
            bImages.push_back(e.path);
        }
    }
    require(nA == 20, "expected 20 style-A tiles in the corpus");
    require(bImages.size() == 10, "expected 10 style-B tiles in the corpus");
    for (double& v : ref)
        v /= nA;

    NormalizeArgs nargs;
    nargs.inputs = bImages;
    nargs.outDir = dir / "out";
    nargs.method = "restain";
    nargs.model = cfg.checkpointPath;
    std::ostringstream err;
    const std::vector<fs::path> outputs = cmd_normalize(nargs, err);
    require(outputs.size() == bImages.size(), "normalization output count mismatch");

    const double binW = 3.0 / bins;
    double w1In = 0, w1Out = 0;
    for (std::size_t i = 0; i < bImages.size(); ++i) {
        const auto [hIn, eIn] = extract_he(load_png(bImages[i]));
        const auto [hOut, eOut] = extract_he(load_png(outputs[i]));
        w1In += wasserstein1(value_histogram(hIn, bins), ref, binW);
        w1Out += wasserstein1(value_histogram(hOut, bins), ref, binW);
    }
    w1In /= static_cast<double>(bImages.size());
    w1Out /= static_cast<double>(bImages.size());
    require(w1Out <= 0.5 * w1In, "mean W1 to the reference is " + fmt(w1Out) +
                                     " after normalization vs " + fmt(w1In) +
                                     " before (ratio " + fmt(w1Out / w1In) + ", limit 0.5)");

    gTransferModel = cfg.checkpointPath;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 1200.0, "domain transfer took " + fmt(secs) + "s (limit 1200s)");
}

// 8. Dye-scaling stability sweep: five coefficients, five outputs, and the
//    unscaled coefficient is its own reference at distance exactly zero.
void check_stability_sweep() {
    fs::path model = gTransferModel;
    fs::path image = gTransferImage;
    if (model.empty() || !fs::exists(model)) {
        // The transfer check failed before writing its model; train a tiny
        // stand-in so this check still exercises the sweep end to end.
        const fs::path dir = gWork / "stability_fallback";
        const fs::path manifest =
            synth_corpus(default_style_a(5), default_style_b(5), 2, 32, 32, dir / "data");
        TrainConfig cfg;
        cfg.manifest = manifest;
        cfg.styleLabel = "A";
        cfg.epochs = 1;
        cfg.batchSize = 1;
        cfg.patchSize = 16;
        cfg.seed = 3;
        cfg.checkpointPath = dir / "model.ckpt";
        std::ostringstream log;
        cmd_train(cfg, log);
        model = cfg.checkpointPath;
        for (const ManifestEntry& e : read_manifest(manifest))
            if (e.label == "A") {
                image = e.path;
                break;
            }
    }

    StabilityArgs args;
    args.image = image;
    args.model = model;
    args.outDir = gWork / "stability";
    std::ostringstream out, err;
    const std::vector<StabilityRow> rows = cmd_stability(args, out, err);

    const std::array<double, 5> expected = {0.6, 0.9, 1.0, 1.1, 1.2};
    require(rows.size() == expected.size(),
            "expected 5 summary rows, got " + std::to_string(rows.size()));
    bool sawUnit = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].coefficient == expected[i],
                "row " + std::to_string(i) + " coefficient " + fmt(rows[i].coefficient));
        require(fs::exists(rows[i].outputPath),
                "missing output " + rows[i].outputPath.string());
        if (rows[i].coefficient == 1.0) {
            sawUnit = true;
            require(rows[i].meanLabDistance == 0.0,
                    "self-distance at coefficient 1.0 is " + fmt(rows[i].meanLabDistance) +
                        ", expected exactly 0");
        }
    }
    require(sawUnit, "no coefficient-1.0 row in the summary");
}

// 9. Classical baselines: normalizing an image onto its own statistics is an
//    identity, and stain-vector estimation recovers the vectors a synthetic
//    two-dye tile was rendered with.
void check_baseline_identities() {
    const SynthStyle style = default_style_a(31);
    const RgbImage img = synth_image(style, 96, 96, 4);

    const RgbImage self = reinhard_normalize(img, lab_stats(img));
    int worst = 0;
    for (std::size_t i = 0; i < img.data.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<int>(img.data[i]) -
                                         static_cast<int>(self.data[i])));
    require(worst <= 1, "self-normalization moved a channel by " + std::to_string(worst));

    const RgbImage tile = synth_image(style, 128, 128, 4);
    const StainMatrix est = macenko_estimate(tile);
    for (int row : {0, 1}) {
        double dot = 0, na = 0, nb = 0;
        for (int c = 0; c < 3; ++c) {
            const double a = est.m(row, c);
            const double b = style.stains.m(row, c);
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        const double angle = std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0));
        require(angle < 0.05, std::string(row == 0 ? "hematoxylin" : "eosin") +
                                  " vector off by " + fmt(angle) + " rad (limit 0.05)");
    }
}

// 10. Checkpoint serialization: a load/save cycle is byte-stable and the
//     trailing CRC catches a single flipped bit.
void check_checkpoint_integrity() {
    const nn::GeneratorNet gen(99);
    const nn::DiscriminatorNet disc(100);
    const nn::Adam genOpt(gen.params());
    const nn::Adam discOpt(disc.params());
    const nn::Checkpoint ck = make_checkpoint(gen, disc, genOpt, discOpt, 7);

    const fs::path a = gWork / "ck_a.bin";
    const fs::path b = gWork / "ck_b.bin";
    nn::save_checkpoint(ck, a);
    const nn::Checkpoint loaded = nn::load_checkpoint(a);
    nn::save_checkpoint(loaded, b);
    std::vector<unsigned char> bytesA = read_bytes(a);
    const std::vector<unsigned char> bytesB = read_bytes(b);
    require(bytesA == bytesB, "save -> load -> save is not byte-identical");

    bytesA[bytesA.size() / 2] ^= 0x08;
    const fs::path c = gWork / "ck_c.bin";
    std::ofstream(c, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytesA.data()),
               static_cast<std::streamsize>(bytesA.size()));
    bool threw = false;
    std::string message;
    try {
        nn::load_checkpoint(c);
    } catch (const Error& e) {
        threw = true;
        message = e.what();
    }
    require(threw, "loading a corrupted checkpoint did not throw");
    require(message.find("CRC") != std::string::npos,
            "corruption error does not mention the CRC: " + message);
}

} // namespace

int main() {
    gWork = fs::temp_directory_path() / "restain_acceptance";
    std::error_code ec;
    fs::remove_all(gWork, ec);
    fs::create_directories(gWork);

    run_check(1, "stain deconvolution round trip on 1000 random bright pixels",
              check_stain_round_trip);
    run_check(2, "built-in stain matrix and its inverse", check_matrix_sanity);
    run_check(3, "Lab round trip over a 4096-point RGB grid", check_lab_round_trip);
    run_check(4, "finite-difference gradients for every layer and loss", check_gradient_suite);
    run_check(5, "quality metrics against brute-force and closed-form oracles",
              check_metric_oracles);
    run_check(6, "200-step training smoke halves the total loss", check_training_smoke);
    run_check(7, "cross-style normalization halves the histogram distance", check_domain_transfer);
    run_check(8, "dye-scaling stability sweep with a zero self-distance", check_stability_sweep);
    run_check(9, "baseline identities (self-statistics and stain-vector recovery)",
              check_baseline_identities);
    run_check(10, "checkpoint byte stability and CRC corruption detection",
              check_checkpoint_integrity);

    std::cout << (10 - gFailed) << " of 10 criteria passed\n";
    return gFailed == 0 ? 0 : 1;
}
