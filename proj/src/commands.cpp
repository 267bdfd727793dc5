#include "restain/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "restain/colorspace.hpp"
#include "restain/png_io.hpp"

namespace restain {

void cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
    if (args.count < 1)
        throw UsageError("synth: --count must be >= 1");
    if (args.width < 8 || args.height < 8)
        throw UsageError("synth: image dimensions must be >= 8");
    if (args.outDir.empty())
        throw UsageError("synth: --out directory is required");

    const SynthStyle a = default_style_a(args.seed);
    const SynthStyle b = default_style_b(args.seed);
    const std::filesystem::path manifest =
        synth_corpus(a, b, args.count, args.width, args.height, args.outDir);
    err << "wrote " << 2 * args.count << " images\n";
    out << manifest.string() << "\n";
}

TrainResult cmd_train(const TrainConfig& cfg, std::ostream& err) {
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (cfg.checkpointPath.empty())
        throw UsageError("train: --checkpoint path is required");
    if (cfg.manifest.empty())
        throw UsageError("train: --data manifest is required");
    return train_model(cfg, err);
}

namespace {

// Largest multiple-of-4 crop centered in the image; warns when cropping.
RgbImage crop_to_multiple_of_4(const RgbImage& img, const std::string& name, std::ostream& err) {
    const int w = img.width / 4 * 4;
    const int h = img.height / 4 * 4;
    if (w == img.width && h == img.height)
        return img;
    if (w < 4 || h < 4)
        throw Error(name + ": image too small to crop to a multiple of 4");
    err << "warning: " << name << " is " << img.width << "x" << img.height
        << "; center-cropping to " << w << "x" << h << "\n";
    const int x0 = (img.width - w) / 2;
    const int y0 = (img.height - h) / 2;
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    return out;
}

RgbImage normalize_one_restain(const RgbImage& input, const nn::GeneratorNet& gen,
                               const NormalizeArgs& args) {
    const LabImage lab = rgb_to_lab(input);
    auto [h, e] = extract_he(input, args.stains, args.odParams);
    LabImage outLab = gen.run(lab.L, h, e);
    if (args.keepL)
        outLab.L = lab.L;
    return lab_to_rgb(outLab);
}

} // namespace

std::vector<std::filesystem::path> cmd_normalize(const NormalizeArgs& args, std::ostream& err) {
    if (args.inputs.empty())
        throw UsageError("normalize: at least one input image is required");
    if (args.outDir.empty())
        throw UsageError("normalize: --out directory is required");
    const bool isRestain = args.method == "restain";
    const bool isReinhard = args.method == "reinhard";
    const bool isMacenko = args.method == "macenko";
    if (!isRestain && !isReinhard && !isMacenko)
        throw UsageError("normalize: unknown method '" + args.method +
                         "'; valid methods: restain, reinhard, macenko");
    if (isRestain && args.model.empty())
        throw UsageError("normalize: method restain requires --model CHECKPOINT");
    if (isReinhard && args.targetStats.empty() && args.targetImage.empty())
        throw UsageError("normalize: method reinhard requires --target-stats or --target");
    if (isMacenko && args.targetImage.empty())
        throw UsageError("normalize: method macenko requires --target IMAGE");

    std::filesystem::create_directories(args.outDir);

    // Method-specific target artifacts, resolved once.
    nn::GeneratorNet gen(0);
    LabStats targetStats;
    StainMatrix targetSm;
    StainMaxima targetMaxC;
    if (isRestain) {
        gen = load_generator(args.model);
    } else if (isReinhard) {
        targetStats = args.targetStats.empty() ? lab_stats(load_png(args.targetImage))
                                               : load_lab_stats(args.targetStats);
    } else {
        const RgbImage target = load_png(args.targetImage);
        const MacenkoParams mp;
        targetSm = macenko_estimate(target, mp, args.odParams);
        targetMaxC = macenko_maxima(target, targetSm, mp, args.odParams);
    }

    std::vector<std::filesystem::path> outputs;
    outputs.reserve(args.inputs.size());
    for (const std::filesystem::path& inPath : args.inputs) {
        RgbImage input = load_png(inPath);
        RgbImage result;
        if (isRestain) {
            input = crop_to_multiple_of_4(input, inPath.filename().string(), err);
            result = normalize_one_restain(input, gen, args);
        } else if (isReinhard) {
            result = reinhard_normalize(input, targetStats);
        } else {
            result = macenko_normalize(input, targetSm, targetMaxC, MacenkoParams{},
                                       args.odParams);
        }
        const std::filesystem::path outPath = args.outDir / inPath.filename();
        save_png(result, outPath);
        outputs.push_back(outPath);
        err << inPath.string() << " -> " << outPath.string() << "\n";
    }
    return outputs;
}

MetricReport cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    if (args.pairsManifest.empty())
        throw UsageError("evaluate: --pairs manifest is required");
    for (const std::string& m : args.metrics) {
        if (std::find(metric_names().begin(), metric_names().end(), m) == metric_names().end()) {
            std::string valid;
            for (const std::string& n : metric_names())
                valid += (valid.empty() ? "" : ", ") + n;
            throw UsageError("evaluate: unknown metric '" + m + "'; valid metrics: " + valid);
        }
    }

    std::ifstream f(args.pairsManifest);
    if (!f)
        throw Error("cannot open pairs manifest: " + args.pairsManifest.string());
    const std::filesystem::path base = args.pairsManifest.parent_path();
    std::vector<RgbImage> refs, tests;
    std::vector<std::string> names;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("pairs manifest line has no TAB separator: " + line);
        const std::filesystem::path ref = base / line.substr(0, tab);
        const std::filesystem::path test = base / line.substr(tab + 1);
        refs.push_back(load_png(ref));
        tests.push_back(load_png(test));
        names.push_back(ref.filename().string() + ":" + test.filename().string());
    }
    if (refs.empty())
        throw Error("pairs manifest is empty: " + args.pairsManifest.string());

    std::vector<std::pair<const RgbImage*, const RgbImage*>> pairs;
    pairs.reserve(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i)
        pairs.emplace_back(&refs[i], &tests[i]);

    const MetricReport report = evaluate_set(pairs, args.metrics, names);
    if (args.outFile.empty()) {
        write_report(report, out);
    } else {
        std::ofstream of(args.outFile, std::ios::trunc);
        if (!of)
            throw Error("cannot write report: " + args.outFile.string());
        write_report(report, of);
        err << "report written to " << args.outFile.string() << "\n";
    }
    return report;
}

std::vector<StabilityRow> cmd_stability(const StabilityArgs& args, std::ostream& out,
                                        std::ostream& err) {
    if (args.image.empty() || args.model.empty())
        throw UsageError("stability: --image and --model are required");
    if (args.coefficients.empty())
        throw UsageError("stability: at least one coefficient is required");
    if (args.outDir.empty())
        throw UsageError("stability: --out directory is required");
    std::filesystem::create_directories(args.outDir);

    const nn::GeneratorNet gen = load_generator(args.model);
    RgbImage input = load_png(args.image);
    input = crop_to_multiple_of_4(input, args.image.filename().string(), err);
    const LabImage lab = rgb_to_lab(input);
    const auto [h, e] = extract_he(input, args.stains, args.odParams);

    auto run_with_coefficient = [&](double c) {
        PlaneImage hs = h, es = e;
        for (double& v : hs.data)
            v *= c;
        for (double& v : es.data)
            v *= c;
        return gen.run(lab.L, hs, es);
    };

    const LabImage reference = run_with_coefficient(1.0);
    const std::string stem = args.image.stem().string();

    std::vector<StabilityRow> rows;
    out << "coefficient\tmean_lab_distance\toutput\n";
    for (double c : args.coefficients) {
        const LabImage result = run_with_coefficient(c);
        double dist = 0;
        for (std::size_t i = 0; i < result.L.size(); ++i) {
            const double dL = result.L.data[i] - reference.L.data[i];
            const double da = result.a.data[i] - reference.a.data[i];
            const double db = result.b.data[i] - reference.b.data[i];
            dist += std::sqrt(dL * dL + da * da + db * db);
        }
        dist /= static_cast<double>(result.L.size());

        std::ostringstream name;
        name << stem << "_c" << c << ".png";
        const std::filesystem::path outPath = args.outDir / name.str();
        save_png(lab_to_rgb(result), outPath);

        rows.push_back({c, dist, outPath});
        out << c << '\t' << dist << '\t' << outPath.string() << "\n";
    }
    return rows;
}

std::vector<double> value_histogram(const PlaneImage& plane, int bins, double lo, double hi) {
    if (bins < 1)
        throw Error("histogram needs at least one bin");
    if (!(hi > lo))
        throw Error("histogram range must be increasing");
    std::vector<double> hist(bins, 0.0);
    const double scale = bins / (hi - lo);
    for (double v : plane.data) {
        int idx = static_cast<int>((v - lo) * scale);
        idx = std::clamp(idx, 0, bins - 1);
        hist[idx] += 1.0;
    }
    const double n = static_cast<double>(plane.size());
    for (double& v : hist)
        v /= n;
    return hist;
}

double wasserstein1(const std::vector<double>& a, const std::vector<double>& b, double binWidth) {
    if (a.size() != b.size())
        throw Error("wasserstein1: histogram sizes differ");
    double cdfDiff = 0, total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cdfDiff += a[i] - b[i];
        total += std::abs(cdfDiff);
    }
    return total * binWidth;
}

HistcmpResult cmd_histcmp(const HistcmpArgs& args, std::ostream& out, std::ostream& err) {
    if (args.imageA.empty() || args.imageB.empty())
        throw UsageError("histcmp: two input images are required");
    if (args.bins < 1)
        throw UsageError("histcmp: --bins must be >= 1");

    const RgbImage imgA = load_png(args.imageA);
    const RgbImage imgB = load_png(args.imageB);
    const auto [hA, eA] = extract_he(imgA, args.stains, args.odParams);
    const auto [hB, eB] = extract_he(imgB, args.stains, args.odParams);

    HistcmpResult r;
    r.histHA = value_histogram(hA, args.bins);
    r.histHB = value_histogram(hB, args.bins);
    r.histEA = value_histogram(eA, args.bins);
    r.histEB = value_histogram(eB, args.bins);
    const double binWidth = 3.0 / args.bins;
    r.w1H = wasserstein1(r.histHA, r.histHB, binWidth);
    r.w1E = wasserstein1(r.histEA, r.histEB, binWidth);

    out << "bin_lo\tH_a\tH_b\tE_a\tE_b\n";
    for (int i = 0; i < args.bins; ++i)
        out << i * binWidth << '\t' << r.histHA[i] << '\t' << r.histHB[i] << '\t' << r.histEA[i]
            << '\t' << r.histEB[i] << "\n";
    out << "w1_h\t" << r.w1H << "\n";
    out << "w1_e\t" << r.w1E << "\n";
    err << "W1(H) = " << r.w1H << ", W1(E) = " << r.w1E << "\n";
    return r;
}

} // namespace restain
