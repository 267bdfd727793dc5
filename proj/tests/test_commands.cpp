#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <type_traits>

#include "restain/commands.hpp"
#include "restain/colorspace.hpp"
#include "restain/png_io.hpp"
#include "restain/synth.hpp"

using namespace restain;
namespace fs = std::filesystem;

static_assert(std::is_base_of_v<Error, UsageError>,
              "usage errors must be catchable as the library error type");

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "restain_cmd_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(static_cast<bool>(f));
    return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Saves a freshly initialized (untrained) model checkpoint. With zeroHead the
// generator's output layer is zeroed, making its prediction the constant
// neutral (L=50, a=b=0) regardless of input.
fs::path write_model(const fs::path& dir, std::uint64_t seed, bool zeroHead) {
    nn::GeneratorNet gen(seed);
    nn::DiscriminatorNet disc(seed + 1);
    if (zeroHead)
        for (const nn::NodePtr& p : gen.params())
            if (p->name == "gen.out.w" || p->name == "gen.out.b")
                for (double& v : p->value.data)
                    v = 0.0;
    nn::Adam genOpt(gen.params());
    nn::Adam discOpt(disc.params());
    const fs::path path = dir / (zeroHead ? "zero.ckpt" : "init.ckpt");
    nn::save_checkpoint(make_checkpoint(gen, disc, genOpt, discOpt, 0), path);
    return path;
}

fs::path save_synth_png(const fs::path& dir, const std::string& name, const SynthStyle& style,
                        int w, int h, std::uint64_t rngSeed) {
    const fs::path p = dir / name;
    save_png(synth_image(style, w, h, rngSeed), p);
    return p;
}

} // namespace

TEST_CASE("synth command writes a corpus and prints the manifest path") {
    const fs::path dir = fresh_dir("synth");
    SynthArgs args;
    args.outDir = dir / "corpus";
    args.count = 2;
    args.width = 16;
    args.height = 16;
    args.seed = 5;

    std::ostringstream out, err;
    cmd_synth(args, out, err);

    std::string manifestLine = out.str();
    REQUIRE_FALSE(manifestLine.empty());
    manifestLine.pop_back(); // trailing newline
    const fs::path manifest(manifestLine);
    REQUIRE(fs::exists(manifest));
    CHECK(read_manifest(manifest).size() == 4);
    CHECK(err.str().find("wrote 4 images") != std::string::npos);

    SUBCASE("the corpus is reproducible from the seed") {
        SynthArgs again = args;
        again.outDir = dir / "corpus2";
        std::ostringstream out2, err2;
        cmd_synth(again, out2, err2);
        for (const ManifestEntry& e : read_manifest(manifest)) {
            const fs::path other = again.outDir / e.path.filename();
            CHECK(read_bytes(e.path) == read_bytes(other));
        }
    }
    SUBCASE("bad arguments are usage errors") {
        SynthArgs bad = args;
        bad.count = 0;
        std::ostringstream o, e;
        CHECK_THROWS_AS(cmd_synth(bad, o, e), UsageError);
        bad = args;
        bad.width = 4;
        CHECK_THROWS_AS(cmd_synth(bad, o, e), UsageError);
        bad = args;
        bad.outDir.clear();
        CHECK_THROWS_AS(cmd_synth(bad, o, e), UsageError);
    }
}

TEST_CASE("train command validates its configuration up front") {
    TrainConfig cfg;
    cfg.manifest = "somewhere.tsv";
    cfg.checkpointPath = "model.ckpt";
    cfg.patchSize = 16;
    std::ostringstream err;

    SUBCASE("zero epochs") {
        cfg.epochs = 0;
        CHECK_THROWS_AS(cmd_train(cfg, err), UsageError);
    }
    SUBCASE("zero batch size") {
        cfg.batchSize = 0;
        CHECK_THROWS_AS(cmd_train(cfg, err), UsageError);
    }
    SUBCASE("patch size not a multiple of 4") {
        cfg.patchSize = 10;
        CHECK_THROWS_WITH_AS(cmd_train(cfg, err), doctest::Contains("multiple of 4"), UsageError);
    }
    SUBCASE("missing checkpoint path") {
        cfg.checkpointPath.clear();
        CHECK_THROWS_AS(cmd_train(cfg, err), UsageError);
    }
    SUBCASE("missing manifest") {
        cfg.manifest.clear();
        CHECK_THROWS_AS(cmd_train(cfg, err), UsageError);
    }
}

TEST_CASE("training runs, logs losses and writes a checkpoint") {
    const fs::path dir = fresh_dir("train");
    const fs::path manifest =
        synth_corpus(default_style_a(9), default_style_b(9), 2, 16, 16, dir / "data");

    TrainConfig cfg;
    cfg.manifest = manifest;
    cfg.styleLabel = "A";
    cfg.epochs = 1;
    cfg.batchSize = 1;
    cfg.patchSize = 16;
    cfg.seed = 3;
    cfg.checkpointPath = dir / "model.ckpt";

    std::ostringstream log;
    const TrainResult r = cmd_train(cfg, log);
    CHECK(r.epochsRun == 1);
    CHECK(r.finalEpoch == 1);
    REQUIRE(r.history.size() == 2); // 2 patches, batch 1, one pass
    for (const StepLosses& s : r.history) {
        CHECK(std::isfinite(s.d));
        CHECK(std::isfinite(s.total));
        CHECK(s.total >= 0.0);
    }
    CHECK(log.str().find("epoch 0 step 0") != std::string::npos);

    REQUIRE(fs::exists(cfg.checkpointPath));
    const nn::Checkpoint ck = nn::load_checkpoint(cfg.checkpointPath);
    CHECK(ck.epoch == 1);
    CHECK_NOTHROW(ck.find("gen.enc1.w"));
    CHECK_NOTHROW(ck.find("disc.c4.b"));
    CHECK_NOTHROW(ck.find("adam.g.t"));
    CHECK_NOTHROW(ck.find("adam.d.m.disc.c1.w"));

    SUBCASE("resume picks up after the stored epoch") {
        TrainConfig more = cfg;
        more.epochs = 2;
        more.resume = true;
        std::ostringstream log2;
        const TrainResult r2 = cmd_train(more, log2);
        CHECK(r2.epochsRun == 1); // only epoch 1 was left to run
        CHECK(r2.finalEpoch == 2);
        CHECK(log2.str().find("resumed") != std::string::npos);
        CHECK(nn::load_checkpoint(cfg.checkpointPath).epoch == 2);

        std::ostringstream log3;
        const TrainResult r3 = cmd_train(more, log3); // already complete
        CHECK(r3.epochsRun == 0);
        CHECK(r3.history.empty());
        CHECK(r3.finalEpoch == 2);
        CHECK(log3.str().find("nothing to do") != std::string::npos);
    }
    SUBCASE("a fixed step budget overrides the pass length") {
        TrainConfig fixed = cfg;
        fixed.stepsPerEpoch = 5;
        fixed.checkpointPath = dir / "fixed.ckpt";
        std::ostringstream log2;
        CHECK(cmd_train(fixed, log2).history.size() == 5);
    }
    SUBCASE("unknown style label fails with a clear message") {
        TrainConfig bad = cfg;
        bad.styleLabel = "Z";
        std::ostringstream log2;
        CHECK_THROWS_WITH_AS(cmd_train(bad, log2), doctest::Contains("no images labeled"), Error);
    }
    SUBCASE("images smaller than the patch size fail") {
        TrainConfig bad = cfg;
        bad.patchSize = 32;
        std::ostringstream log2;
        CHECK_THROWS_WITH_AS(cmd_train(bad, log2), doctest::Contains("smaller than the patch"), Error);
    }
}

TEST_CASE("normalize with the re-stainer keeps or replaces luminance") {
    const fs::path dir = fresh_dir("normalize_restain");
    const fs::path model = write_model(dir, 17, /*zeroHead=*/true);
    const fs::path input = save_synth_png(dir, "in.png", default_style_b(21), 16, 16, 1);

    NormalizeArgs args;
    args.inputs = {input};
    args.outDir = dir / "out";
    args.method = "restain";
    args.model = model;

    SUBCASE("keep-luminance copies the input L plane") {
        std::ostringstream err;
        const auto outputs = cmd_normalize(args, err);
        REQUIRE(outputs.size() == 1);
        REQUIRE(fs::exists(outputs[0]));
        CHECK(outputs[0].filename() == input.filename());

        const RgbImage in = load_png(input);
        const RgbImage out = load_png(outputs[0]);
        REQUIRE(out.same_dims(in));
        const LabImage labIn = rgb_to_lab(in);
        const LabImage labOut = rgb_to_lab(out);
        for (std::size_t i = 0; i < labIn.L.data.size(); ++i) {
            REQUIRE(std::abs(labOut.L.data[i] - labIn.L.data[i]) <= 1.0);
            REQUIRE(std::abs(labOut.a.data[i]) <= 1.0); // zeroed head: neutral chroma
            REQUIRE(std::abs(labOut.b.data[i]) <= 1.0);
        }
    }
    SUBCASE("without keep-luminance the network L is used") {
        args.keepL = false;
        std::ostringstream err;
        const auto outputs = cmd_normalize(args, err);
        const LabImage labOut = rgb_to_lab(load_png(outputs[0]));
        for (double v : labOut.L.data)
            REQUIRE(std::abs(v - 50.0) <= 1.0); // zeroed head: sigmoid(0)*100
    }
    SUBCASE("inputs not divisible by 4 are center-cropped with a warning") {
        const fs::path odd = save_synth_png(dir, "odd.png", default_style_b(21), 18, 18, 2);
        args.inputs = {odd};
        std::ostringstream err;
        const auto outputs = cmd_normalize(args, err);
        CHECK(err.str().find("center-cropping") != std::string::npos);
        const RgbImage out = load_png(outputs[0]);
        CHECK(out.width == 16);
        CHECK(out.height == 16);
    }
    SUBCASE("argument validation") {
        std::ostringstream err;
        NormalizeArgs bad = args;
        bad.model.clear();
        CHECK_THROWS_AS(cmd_normalize(bad, err), UsageError);
        bad = args;
        bad.method = "histogram";
        CHECK_THROWS_WITH_AS(cmd_normalize(bad, err), doctest::Contains("unknown method"), UsageError);
        bad = args;
        bad.inputs.clear();
        CHECK_THROWS_AS(cmd_normalize(bad, err), UsageError);
        bad = args;
        bad.outDir.clear();
        CHECK_THROWS_AS(cmd_normalize(bad, err), UsageError);
    }
}

TEST_CASE("normalize with the classical baselines") {
    const fs::path dir = fresh_dir("normalize_baseline");
    const fs::path target = save_synth_png(dir, "target.png", default_style_a(30), 96, 96, 3);
    const fs::path input = save_synth_png(dir, "input.png", default_style_b(30), 96, 96, 4);

    SUBCASE("reinhard from a target image moves the statistics") {
        NormalizeArgs args;
        args.inputs = {input};
        args.outDir = dir / "reinhard";
        args.method = "reinhard";
        args.targetImage = target;
        std::ostringstream err;
        const auto outputs = cmd_normalize(args, err);
        REQUIRE(outputs.size() == 1);

        const LabStats want = lab_stats(load_png(target));
        const LabStats got = lab_stats(load_png(outputs[0]));
        CHECK(std::abs(got.meanL - want.meanL) < 2.0);
        CHECK(std::abs(got.meanA - want.meanA) < 2.0);
        CHECK(std::abs(got.meanB - want.meanB) < 2.0);

        SUBCASE("a stats file target gives the identical result") {
            const fs::path statsFile = dir / "target_stats.txt";
            save_lab_stats(want, statsFile);
            NormalizeArgs viaStats = args;
            viaStats.targetImage.clear();
            viaStats.targetStats = statsFile;
            viaStats.outDir = dir / "reinhard_stats";
            std::ostringstream err2;
            const auto outputs2 = cmd_normalize(viaStats, err2);
            CHECK(load_png(outputs2[0]) == load_png(outputs[0]));
        }
    }
    SUBCASE("macenko from a target image produces a valid output") {
        NormalizeArgs args;
        args.inputs = {input};
        args.outDir = dir / "macenko";
        args.method = "macenko";
        args.targetImage = target;
        std::ostringstream err;
        const auto outputs = cmd_normalize(args, err);
        REQUIRE(outputs.size() == 1);
        const RgbImage out = load_png(outputs[0]);
        CHECK(out.width == 96);
        CHECK(out.height == 96);
    }
    SUBCASE("baseline target arguments are required") {
        std::ostringstream err;
        NormalizeArgs bad;
        bad.inputs = {input};
        bad.outDir = dir / "x";
        bad.method = "reinhard";
        CHECK_THROWS_AS(cmd_normalize(bad, err), UsageError);
        bad.method = "macenko";
        CHECK_THROWS_AS(cmd_normalize(bad, err), UsageError);
    }
}

TEST_CASE("evaluate command reads a tab-separated pairs manifest") {
    const fs::path dir = fresh_dir("evaluate");
    const SynthStyle style = default_style_a(40);
    const fs::path ref = save_synth_png(dir, "ref.png", style, 16, 16, 1);
    save_synth_png(dir, "same.png", style, 16, 16, 1);
    save_synth_png(dir, "other.png", style, 16, 16, 2);

    const fs::path manifest = dir / "pairs.tsv";
    std::ofstream(manifest) << "ref.png\tsame.png\nref.png\tother.png\n";

    EvaluateArgs args;
    args.pairsManifest = manifest;
    args.metrics = {"mse", "psnr"};

    std::ostringstream out, err;
    const MetricReport rep = cmd_evaluate(args, out, err);
    REQUIRE(rep.values.size() == 2);
    CHECK(rep.values[0][0] == 0.0);   // identical pair
    CHECK(rep.values[0][1] == 100.0); // capped psnr
    CHECK(rep.values[1][0] > 0.0);
    CHECK(out.str().rfind("pair\tmse\tpsnr", 0) == 0);

    SUBCASE("report can go to a file instead of stdout") {
        EvaluateArgs toFile = args;
        toFile.outFile = dir / "report.tsv";
        std::ostringstream out2, err2;
        cmd_evaluate(toFile, out2, err2);
        CHECK(out2.str().empty());
        REQUIRE(fs::exists(toFile.outFile));
        std::ifstream f(toFile.outFile);
        std::string header;
        std::getline(f, header);
        CHECK(header == "pair\tmse\tpsnr");
        CHECK(err2.str().find("report written") != std::string::npos);
    }
    SUBCASE("unknown metric is a usage error") {
        EvaluateArgs bad = args;
        bad.metrics = {"fsim"};
        std::ostringstream o, e;
        CHECK_THROWS_AS(cmd_evaluate(bad, o, e), UsageError);
    }
    SUBCASE("missing manifest is a runtime error") {
        EvaluateArgs bad = args;
        bad.pairsManifest = dir / "absent.tsv";
        std::ostringstream o, e;
        CHECK_THROWS_AS(cmd_evaluate(bad, o, e), Error);
    }
    SUBCASE("a line without a tab is rejected") {
        const fs::path badManifest = dir / "bad.tsv";
        std::ofstream(badManifest) << "ref.png same.png\n";
        EvaluateArgs bad = args;
        bad.pairsManifest = badManifest;
        std::ostringstream o, e;
        CHECK_THROWS_WITH_AS(cmd_evaluate(bad, o, e), doctest::Contains("TAB"), Error);
    }
    SUBCASE("an empty manifest is rejected") {
        const fs::path emptyManifest = dir / "empty.tsv";
        std::ofstream(emptyManifest) << "\n\n";
        EvaluateArgs bad = args;
        bad.pairsManifest = emptyManifest;
        std::ostringstream o, e;
        CHECK_THROWS_WITH_AS(cmd_evaluate(bad, o, e), doctest::Contains("empty"), Error);
    }
}

TEST_CASE("stability sweep measures drift against the unscaled output") {
    const fs::path dir = fresh_dir("stability");
    const fs::path model = write_model(dir, 23, /*zeroHead=*/false);
    const fs::path image = save_synth_png(dir, "tile.png", default_style_a(50), 16, 16, 6);

    StabilityArgs args;
    args.image = image;
    args.model = model;
    args.outDir = dir / "out";

    std::ostringstream out, err;
    const auto rows = cmd_stability(args, out, err);
    REQUIRE(rows.size() == 5);
    bool sawUnit = false;
    for (const StabilityRow& row : rows) {
        CHECK(fs::exists(row.outputPath));
        CHECK(row.outputPath.filename().string().find("_c") != std::string::npos);
        CHECK(std::isfinite(row.meanLabDistance));
        CHECK(row.meanLabDistance >= 0.0);
        if (row.coefficient == 1.0) {
            sawUnit = true;
            CHECK(row.meanLabDistance == 0.0); // deterministic forward: exact
        }
    }
    CHECK(sawUnit);
    CHECK(out.str().rfind("coefficient\tmean_lab_distance\toutput", 0) == 0);

    SUBCASE("custom coefficient list") {
        StabilityArgs one = args;
        one.coefficients = {1.0};
        one.outDir = dir / "single";
        std::ostringstream o, e;
        CHECK(cmd_stability(one, o, e).size() == 1);
    }
    SUBCASE("argument validation") {
        std::ostringstream o, e;
        StabilityArgs bad = args;
        bad.model.clear();
        CHECK_THROWS_AS(cmd_stability(bad, o, e), UsageError);
        bad = args;
        bad.coefficients.clear();
        CHECK_THROWS_AS(cmd_stability(bad, o, e), UsageError);
        bad = args;
        bad.outDir.clear();
        CHECK_THROWS_AS(cmd_stability(bad, o, e), UsageError);
    }
}

TEST_CASE("histcmp compares dye-intensity distributions") {
    const fs::path dir = fresh_dir("histcmp");
    const fs::path a = save_synth_png(dir, "a.png", default_style_a(60), 32, 32, 1);
    const fs::path b = save_synth_png(dir, "b.png", default_style_b(60), 32, 32, 1);

    SUBCASE("an image against itself has zero distance") {
        HistcmpArgs args;
        args.imageA = a;
        args.imageB = a;
        std::ostringstream out, err;
        const HistcmpResult r = cmd_histcmp(args, out, err);
        CHECK(r.w1H == 0.0);
        CHECK(r.w1E == 0.0);
        double sum = 0;
        for (double v : r.histHA)
            sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(out.str().find("w1_h\t") != std::string::npos);
        CHECK(out.str().rfind("bin_lo\tH_a\tH_b\tE_a\tE_b", 0) == 0);
    }
    SUBCASE("different styles are measurably apart") {
        HistcmpArgs args;
        args.imageA = a;
        args.imageB = b;
        std::ostringstream out, err;
        const HistcmpResult r = cmd_histcmp(args, out, err);
        CHECK(r.w1H > 0.01);
        REQUIRE(r.histHA.size() == 64);
        REQUIRE(r.histHB.size() == 64);
    }
    SUBCASE("bin count must be positive") {
        HistcmpArgs bad;
        bad.imageA = a;
        bad.imageB = b;
        bad.bins = 0;
        std::ostringstream out, err;
        CHECK_THROWS_AS(cmd_histcmp(bad, out, err), UsageError);
    }
}

TEST_CASE("histogram and transport-distance helpers") {
    SUBCASE("histograms are normalized and clamp outliers to edge bins") {
        PlaneImage p(4, 1);
        p.data = {-1.0, 0.5, 2.9, 5.0};
        const auto h = value_histogram(p, 3, 0.0, 3.0); // bins [0,1) [1,2) [2,3)
        REQUIRE(h.size() == 3);
        CHECK(h[0] == doctest::Approx(0.5)); // -1 clamps down, 0.5 lands here
        CHECK(h[1] == doctest::Approx(0.0));
        CHECK(h[2] == doctest::Approx(0.5)); // 2.9 plus clamped 5.0
        CHECK_THROWS_AS(value_histogram(p, 0), Error);
        CHECK_THROWS_AS(value_histogram(p, 4, 2.0, 1.0), Error);
    }
    SUBCASE("moving all mass one bin over costs one bin width") {
        const std::vector<double> x = {1.0, 0.0};
        const std::vector<double> y = {0.0, 1.0};
        CHECK(wasserstein1(x, y, 0.25) == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(wasserstein1(x, x, 0.25) == 0.0);
        CHECK_THROWS_AS(wasserstein1(x, {1.0}, 0.25), Error);
    }
    SUBCASE("a uniform shift of the underlying values moves w1 by the shift") {
        PlaneImage base(64, 64);
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> dist(0.8, 1.6);
        for (double& v : base.data)
            v = dist(rng);
        PlaneImage shifted = base;
        for (double& v : shifted.data)
            v += 0.5;
        const int bins = 64;
        const double binWidth = 3.0 / bins;
        const double w1 =
            wasserstein1(value_histogram(base, bins), value_histogram(shifted, bins), binWidth);
        CHECK(std::abs(w1 - 0.5) <= binWidth);
    }
}
