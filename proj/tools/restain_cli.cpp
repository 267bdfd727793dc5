#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "restain/commands.hpp"

namespace {

struct CommonOpts {
    double odI0 = 255.0;
    double odFloor = 1.0;
    std::string stainMatrixFile;

    void attach(CLI::App* cmd) {
        cmd->add_option("--od-i0", odI0, "Incident light intensity for the optical-density transform");
        cmd->add_option("--od-floor", odFloor, "Minimum transmitted intensity admitted before the log");
        cmd->add_option("--stain-matrix", stainMatrixFile,
                        "File with nine row-major floats overriding the built-in stain matrix");
    }

    restain::OdParams od_params() const {
        restain::OdParams p;
        p.i0 = odI0;
        p.floor = odFloor;
        return p;
    }

    restain::StainMatrix stains() const {
        return stainMatrixFile.empty() ? restain::StainMatrix{}
                                       : restain::StainMatrix::from_file(stainMatrixFile);
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Digital H&E re-staining toolkit: stain separation, self-supervised "
                 "re-staining, classical baselines and image-quality evaluation"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------
    restain::SynthArgs synthArgs;
    CLI::App* synth = app.add_subcommand("synth", "Generate a two-style synthetic H&E corpus");
    synth->add_option("--out", synthArgs.outDir, "Output directory")->required();
    synth->add_option("--count", synthArgs.count, "Images per style");
    synth->add_option("--width", synthArgs.width, "Image width");
    synth->add_option("--height", synthArgs.height, "Image height");
    synth->add_option("--seed", synthArgs.seed, "Corpus seed");
    synth->callback([&]() { restain::cmd_synth(synthArgs, std::cout, std::cerr); });

    // train ------------------------------------------------------------
    restain::TrainConfig trainCfg;
    CommonOpts trainCommon;
    CLI::App* train = app.add_subcommand("train", "Train the re-stainer on one style of a corpus");
    train->add_option("--data", trainCfg.manifest, "Corpus manifest (path<TAB>label lines)")
        ->required();
    train->add_option("--checkpoint", trainCfg.checkpointPath, "Checkpoint path (written per epoch)")
        ->required();
    train->add_option("--style", trainCfg.styleLabel, "Target style label");
    train->add_option("--epochs", trainCfg.epochs, "Training epochs");
    train->add_option("--batch", trainCfg.batchSize, "Batch size");
    train->add_option("--patch", trainCfg.patchSize, "Square patch size (multiple of 4)");
    train->add_option("--steps-per-epoch", trainCfg.stepsPerEpoch,
                      "Batches per epoch (0 = one pass over the data)");
    train->add_option("--seed", trainCfg.seed, "Weight-init and shuffle seed");
    train->add_option("--lambda-gan", trainCfg.weights.lambdaGan, "Adversarial loss weight");
    train->add_option("--lambda-l1", trainCfg.weights.lambdaL1, "Lab L1 loss weight");
    train->add_option("--lambda-staining", trainCfg.weights.lambdaStaining, "Staining loss weight");
    train->add_flag("--resume", trainCfg.resume, "Continue from the existing checkpoint");
    trainCommon.attach(train);
    train->callback([&]() {
        trainCfg.odParams = trainCommon.od_params();
        trainCfg.stains = trainCommon.stains();
        restain::cmd_train(trainCfg, std::cerr);
    });

    // normalize ----------------------------------------------------------
    restain::NormalizeArgs normArgs;
    CommonOpts normCommon;
    CLI::App* normalize = app.add_subcommand("normalize", "Re-stain images to a target style");
    normalize->add_option("inputs", normArgs.inputs, "Input PNG images")->required();
    normalize->add_option("--out", normArgs.outDir, "Output directory")->required();
    normalize->add_option("--method", normArgs.method, "restain, reinhard or macenko");
    normalize->add_option("--model", normArgs.model, "Trained checkpoint (method restain)");
    normalize->add_option("--target-stats", normArgs.targetStats,
                          "Lab statistics file (method reinhard)");
    normalize->add_option("--target", normArgs.targetImage,
                          "Target image (methods reinhard and macenko)");
    normalize->add_flag("--keep-l,!--no-keep-l", normArgs.keepL,
                        "Keep the input luminance plane in re-stained outputs (default on)");
    normCommon.attach(normalize);
    normalize->callback([&]() {
        normArgs.odParams = normCommon.od_params();
        normArgs.stains = normCommon.stains();
        restain::cmd_normalize(normArgs, std::cerr);
    });

    // evaluate -----------------------------------------------------------
    restain::EvaluateArgs evalArgs;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Compute quality metrics over image pairs");
    evaluate->add_option("--pairs", evalArgs.pairsManifest,
                         "Pair manifest (reference<TAB>test lines)")
        ->required();
    evaluate->add_option("--metrics", evalArgs.metrics,
                         "Metrics to compute (default: all)");
    evaluate->add_option("--out", evalArgs.outFile, "Report file (default: stdout)");
    evaluate->callback([&]() { restain::cmd_evaluate(evalArgs, std::cout, std::cerr); });

    // stability ----------------------------------------------------------
    restain::StabilityArgs stabArgs;
    CommonOpts stabCommon;
    CLI::App* stability =
        app.add_subcommand("stability", "Re-stain with scaled dye planes and summarize drift");
    stability->add_option("--image", stabArgs.image, "Input image")->required();
    stability->add_option("--model", stabArgs.model, "Trained checkpoint")->required();
    stability->add_option("--out", stabArgs.outDir, "Output directory")->required();
    stability->add_option("--coefficients", stabArgs.coefficients,
                          "Dye multiplication coefficients");
    stabCommon.attach(stability);
    stability->callback([&]() {
        stabArgs.odParams = stabCommon.od_params();
        stabArgs.stains = stabCommon.stains();
        restain::cmd_stability(stabArgs, std::cout, std::cerr);
    });

    // histcmp ------------------------------------------------------------
    restain::HistcmpArgs histArgs;
    CommonOpts histCommon;
    CLI::App* histcmp =
        app.add_subcommand("histcmp", "Compare dye-intensity histograms of two images");
    histcmp->add_option("imageA", histArgs.imageA, "First image")->required();
    histcmp->add_option("imageB", histArgs.imageB, "Second image")->required();
    histcmp->add_option("--bins", histArgs.bins, "Histogram bin count");
    histCommon.attach(histcmp);
    histcmp->callback([&]() {
        histArgs.odParams = histCommon.od_params();
        histArgs.stains = histCommon.stains();
        restain::cmd_histcmp(histArgs, std::cout, std::cerr);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const restain::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
