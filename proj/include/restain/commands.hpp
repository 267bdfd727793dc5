#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "restain/baselines.hpp"
#include "restain/metrics.hpp"
#include "restain/trainer.hpp"

namespace restain {

// Bad arguments (the CLI maps this to exit code 2, runtime Error to 1).
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(what) {}
};

struct SynthArgs {
    std::filesystem::path outDir;
    int count = 20; // images per style
    int width = 256;
    int height = 256;
    std::uint64_t seed = 0;
};

// Writes 2*count synthetic PNGs plus the manifest; prints the manifest path.
void cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

// Validates cfg (throwing UsageError) before delegating to train_model.
TrainResult cmd_train(const TrainConfig& cfg, std::ostream& err);

struct NormalizeArgs {
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path outDir;
    std::string method = "restain"; // restain | reinhard | macenko
    std::filesystem::path model;       // restain: checkpoint
    std::filesystem::path targetStats; // reinhard: Lab stats file
    std::filesystem::path targetImage; // reinhard/macenko: derive target from an image
    bool keepL = true;                 // restain: copy the input L plane to the output
    OdParams odParams;
    StainMatrix stains;
};

// Writes one output PNG per input (same file name) into outDir; never
// touches the inputs. Returns the output paths in input order.
std::vector<std::filesystem::path> cmd_normalize(const NormalizeArgs& args, std::ostream& err);

struct EvaluateArgs {
    std::filesystem::path pairsManifest; // lines: reference<TAB>test
    std::vector<std::string> metrics;    // empty = every metric
    std::filesystem::path outFile;       // empty = stdout
};

MetricReport cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);

struct StabilityArgs {
    std::filesystem::path image;
    std::filesystem::path model;
    std::vector<double> coefficients = {0.6, 0.9, 1.0, 1.1, 1.2};
    std::filesystem::path outDir;
    OdParams odParams;
    StainMatrix stains;
};

struct StabilityRow {
    double coefficient = 0;
    double meanLabDistance = 0; // to the coefficient-1.0 output
    std::filesystem::path outputPath;
};

// Scales the dye planes by each coefficient, re-stains, saves each output
// and summarizes the mean per-pixel Lab distance to the unscaled output.
std::vector<StabilityRow> cmd_stability(const StabilityArgs& args, std::ostream& out,
                                        std::ostream& err);

struct HistcmpArgs {
    std::filesystem::path imageA;
    std::filesystem::path imageB;
    int bins = 64;
    OdParams odParams;
    StainMatrix stains;
};

struct HistcmpResult {
    std::vector<double> histHA, histHB, histEA, histEB; // normalized, `bins` entries
    double w1H = 0, w1E = 0;
};

// Compares the dye-intensity distributions of two images over OD [0,3].
HistcmpResult cmd_histcmp(const HistcmpArgs& args, std::ostream& out, std::ostream& err);

// Normalized histogram of plane values over [lo, hi); out-of-range values
// land in the edge bins.
std::vector<double> value_histogram(const PlaneImage& plane, int bins, double lo = 0.0,
                                    double hi = 3.0);

// Earth-mover distance between two normalized 1-D histograms with the given
// bin width (sum of absolute CDF differences times the width).
double wasserstein1(const std::vector<double>& a, const std::vector<double>& b, double binWidth);

} // namespace restain
