#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "restain/losses.hpp"
#include "restain/nn/adam.hpp"
#include "restain/nn/checkpoint.hpp"
#include "restain/nn/network.hpp"
#include "restain/synth.hpp"

namespace restain {

struct TrainConfig {
    std::filesystem::path manifest;
    std::string styleLabel = "A";
    int epochs = 1;
    int batchSize = 4;
    int patchSize = 256;
    // 0 = one pass over the patch set per epoch; otherwise exactly this many
    // batches per epoch, cycling (and reshuffling) through the patches. Lets
    // short smoke runs keep a sane LR schedule on tiny datasets.
    int stepsPerEpoch = 0;
    std::uint64_t seed = 0;
    LossWeights weights;
    OdParams odParams;
    StainMatrix stains;
    std::filesystem::path checkpointPath;
    bool resume = false;

    void validate() const {
        if (epochs < 1)
            throw Error("train config: epochs must be >= 1");
        if (batchSize < 1)
            throw Error("train config: batch size must be >= 1");
        if (patchSize < 4 || patchSize % 4 != 0)
            throw Error("train config: patch size must be a positive multiple of 4");
        if (stepsPerEpoch < 0)
            throw Error("train config: steps per epoch must be >= 0");
        weights.validate();
        odParams.validate();
    }
};

struct StepLosses {
    double d = 0;
    double gan = 0;
    double l1 = 0;
    double staining = 0;
    double total = 0;
};

struct TrainResult {
    std::vector<StepLosses> history; // one entry per optimization step
    int epochsRun = 0;
    std::uint32_t finalEpoch = 0; // completed epochs recorded in the checkpoint
};

// Names used for generator/discriminator records plus Adam moments
// ("adam.<g|d>.<m|v>.<param>") and step counters ("adam.<g|d>.t").
nn::Checkpoint make_checkpoint(const nn::GeneratorNet& gen, const nn::DiscriminatorNet& disc,
                               const nn::Adam& genOpt, const nn::Adam& discOpt,
                               std::uint32_t epoch);

// Copies record values onto existing parameters (shapes must match).
void restore_params(const nn::Checkpoint& ck, const std::vector<nn::NodePtr>& params);
void restore_adam(const nn::Checkpoint& ck, const std::string& prefix,
                  const std::vector<nn::NodePtr>& params, nn::Adam& opt);

// Loads just the generator from a checkpoint (inference path).
nn::GeneratorNet load_generator(const std::filesystem::path& checkpointPath);

// Self-supervised adversarial training on the images of cfg.styleLabel:
// each batch takes one discriminator step on (real, detached fake) and one
// generator step on the weighted total loss, with Adam and the per-epoch
// exponential LR decay. A checkpoint is written atomically after every
// epoch. Progress goes to `log`.
TrainResult train_model(const TrainConfig& cfg, std::ostream& log);

} // namespace restain
