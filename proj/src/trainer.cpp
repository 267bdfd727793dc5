#include "restain/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "restain/colorspace.hpp"
#include "restain/png_io.hpp"

namespace restain {

using nn::Tensor;
using nn::Var;

nn::Checkpoint make_checkpoint(const nn::GeneratorNet& gen, const nn::DiscriminatorNet& disc,
                               const nn::Adam& genOpt, const nn::Adam& discOpt,
                               std::uint32_t epoch) {
    nn::Checkpoint ck;
    ck.epoch = epoch;
    auto addParams = [&ck](const std::vector<nn::NodePtr>& params) {
        for (const nn::NodePtr& p : params)
            ck.records.emplace_back(p->name, p->value);
    };
    auto addAdam = [&ck](const std::string& prefix, const std::vector<nn::NodePtr>& params,
                         const nn::Adam& opt) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            ck.records.emplace_back(prefix + ".m." + params[i]->name, opt.moments_m()[i]);
            ck.records.emplace_back(prefix + ".v." + params[i]->name, opt.moments_v()[i]);
        }
        Tensor t(1, 1, 1, 1);
        t.data[0] = static_cast<double>(opt.step_count());
        ck.records.emplace_back(prefix + ".t", std::move(t));
    };
    addParams(gen.params());
    addParams(disc.params());
    addAdam("adam.g", gen.params(), genOpt);
    addAdam("adam.d", disc.params(), discOpt);
    return ck;
}

void restore_params(const nn::Checkpoint& ck, const std::vector<nn::NodePtr>& params) {
    for (const nn::NodePtr& p : params) {
        const Tensor& saved = ck.find(p->name);
        if (!saved.same_shape(p->value))
            throw Error("checkpoint record " + p->name + " has shape " + saved.shape_str() +
                        ", expected " + p->value.shape_str());
        p->value = saved;
    }
}

void restore_adam(const nn::Checkpoint& ck, const std::string& prefix,
                  const std::vector<nn::NodePtr>& params, nn::Adam& opt) {
    std::vector<Tensor> m, v;
    m.reserve(params.size());
    v.reserve(params.size());
    for (const nn::NodePtr& p : params) {
        m.push_back(ck.find(prefix + ".m." + p->name));
        v.push_back(ck.find(prefix + ".v." + p->name));
    }
    const double t = ck.find(prefix + ".t").data[0];
    opt.restore(std::move(m), std::move(v), static_cast<std::uint64_t>(std::llround(t)));
}

nn::GeneratorNet load_generator(const std::filesystem::path& checkpointPath) {
    const nn::Checkpoint ck = nn::load_checkpoint(checkpointPath);
    nn::GeneratorNet gen(0);
    restore_params(ck, gen.params());
    return gen;
}

namespace {

// One training example: network-input planes plus reconstruction targets.
struct PatchData {
    PlaneImage L, H, E;
    PlaneImage labL, labA, labB; // raw Lab of the original patch
};

std::vector<PatchData> load_patches(const TrainConfig& cfg) {
    const std::vector<ManifestEntry> entries = read_manifest(cfg.manifest);
    std::vector<PatchData> patches;
    int domainImages = 0;
    for (const ManifestEntry& e : entries) {
        if (e.label != cfg.styleLabel)
            continue;
        ++domainImages;
        const RgbImage img = load_png(e.path);
        for (const RgbImage& patch : extract_patches(img, cfg.patchSize)) {
            PatchData p;
            const LabImage lab = rgb_to_lab(patch);
            p.L = lab.L;
            p.labL = lab.L;
            p.labA = lab.a;
            p.labB = lab.b;
            auto [h, eP] = extract_he(patch, cfg.stains, cfg.odParams);
            p.H = std::move(h);
            p.E = std::move(eP);
            patches.push_back(std::move(p));
        }
    }
    if (domainImages == 0)
        throw Error("no images labeled '" + cfg.styleLabel + "' in " + cfg.manifest.string());
    if (patches.empty())
        throw Error("images labeled '" + cfg.styleLabel + "' are smaller than the patch size " +
                    std::to_string(cfg.patchSize));
    return patches;
}

Tensor pack_planes3(const std::vector<const PatchData*>& batch, const PlaneImage PatchData::*p0,
                    const PlaneImage PatchData::*p1, const PlaneImage PatchData::*p2) {
    const int w = (batch[0]->*p0).width, h = (batch[0]->*p0).height;
    Tensor t(static_cast<int>(batch.size()), 3, h, w);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const PlaneImage* planes[3] = {&(batch[n]->*p0), &(batch[n]->*p1), &(batch[n]->*p2)};
        for (int c = 0; c < 3; ++c)
            std::copy(planes[c]->data.begin(), planes[c]->data.end(),
                      t.row(static_cast<int>(n), c, 0));
    }
    return t;
}

Tensor pack_plane1(const std::vector<const PatchData*>& batch, const PlaneImage PatchData::*p) {
    const int w = (batch[0]->*p).width, h = (batch[0]->*p).height;
    Tensor t(static_cast<int>(batch.size()), 1, h, w);
    for (std::size_t n = 0; n < batch.size(); ++n)
        std::copy((batch[n]->*p).data.begin(), (batch[n]->*p).data.end(),
                  t.row(static_cast<int>(n), 0, 0));
    return t;
}

} // namespace

TrainResult train_model(const TrainConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (cfg.checkpointPath.empty())
        throw Error("train config: checkpoint path is required");

    nn::GeneratorNet gen(cfg.seed);
    nn::DiscriminatorNet disc(cfg.seed + 1);
    nn::Adam genOpt(gen.params());
    nn::Adam discOpt(disc.params());

    std::uint32_t startEpoch = 0;
    if (cfg.resume) {
        const nn::Checkpoint ck = nn::load_checkpoint(cfg.checkpointPath);
        restore_params(ck, gen.params());
        restore_params(ck, disc.params());
        restore_adam(ck, "adam.g", gen.params(), genOpt);
        restore_adam(ck, "adam.d", disc.params(), discOpt);
        startEpoch = ck.epoch;
        log << "resumed from " << cfg.checkpointPath.string() << " after epoch " << startEpoch
            << "\n";
    }

    const std::vector<PatchData> patches = load_patches(cfg);
    log << "training on " << patches.size() << " patches of " << cfg.patchSize << "x"
        << cfg.patchSize << " (style " << cfg.styleLabel << ")\n";

    std::mt19937_64 shuffleRng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(patches.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = 0;
    auto next_batch = [&]() {
        std::vector<const PatchData*> batch;
        batch.reserve(cfg.batchSize);
        for (int i = 0; i < cfg.batchSize; ++i) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), shuffleRng);
                cursor = 0;
                if (i > 0)
                    break; // plain passes end on the partial batch
            }
            batch.push_back(&patches[order[cursor++]]);
        }
        return batch;
    };
    cursor = order.size(); // force the initial shuffle

    TrainResult result;
    result.finalEpoch = startEpoch;
    const int stepsPerEpoch =
        cfg.stepsPerEpoch > 0
            ? cfg.stepsPerEpoch
            : static_cast<int>((patches.size() + cfg.batchSize - 1) / cfg.batchSize);

    std::size_t globalStep = 0;
    for (std::uint32_t epoch = startEpoch; epoch < static_cast<std::uint32_t>(cfg.epochs);
         ++epoch) {
        genOpt.set_epoch(static_cast<int>(epoch));
        discOpt.set_epoch(static_cast<int>(epoch));
        if (cfg.stepsPerEpoch == 0)
            cursor = order.size(); // fresh shuffled pass per epoch

        for (int step = 0; step < stepsPerEpoch; ++step, ++globalStep) {
            const std::vector<const PatchData*> batch = next_batch();
            StepLosses losses;
            try {
                std::vector<const PlaneImage*> Ls, Hs, Es;
                for (const PatchData* p : batch) {
                    Ls.push_back(&p->L);
                    Hs.push_back(&p->H);
                    Es.push_back(&p->E);
                }
                Var input = nn::make_leaf(nn::GeneratorNet::pack_input(Ls, Hs, Es), "gen_input");
                Var predLab = gen.forward(input);

                const Tensor targetLab =
                    pack_planes3(batch, &PatchData::labL, &PatchData::labA, &PatchData::labB);
                const Tensor targetH = pack_plane1(batch, &PatchData::H);
                const Tensor targetE = pack_plane1(batch, &PatchData::E);

                // Discriminator step on real vs detached fake.
                Var real = nn::make_leaf(targetLab, "disc_real");
                Var fakeDetached = nn::make_leaf(predLab.val(), "disc_fake");
                Var dLoss = gan_loss_d(disc.forward(real), disc.forward(fakeDetached));
                discOpt.zero_grad();
                nn::backward(dLoss);
                discOpt.step();
                losses.d = dLoss.val().data[0];

                // Generator step against the just-updated discriminator.
                Var ganG = gan_loss_g(disc.forward(predLab));
                Var l1 = l1_lab_loss(predLab, targetLab);
                Var st = staining_loss(predLab, targetH, targetE, cfg.stains, cfg.odParams);
                Var tot = total_loss(ganG, l1, st, cfg.weights);
                genOpt.zero_grad();
                discOpt.zero_grad(); // gradients through D are discarded
                nn::backward(tot);
                genOpt.step();

                losses.gan = ganG.val().data[0];
                losses.l1 = l1.val().data[0];
                losses.staining = st.val().data[0];
                losses.total = tot.val().data[0];
                if (!std::isfinite(losses.total) || !std::isfinite(losses.d))
                    throw Error("loss is not finite");
            } catch (const Error& e) {
                throw Error("training aborted at step " + std::to_string(globalStep) + ": " +
                            e.what());
            }

            result.history.push_back(losses);
            log << "epoch " << epoch << " step " << globalStep << " lr " << genOpt.lr()
                << " d " << losses.d << " gan " << losses.gan << " l1 " << losses.l1
                << " stain " << losses.staining << " total " << losses.total << "\n";
        }

        save_checkpoint(make_checkpoint(gen, disc, genOpt, discOpt, epoch + 1),
                        cfg.checkpointPath);
        ++result.epochsRun;
        result.finalEpoch = epoch + 1;
        log << "epoch " << epoch << " done; checkpoint written to " << cfg.checkpointPath.string()
            << "\n";
    }

    if (result.epochsRun == 0)
        log << "nothing to do: checkpoint already at epoch " << startEpoch << " of "
            << cfg.epochs << "\n";
    return result;
}

} // namespace restain
