#pragma once

#include "restain/diffcolor.hpp"
#include "restain/nn/ops.hpp"
#include "restain/stainsep.hpp"

namespace restain {

struct LossWeights {
    double lambdaGan = 0.1;
    double lambdaL1 = 1.0;
    double lambdaStaining = 1.0;

    void validate() const {
        if (lambdaGan < 0 || lambdaL1 < 0 || lambdaStaining < 0)
            throw Error("loss weights must be >= 0");
    }
};

// Binary cross-entropy GAN losses over sigmoid patch scores. Scores are
// clamped to [1e-7, 1-1e-7] before the log. The generator form is
// non-saturating: -mean(log fake).
nn::Var gan_loss_d(nn::Var realScores, nn::Var fakeScores);
nn::Var gan_loss_g(nn::Var fakeScores);

// Mean absolute difference over all pixels and the three Lab channels.
nn::Var l1_lab_loss(nn::Var predLab, const nn::Tensor& targetLab);

// Recovers dye planes from the predicted Lab via the differentiable
// Lab -> RGB -> OD -> concentration chain (negatives rectified) and takes
// the mean over both planes of the per-plane mean absolute difference to
// the network's input dyes.
nn::Var staining_loss(nn::Var predLab, const nn::Tensor& targetH, const nn::Tensor& targetE,
                      const StainMatrix& sm = {}, const OdParams& odp = {});

// w.lambdaGan * ganG + w.lambdaL1 * l1 + w.lambdaStaining * staining.
nn::Var total_loss(nn::Var ganG, nn::Var l1, nn::Var staining, const LossWeights& w = {});

} // namespace restain
