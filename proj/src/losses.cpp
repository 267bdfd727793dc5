#include "restain/losses.hpp"

namespace restain {

using nn::Var;

namespace {

constexpr double kScoreClamp = 1e-7;

Var neg_mean_log(Var scores) {
    return nn::mul_scalar(nn::mean_all(nn::log_val(nn::clamp_val(scores, kScoreClamp, 1.0 - kScoreClamp))),
                          -1.0);
}

Var one_minus(Var x) {
    return nn::add_scalar(nn::mul_scalar(x, -1.0), 1.0);
}

} // namespace

Var gan_loss_d(Var realScores, Var fakeScores) {
    return nn::add(neg_mean_log(realScores), neg_mean_log(one_minus(fakeScores)));
}

Var gan_loss_g(Var fakeScores) {
    return neg_mean_log(fakeScores);
}

Var l1_lab_loss(Var predLab, const nn::Tensor& targetLab) {
    Var target = nn::make_leaf(targetLab, "l1_target");
    return nn::mean_all(nn::abs_val(nn::sub(predLab, target)));
}

Var staining_loss(Var predLab, const nn::Tensor& targetH, const nn::Tensor& targetE,
                  const StainMatrix& sm, const OdParams& odp) {
    Var rgb = lab_to_rgb255(predLab);
    Var conc = concentrations_from_od(od_from_rgb255(rgb, odp), sm);
    Var predH = nn::relu(nn::select_channel(conc, 0));
    Var predE = nn::relu(nn::select_channel(conc, 1));

    Var lossH = nn::mean_all(nn::abs_val(nn::sub(predH, nn::make_leaf(targetH, "dye_target_h"))));
    Var lossE = nn::mean_all(nn::abs_val(nn::sub(predE, nn::make_leaf(targetE, "dye_target_e"))));
    return nn::mul_scalar(nn::add(lossH, lossE), 0.5);
}

Var total_loss(Var ganG, Var l1, Var staining, const LossWeights& w) {
    w.validate();
    return nn::add(nn::add(nn::mul_scalar(ganG, w.lambdaGan), nn::mul_scalar(l1, w.lambdaL1)),
                   nn::mul_scalar(staining, w.lambdaStaining));
}

} // namespace restain
