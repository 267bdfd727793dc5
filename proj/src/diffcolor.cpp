#include "restain/diffcolor.hpp"

#include <cmath>

namespace restain {

using nn::Var;

Var lab_to_rgb255(Var lab) {
    using namespace color;
    Var L = nn::select_channel(lab, 0);
    Var a = nn::select_channel(lab, 1);
    Var b = nn::select_channel(lab, 2);

    Var fy = nn::mul_scalar(nn::add_scalar(L, 16.0), 1.0 / 116.0);
    Var fx = nn::add(fy, nn::mul_scalar(a, 1.0 / 500.0));
    Var fz = nn::sub(fy, nn::mul_scalar(b, 1.0 / 200.0));

    auto finv = [](Var t, double white, const char* name) {
        return nn::mul_scalar(nn::unary_map(t, lab_finv, lab_finv_deriv, name), white);
    };
    Var x = finv(fx, kWhiteX, "lab_finv_x");
    Var y = finv(fy, kWhiteY, "lab_finv_y");
    Var z = finv(fz, kWhiteZ, "lab_finv_z");

    Var linear = nn::channel_matmul3(nn::stack3(x, y, z), kXyzToSrgb, "xyz_to_linear_rgb");
    Var encoded = nn::unary_map(linear, linear_to_srgb, linear_to_srgb_deriv, "linear_to_srgb");
    return nn::mul_scalar(encoded, 255.0);
}

Var od_from_rgb255(Var rgb, const OdParams& p) {
    p.validate();
    const double logI0 = std::log(p.i0);
    auto od = [logI0](double v) { return logI0 - std::log(std::max(v, kDiffOdFloor)); };
    auto dod = [](double v) { return v > kDiffOdFloor ? -1.0 / v : 0.0; };
    return nn::unary_map(rgb, od, dod, "od_from_rgb");
}

Var concentrations_from_od(Var od, const StainMatrix& sm) {
    // Concentration row vector A = y * M^-1, i.e. A_j = sum_c y_c * inv(c,j);
    // as a channel mix that is multiplication by the transposed inverse.
    const std::array<double, 9>& inv = sm.inverse();
    const std::array<double, 9> invT = {inv[0], inv[3], inv[6],
                                        inv[1], inv[4], inv[7],
                                        inv[2], inv[5], inv[8]};
    return nn::channel_matmul3(od, invT, "od_to_concentration");
}

} // namespace restain
