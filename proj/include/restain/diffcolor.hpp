#pragma once

#include "restain/colorspace.hpp"
#include "restain/nn/ops.hpp"
#include "restain/stainsep.hpp"

namespace restain {

// Differentiable counterparts of the scalar colour/stain transforms, built
// on the same helper functions so forward values agree with the image-level
// pipeline exactly.

// Lab tensor (N,3,H,W) -> continuous RGB on the 0..255 scale (no clamp, no
// quantization; out-of-gamut values pass through).
nn::Var lab_to_rgb255(nn::Var lab);

// Minimum transmitted light admitted before the log in the differentiable
// chain. Much smaller than the image-level floor so gradients survive on
// near-black predictions instead of flatlining at OD(floor).
inline constexpr double kDiffOdFloor = 1e-6;

// RGB tensor (0..255 scale) -> OD planes via od = ln(i0) - ln(max(v, floor)).
nn::Var od_from_rgb255(nn::Var rgb, const OdParams& p = {});

// OD (N,3,H,W) -> concentration channels (H, E, residual), no clamping.
nn::Var concentrations_from_od(nn::Var od, const StainMatrix& sm = {});

} // namespace restain
