#pragma once

#include <array>
#include <functional>
#include <string>

#include "restain/nn/graph.hpp"

namespace restain::nn {

// Zero-padded 2-D convolution. w has shape (outC, inC, k, k) in NCHW order,
// b has shape (1, outC, 1, 1).
Var conv2d(Var x, Var w, Var b, int stride, int pad, const std::string& name);

Var leaky_relu(Var x, double slope = 0.2);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh_act(Var x);

// Nearest-neighbour 2x upsampling.
Var upsample2(Var x);

// Concatenate along the channel axis; batch and spatial dims must match.
Var concat_c(Var a, Var b);

// Elementwise arithmetic on equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_scalar(Var x, double k);
Var mul_scalar(Var x, double k);
Var abs_val(Var x);           // d|x|/dx at 0 taken as 0
Var log_val(Var x);           // natural log; inputs must be positive
Var clamp_val(Var x, double lo, double hi); // gradient 1 strictly inside, else 0

// Pointwise map with caller-supplied value and derivative functions
// (used for the piecewise colour-transfer curves).
Var unary_map(Var x, std::function<double(double)> f, std::function<double(double)> dfdx,
              const std::string& name);

// Per-pixel 3x3 channel mix: out[k] = sum_j m[k*3+j] * x[j]. x must have 3 channels.
Var channel_matmul3(Var x, const std::array<double, 9>& m, const std::string& name);

Var select_channel(Var x, int channel);     // -> (N,1,H,W)
Var stack3(Var c0, Var c1, Var c2);         // three (N,1,H,W) -> (N,3,H,W)

Var mean_all(Var x); // -> scalar (1,1,1,1)
Var sum_all(Var x);  // -> scalar (1,1,1,1)

} // namespace restain::nn
