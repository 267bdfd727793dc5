#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "restain/colorspace.hpp"
#include "restain/nn/ops.hpp"

namespace restain::nn {

// Convolution layer owning its parameters. Weights start at
// uniform(-sqrt(1/fanIn), +sqrt(1/fanIn)), biases at zero.
struct Conv2d {
    Var w, b;
    int stride, pad;

    Conv2d(const std::string& name, int inC, int outC, int k, int stride_, int pad_,
           std::mt19937_64& rng);
    Var operator()(Var x) const { return conv2d(x, w, b, stride, pad, name_); }

private:
    std::string name_;
};

// Upper bounds used to squash the dye planes into [0,1] for the network
// input; concentrations above kOdClamp are rare in practice.
inline constexpr double kOdClamp = 3.0;

// The re-stainer: a two-down/two-up convolutional encoder-decoder with skip
// connections. Input is (N,3,H,W) = (L/100, clamp(H,0,3)/3, clamp(E,0,3)/3);
// output is Lab at the input resolution (L in [0,100] via sigmoid*100, a and
// b in [-127,127] via tanh*127).
class GeneratorNet {
public:
    explicit GeneratorNet(std::uint64_t seed);

    Var forward(Var x) const;
    std::vector<NodePtr> params() const;

    // Builds the normalized input tensor from raw planes. All planes must
    // share dims divisible by 4 (two stride-2 stages).
    static Tensor pack_input(const std::vector<const PlaneImage*>& L,
                             const std::vector<const PlaneImage*>& H,
                             const std::vector<const PlaneImage*>& E);

    // Single-image convenience: planes in, Lab image out (no gradients kept).
    LabImage run(const PlaneImage& L, const PlaneImage& H, const PlaneImage& E) const;

private:
    std::mt19937_64 rng_;
    Conv2d enc1_, enc2_, enc3_;
    Conv2d dec1_, dec2_, out_;
};

// Patch discriminator over normalized Lab (L/100, a/127, b/127): three
// stride-2 4x4 convs then a stride-1 4x4 conv to one sigmoid score per patch.
class DiscriminatorNet {
public:
    explicit DiscriminatorNet(std::uint64_t seed);

    // lab: raw Lab tensor (N,3,H,W); normalization happens inside.
    Var forward(Var lab) const;
    std::vector<NodePtr> params() const;

private:
    std::mt19937_64 rng_;
    Conv2d c1_, c2_, c3_, c4_;
};

} // namespace restain::nn
