#include "restain/nn/network.hpp"

#include <algorithm>
#include <cmath>

namespace restain::nn {

Conv2d::Conv2d(const std::string& name, int inC, int outC, int k, int stride_, int pad_,
               std::mt19937_64& rng)
    : stride(stride_), pad(pad_), name_(name) {
    Tensor wt(outC, inC, k, k);
    const double bound = std::sqrt(1.0 / (inC * k * k));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : wt.data)
        v = dist(rng);
    w = make_param(std::move(wt), name + ".w");
    b = make_param(Tensor(1, outC, 1, 1), name + ".b");
}

GeneratorNet::GeneratorNet(std::uint64_t seed)
    : rng_(seed),
      enc1_("gen.enc1", 3, 16, 3, 1, 1, rng_),
      enc2_("gen.enc2", 16, 32, 3, 2, 1, rng_),
      enc3_("gen.enc3", 32, 64, 3, 2, 1, rng_),
      dec1_("gen.dec1", 64, 32, 3, 1, 1, rng_),
      dec2_("gen.dec2", 64, 16, 3, 1, 1, rng_),
      out_("gen.out", 32, 3, 3, 1, 1, rng_) {}

Var GeneratorNet::forward(Var x) const {
    const Tensor& xv = x.val();
    if (xv.c != 3)
        throw Error("generator input must have 3 channels, got " + std::to_string(xv.c));
    if (xv.h % 4 != 0 || xv.w % 4 != 0)
        throw Error("generator input dims " + std::to_string(xv.w) + "x" + std::to_string(xv.h) +
                    " must be divisible by 4; pad or crop the image first");

    Var e1 = leaky_relu(enc1_(x));
    Var e2 = leaky_relu(enc2_(e1));
    Var e3 = leaky_relu(enc3_(e2));

    Var d1 = leaky_relu(dec1_(upsample2(e3)));
    Var d2 = leaky_relu(dec2_(upsample2(concat_c(d1, e2))));
    Var o = out_(concat_c(d2, e1));

    Var L = mul_scalar(sigmoid(select_channel(o, 0)), 100.0);
    Var a = mul_scalar(tanh_act(select_channel(o, 1)), 127.0);
    Var bb = mul_scalar(tanh_act(select_channel(o, 2)), 127.0);
    return stack3(L, a, bb);
}

std::vector<NodePtr> GeneratorNet::params() const {
    std::vector<NodePtr> p;
    for (const Conv2d* c : {&enc1_, &enc2_, &enc3_, &dec1_, &dec2_, &out_}) {
        p.push_back(c->w.node);
        p.push_back(c->b.node);
    }
    return p;
}

Tensor GeneratorNet::pack_input(const std::vector<const PlaneImage*>& L,
                                const std::vector<const PlaneImage*>& H,
                                const std::vector<const PlaneImage*>& E) {
    if (L.empty() || L.size() != H.size() || L.size() != E.size())
        throw Error("pack_input: plane lists must be non-empty and equally sized");
    const int w = L[0]->width, h = L[0]->height;
    Tensor x(static_cast<int>(L.size()), 3, h, w);
    for (std::size_t n = 0; n < L.size(); ++n) {
        const PlaneImage* planes[3] = {L[n], H[n], E[n]};
        for (int c = 0; c < 3; ++c) {
            if (planes[c]->width != w || planes[c]->height != h)
                throw Error("pack_input: plane dims differ within the batch");
            const std::vector<double>& src = planes[c]->data;
            double* dst = x.row(static_cast<int>(n), c, 0);
            if (c == 0)
                for (std::size_t i = 0; i < src.size(); ++i)
                    dst[i] = src[i] / 100.0;
            else
                for (std::size_t i = 0; i < src.size(); ++i)
                    dst[i] = std::clamp(src[i], 0.0, kOdClamp) / kOdClamp;
        }
    }
    return x;
}

LabImage GeneratorNet::run(const PlaneImage& L, const PlaneImage& H, const PlaneImage& E) const {
    Var x = make_leaf(pack_input({&L}, {&H}, {&E}), "gen_input");
    Var out = forward(x);
    const Tensor& o = out.val();
    LabImage lab(o.w, o.h);
    const std::size_t plane = static_cast<std::size_t>(o.h) * o.w;
    lab.L.data.assign(o.row(0, 0, 0), o.row(0, 0, 0) + plane);
    lab.a.data.assign(o.row(0, 1, 0), o.row(0, 1, 0) + plane);
    lab.b.data.assign(o.row(0, 2, 0), o.row(0, 2, 0) + plane);
    return lab;
}

DiscriminatorNet::DiscriminatorNet(std::uint64_t seed)
    : rng_(seed),
      c1_("disc.c1", 3, 16, 4, 2, 1, rng_),
      c2_("disc.c2", 16, 32, 4, 2, 1, rng_),
      c3_("disc.c3", 32, 64, 4, 2, 1, rng_),
      c4_("disc.c4", 64, 1, 4, 1, 1, rng_) {}

Var DiscriminatorNet::forward(Var lab) const {
    static constexpr std::array<double, 9> kNorm = {1.0 / 100.0, 0, 0,
                                                    0, 1.0 / 127.0, 0,
                                                    0, 0, 1.0 / 127.0};
    Var x = channel_matmul3(lab, kNorm, "disc.norm");
    Var h1 = leaky_relu(c1_(x));
    Var h2 = leaky_relu(c2_(h1));
    Var h3 = leaky_relu(c3_(h2));
    return sigmoid(c4_(h3));
}

std::vector<NodePtr> DiscriminatorNet::params() const {
    std::vector<NodePtr> p;
    for (const Conv2d* c : {&c1_, &c2_, &c3_, &c4_}) {
        p.push_back(c->w.node);
        p.push_back(c->b.node);
    }
    return p;
}

} // namespace restain::nn
