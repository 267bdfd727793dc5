#include "restain/nn/adam.hpp"

#include <cmath>

namespace restain::nn {

Adam::Adam(std::vector<NodePtr> params, double baseLr, double beta1, double beta2, double eps,
           double decay)
    : params_(std::move(params)), baseLr_(baseLr), lr_(baseLr), beta1_(beta1), beta2_(beta2),
      eps_(eps), decay_(decay) {
    if (baseLr_ <= 0)
        throw Error("Adam: learning rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const NodePtr& p : params_) {
        const Tensor& t = p->value;
        m_.emplace_back(t.n, t.c, t.h, t.w);
        v_.emplace_back(t.n, t.c, t.h, t.w);
    }
}

void Adam::zero_grad() {
    for (const NodePtr& p : params_) {
        Tensor& g = p->grad_buf();
        std::fill(g.data.begin(), g.data.end(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i]->value;
        const Tensor& g = params_[i]->grad_buf();
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m.data[k] = beta1_ * m.data[k] + (1.0 - beta1_) * g.data[k];
            v.data[k] = beta2_ * v.data[k] + (1.0 - beta2_) * g.data[k] * g.data[k];
            const double mhat = m.data[k] / c1;
            const double vhat = v.data[k] / c2;
            p.data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        check_finite(p, params_[i]->name + " after Adam step");
    }
}

void Adam::set_epoch(int epoch) {
    if (epoch < 0)
        throw Error("Adam: epoch must be >= 0");
    lr_ = baseLr_ * std::pow(decay_, epoch);
}

void Adam::restore(std::vector<Tensor> m, std::vector<Tensor> v, std::uint64_t stepCount) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw Error("Adam: restored moment count does not match parameter count");
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (!m[i].same_shape(params_[i]->value) || !v[i].same_shape(params_[i]->value))
            throw Error("Adam: restored moment shape mismatch for " + params_[i]->name);
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = stepCount;
}

} // namespace restain::nn
