#pragma once

#include <cstdint>
#include <vector>

#include "restain/nn/graph.hpp"

namespace restain::nn {

// Bias-corrected Adam over a fixed parameter list, with the exponential
// per-epoch learning-rate schedule lr = baseLr * decay^epoch.
class Adam {
public:
    explicit Adam(std::vector<NodePtr> params, double baseLr = 2e-4, double beta1 = 0.5,
                  double beta2 = 0.999, double eps = 1e-8, double decay = 0.6);

    void zero_grad();
    void step(); // consumes the gradients currently on the parameters

    // Applies the schedule for the given zero-based epoch.
    void set_epoch(int epoch);

    double lr() const { return lr_; }
    std::uint64_t step_count() const { return t_; }

    // Checkpoint plumbing: moments in parameter order, shared step counter.
    const std::vector<Tensor>& moments_m() const { return m_; }
    const std::vector<Tensor>& moments_v() const { return v_; }
    void restore(std::vector<Tensor> m, std::vector<Tensor> v, std::uint64_t stepCount);

private:
    std::vector<NodePtr> params_;
    std::vector<Tensor> m_, v_;
    double baseLr_, lr_, beta1_, beta2_, eps_, decay_;
    std::uint64_t t_ = 0;
};

} // namespace restain::nn
