#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "restain/nn/tensor.hpp"

namespace restain::nn {

// One recorded step of a forward pass. Ops allocate a Node per output,
// remembering their inputs and a closure that scatters the node's gradient
// back into them. Gradients are allocated lazily so inference-only graphs
// never pay for them.
class Node {
public:
    Tensor value;
    Tensor grad; // empty until grad_buf() is first called
    std::string name;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void()> backprop; // unset on leaves
    bool requiresGrad = false;
    bool backwardRun = false; // set on the root once backward() completes

    Tensor& grad_buf() {
        if (grad.data.empty())
            grad = Tensor(value.n, value.c, value.h, value.w);
        return grad;
    }

    bool has_grad() const { return !grad.data.empty(); }
};

using NodePtr = std::shared_ptr<Node>;

// Cheap handle; ops take and return Vars by value.
struct Var {
    NodePtr node;

    const Tensor& val() const { return node->value; }
    Tensor& grad() { return node->grad_buf(); }
    bool has_grad() const { return node->has_grad(); }
};

// Trainable leaf: gradients accumulate here across backward() calls until
// zeroed by the optimizer.
Var make_param(Tensor init, std::string name);

// Non-trainable leaf (inputs, targets, constants). Set requiresGrad to get
// d(loss)/d(leaf) anyway, e.g. for finite-difference checks.
Var make_leaf(Tensor value, std::string name = "leaf", bool requiresGrad = false);

// Reverse-mode sweep from a scalar (1x1x1x1) root. Every leaf with
// requiresGrad reachable from the root receives its gradient. Calling it a
// second time on the same root is an error: rebuild the forward pass first.
// A non-finite gradient aborts with the offending node's name.
void backward(const Var& root);

// Throws Error("non-finite value in <name>") if t contains NaN or Inf.
void check_finite(const Tensor& t, const std::string& name);

} // namespace restain::nn
