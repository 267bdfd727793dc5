#include "restain/nn/graph.hpp"

#include <cmath>
#include <unordered_set>

namespace restain::nn {

Var make_param(Tensor init, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(init);
    n->name = std::move(name);
    n->requiresGrad = true;
    return Var{std::move(n)};
}

Var make_leaf(Tensor value, std::string name, bool requiresGrad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->name = std::move(name);
    n->requiresGrad = requiresGrad;
    return Var{std::move(n)};
}

void check_finite(const Tensor& t, const std::string& name) {
    for (double v : t.data)
        if (!std::isfinite(v))
            throw Error("non-finite value in " + name);
}

namespace {

// Post-order DFS (iterative; graphs are DAGs with shared subtrees).
void topo_sort(const NodePtr& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (visited.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

} // namespace

void backward(const Var& root) {
    Node* r = root.node.get();
    if (r->value.size() != 1)
        throw Error("backward requires a scalar root, got shape " + r->value.shape_str());
    if (r->backwardRun)
        throw Error("backward already run on this graph; rebuild the forward pass first");
    r->backwardRun = true;

    std::vector<Node*> order;
    topo_sort(root.node, order);

    r->grad_buf().data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backprop)
            continue;
        // By reverse-topological order this node's gradient is final here.
        check_finite(node->grad_buf(), node->name.empty() ? "gradient" : node->name + " gradient");
        node->backprop();
    }
    for (Node* node : order)
        if (node->requiresGrad && !node->backprop)
            check_finite(node->grad_buf(),
                         node->name.empty() ? "leaf gradient" : node->name + " gradient");
}

} // namespace restain::nn
