#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "debias/tensor.hpp"

namespace debias {

using NodeId = int32_t;

// Reverse-mode autodiff on a Wengert list. A Tape is built by one forward
// pass and consumed by one backward() call; nodes only ever reference
// earlier nodes, so reverse creation order is a valid reverse-topological
// order. A tape is confined to a single thread; the kernels it calls may
// parallelize internally over disjoint output slices, which keeps results
// independent of the thread count.
class Tape {
public:
    // Inserts a tensor as a graph input. Parameters pass requires_grad=true.
    NodeId leaf(Tensor value, bool requires_grad = false);
    NodeId constant(Tensor value) { return leaf(std::move(value), false); }

    // y[n,co] = bias[co] + cross-correlation of x[n] with weight[co].
    // x: [N,Cin,H,W], weight: [Cout,Cin,kh,kw], bias: [Cout].
    NodeId conv2d(NodeId x, NodeId weight, NodeId bias, int stride, int padding);

    // Adjoint of conv2d (zero bias): <conv2d(x,w), y> == <x, conv_transpose2d(y,w)>.
    // x: [N,Cin,H,W], weight: [Cin,Cout,kh,kw], bias: [Cout].
    NodeId conv_transpose2d(NodeId x, NodeId weight, NodeId bias, int stride, int padding);

    // y = x W^T + b. x: [N,Din], W: [Dout,Din], b: [Dout].
    NodeId dense(NodeId x, NodeId weight, NodeId bias);

    NodeId relu(NodeId x);
    NodeId leaky_relu(NodeId x, float alpha);
    NodeId sigmoid(NodeId x);
    // Max-subtraction stabilized; rows along `axis` sum to 1.
    NodeId softmax(NodeId x, int axis);

    NodeId reshape(NodeId x, std::vector<int> new_shape);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    NodeId sum_all(NodeId a);

    // Mean over all elements of (a-b)^2; scalar output.
    NodeId mse_loss(NodeId a, NodeId b);
    // Mean over rows of -log softmax(logits)[label], via log-sum-exp.
    NodeId cross_entropy_loss(NodeId logits, const std::vector<int>& labels);

    // Seeds d(loss)/d(loss)=1 and propagates to every reachable node that
    // needs a gradient. Callable once per tape; loss must be scalar.
    void backward(NodeId loss);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    // True when backward() deposited a gradient (parameter reachable from the loss).
    bool has_grad(NodeId id) const { return !nodes_[static_cast<size_t>(id)].grad.empty(); }
    const Tensor& grad(NodeId id) const;

    // Loss values are accumulated in 64-bit; this returns that exact value
    // for loss nodes and the widened float value otherwise.
    double scalar_value(NodeId id) const;

    size_t size() const { return nodes_.size(); }
    bool needs_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

private:
    struct Node {
        Tensor value;
        Tensor grad; // empty until a gradient is accumulated
        std::function<void(Tape&)> back;
        bool needs_grad = false;
        bool has_exact = false;
        double exact = 0.0;
    };

    NodeId push(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
    Tensor& grad_buf(NodeId id);
    void set_exact(NodeId id, double v);

    std::vector<Node> nodes_;
    bool backward_ran_ = false;
};

} // namespace debias
