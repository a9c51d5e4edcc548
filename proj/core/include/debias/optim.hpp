#pragma once

#include <cstdint>

#include "debias/tensor.hpp"

namespace debias {

// Per-parameter Adam accumulators. m and v are sized lazily on the first
// step so a fresh state can be declared before the parameter exists.
struct AdamState {
    Tensor m, v;
    int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update:
//   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;  t <- t+1
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr);

// Same update with an absent gradient (parameter unreachable from the loss
// this step): the gradient is zero, moments decay, and t still advances so
// bias correction stays aligned across parameters.
void adam_step_absent(Tensor& param, AdamState& state, double lr);

} // namespace debias
