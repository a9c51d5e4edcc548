#include "debias/optim.hpp"

#include <cmath>

#include "debias/errors.hpp"

namespace debias {

namespace {

void step_impl(Tensor& param, const Tensor* grad, AdamState& st, double lr) {
    if (lr <= 0.0) throw HyperparamError("adam_step: lr must be > 0");
    if (st.m.empty()) st.m = Tensor(param.shape());
    if (st.v.empty()) st.v = Tensor(param.shape());
    if (!st.m.same_shape(param) || !st.v.same_shape(param)) {
        throw ShapeError("adam_step: state shape " + shape_str(st.m.shape()) +
                         " does not match parameter " + shape_str(param.shape()));
    }
    if (grad) require_same_shape(param, *grad, "adam_step");

    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (int64_t i = 0; i < param.numel(); ++i) {
        const double g = grad ? static_cast<double>((*grad)[i]) : 0.0;
        const double m = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
        const double v = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
        st.m[i] = static_cast<float>(m);
        st.v[i] = static_cast<float>(v);
        const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + st.eps);
        param[i] = static_cast<float>(param[i] - update);
    }
}

} // namespace

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr) {
    step_impl(param, &grad, state, lr);
}

void adam_step_absent(Tensor& param, AdamState& state, double lr) {
    step_impl(param, nullptr, state, lr);
}

} // namespace debias
