#include <cmath>

#include "debias/errors.hpp"
#include "debias/optim.hpp"
#include "doctest.h"

using debias::AdamState;
using debias::Tensor;

TEST_CASE("first step with unit gradient moves by about lr") {
    Tensor p = Tensor::scalar(1.0f);
    Tensor g = Tensor::scalar(1.0f);
    AdamState st;
    debias::adam_step(p, g, st, 0.001);
    // m_hat = v_hat = 1 after bias correction, so delta ~ -lr.
    CHECK(p[0] == doctest::Approx(0.999f).epsilon(1e-6));
    CHECK(st.t == 1);
}

TEST_CASE("two identical steps keep the bias-corrected ratio near one") {
    Tensor p = Tensor::scalar(1.0f);
    Tensor g = Tensor::scalar(1.0f);
    AdamState st;
    debias::adam_step(p, g, st, 0.001);
    debias::adam_step(p, g, st, 0.001);
    CHECK(p[0] == doctest::Approx(0.998f).epsilon(1e-5));
    CHECK(st.t == 2);
}

TEST_CASE("zero gradient from a fresh state leaves parameters unchanged") {
    Tensor p = Tensor::full({3}, 2.0f);
    Tensor g({3});
    AdamState st;
    debias::adam_step(p, g, st, 0.01);
    for (int i = 0; i < 3; ++i) CHECK(p[i] == 2.0f);
    CHECK(st.t == 1);

    debias::adam_step_absent(p, st, 0.01);
    for (int i = 0; i < 3; ++i) CHECK(p[i] == 2.0f);
    CHECK(st.t == 2);
}

TEST_CASE("absent gradient still decays momentum") {
    Tensor p = Tensor::scalar(1.0f);
    AdamState st;
    debias::adam_step(p, Tensor::scalar(1.0f), st, 0.001);
    const float after_one = p[0];
    debias::adam_step_absent(p, st, 0.001);
    // momentum from the first step keeps moving the parameter
    CHECK(p[0] < after_one);
    CHECK(st.t == 2);
}

TEST_CASE("second moment stays nonnegative") {
    Tensor p = Tensor::full({8}, 0.5f);
    AdamState st;
    Tensor g({8});
    for (int step = 0; step < 20; ++step) {
        for (int i = 0; i < 8; ++i) g[i] = static_cast<float>((i % 2 ? -1 : 1) * (step + i) * 0.1);
        debias::adam_step(p, g, st, 0.001);
        for (int i = 0; i < 8; ++i) CHECK(st.v[i] >= 0.0f);
    }
    CHECK(st.t == 20);
}

TEST_CASE("validation errors") {
    Tensor p = Tensor::full({3}, 1.0f);
    AdamState st;
    CHECK_THROWS_AS(debias::adam_step(p, Tensor({4}), st, 0.001), debias::ShapeError);
    CHECK_THROWS_AS(debias::adam_step(p, Tensor({3}), st, 0.0), debias::HyperparamError);

    // state bound to a different parameter shape
    AdamState st2;
    debias::adam_step(p, Tensor({3}), st2, 0.001);
    Tensor q = Tensor::full({2}, 1.0f);
    CHECK_THROWS_AS(debias::adam_step(q, Tensor({2}), st2, 0.001), debias::ShapeError);
}
