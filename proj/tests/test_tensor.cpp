#include <cmath>
#include <limits>

#include "debias/errors.hpp"
#include "debias/tensor.hpp"
#include "doctest.h"

using debias::Tensor;

TEST_CASE("construction zero-fills and validates") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.rank() == 2);
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0f);

    CHECK_THROWS_AS(Tensor({2, 0}), debias::ShapeError);
    CHECK_THROWS_AS(Tensor({-1, 3}), debias::ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f}), debias::ShapeError);
}

TEST_CASE("row-major indexing") {
    Tensor t({2, 3, 4, 5});
    t.at4(1, 2, 3, 4) = 7.0f;
    CHECK(t[t.numel() - 1] == 7.0f);
    t.at4(0, 0, 0, 1) = 3.0f;
    CHECK(t[1] == 3.0f);

    Tensor m({2, 3});
    m.at2(1, 0) = 5.0f;
    CHECK(m[3] == 5.0f);

    Tensor c({2, 3, 4});
    c.at3(1, 2, 3) = 9.0f;
    CHECK(c[23] == 9.0f);
}

TEST_CASE("item and scalar") {
    CHECK(Tensor::scalar(2.5f).item() == 2.5f);
    Tensor t({2, 2});
    CHECK_THROWS(t.item());
}

TEST_CASE("full and fill") {
    Tensor t = Tensor::full({3, 3}, 1.5f);
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 1.5f);
    t.fill(-2.0f);
    CHECK(t[4] == -2.0f);
}

TEST_CASE("all_finite flags NaN and Inf") {
    Tensor t({4});
    CHECK(t.all_finite());
    t[2] = std::nanf("");
    CHECK_FALSE(t.all_finite());
    t[2] = 0.0f;
    t[3] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("same_shape and helpers") {
    Tensor a({2, 3}), b({2, 3}), c({3, 2});
    CHECK(a.same_shape(b));
    CHECK_FALSE(a.same_shape(c));
    CHECK(debias::numel_of({4, 5}) == 20);
    CHECK_THROWS_AS(debias::require_same_shape(a, c, "test"), debias::ShapeError);
}
