#include <cmath>

#include "debias/errors.hpp"
#include "debias/evaluation.hpp"
#include "debias/rng.hpp"
#include "doctest.h"
#include "knn_oracle.hpp"

using namespace debias;

namespace {

FeatureMatrix make_features(Tensor rows) {
    FeatureMatrix f;
    f.rows = std::move(rows);
    f.row_ids.resize(static_cast<size_t>(f.rows.dim(0)));
    for (int i = 0; i < f.rows.dim(0); ++i) f.row_ids[static_cast<size_t>(i)] = i;
    return f;
}

} // namespace

TEST_CASE("profile aggregation averages rows per group in ascending id order") {
    FeatureMatrix f = make_features(Tensor({4, 2}, {1.0f, 3.0f, 3.0f, 5.0f, 10.0f, 0.0f, 2.0f, 2.0f}));

    // rows 0 and 1 share group 7, row 2 is group 3, row 3 is group 5
    const FeatureMatrix out = aggregate_profiles(f, {7, 7, 3, 5});
    REQUIRE(out.rows.shape() == std::vector<int>{3, 2});
    CHECK(out.row_ids == std::vector<int>{3, 5, 7});
    CHECK(out.rows.at2(0, 0) == 10.0f); // group 3 alone
    CHECK(out.rows.at2(1, 0) == 2.0f);  // group 5 alone
    CHECK(out.rows.at2(2, 0) == 2.0f);  // mean of [1,3] and [3,5]
    CHECK(out.rows.at2(2, 1) == 4.0f);

    // singleton groups reproduce the input (reordered by group id)
    const FeatureMatrix single = aggregate_profiles(f, {3, 2, 1, 0});
    CHECK(single.rows.at2(0, 0) == 2.0f);  // group 0 = original row 3
    CHECK(single.rows.at2(3, 1) == 3.0f);  // group 3 = original row 0

    CHECK_THROWS_AS(aggregate_profiles(f, {1, 2}), DataError);
}

TEST_CASE("aggregation is invariant to sample order") {
    Rng rng(3);
    Tensor rows({6, 3});
    for (int64_t i = 0; i < rows.numel(); ++i) rows[i] = static_cast<float>(rng.uniform());
    const std::vector<int> groups = {1, 0, 1, 2, 0, 1};
    const FeatureMatrix a = aggregate_profiles(make_features(rows), groups);

    // permute samples and their group tags the same way
    const std::vector<int> perm = {4, 2, 0, 5, 1, 3};
    Tensor shuffled({6, 3});
    std::vector<int> groups_p(6);
    for (int i = 0; i < 6; ++i) {
        groups_p[static_cast<size_t>(i)] = groups[static_cast<size_t>(perm[static_cast<size_t>(i)])];
        for (int j = 0; j < 3; ++j)
            shuffled.at2(i, j) = rows.at2(perm[static_cast<size_t>(i)], j);
    }
    const FeatureMatrix b = aggregate_profiles(make_features(shuffled), groups_p);
    REQUIRE(a.rows.shape() == b.rows.shape());
    for (int64_t i = 0; i < a.rows.numel(); ++i)
        CHECK(a.rows[i] == doctest::Approx(b.rows[i]).epsilon(1e-6));
}

TEST_CASE("kNN hand geometry: two pairs on a line") {
    FeatureMatrix f = make_features(Tensor({4, 1}, {0.0f, 1.0f, 10.0f, 11.0f}));
    CHECK(knn_loo_accuracy(f, {0, 0, 1, 1}, 1) == 1.0);
    // all same label is always perfect
    CHECK(knn_loo_accuracy(f, {4, 4, 4, 4}, 3) == 1.0);
}

TEST_CASE("kNN matches the brute-force oracle on random instances") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        Rng tr = rng.substream("trial", static_cast<uint64_t>(trial));
        const int n = 8 + static_cast<int>(tr.below(43));
        const int d = 1 + static_cast<int>(tr.below(8));
        const int classes = 2 + static_cast<int>(tr.below(4));
        const int k = 1 + static_cast<int>(tr.below(5));
        if (n <= k) continue;
        Tensor rows({n, d});
        // low-resolution grid coordinates force frequent exact distance ties
        for (int64_t i = 0; i < rows.numel(); ++i)
            rows[i] = static_cast<float>(tr.below(4));
        std::vector<int> labels(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = static_cast<int>(tr.below(static_cast<uint32_t>(classes)));
        const double got = knn_loo_accuracy(make_features(rows), labels, k);
        const double want = knn_loo_oracle(rows, labels, k);
        CHECK(got == want);
    }
}

TEST_CASE("kNN precondition errors") {
    FeatureMatrix f = make_features(Tensor({3, 2}));
    CHECK_THROWS_AS(knn_loo_accuracy(f, {0, 1, 0}, 3), DataError);       // N must exceed k
    CHECK_THROWS_AS(knn_loo_accuracy(f, {0, 1}, 1), DataError);          // label length
    CHECK_THROWS_AS(knn_loo_accuracy(f, {0, 1, 0}, 0), HyperparamError); // k >= 1
}

TEST_CASE("exclusion tags remove same-tag neighbors") {
    // two tight clusters; with same-tag exclusion every query must reach
    // across to the other cluster and changes its prediction
    FeatureMatrix f = make_features(Tensor({4, 1}, {0.0f, 0.1f, 5.0f, 5.1f}));
    const std::vector<int> labels = {0, 0, 1, 1};
    CHECK(knn_loo_accuracy(f, labels, 1) == 1.0);
    CHECK(knn_loo_accuracy(f, labels, 1, std::vector<int>{9, 9, 8, 8}) == 0.0);
}

TEST_CASE("null accuracy is the majority fraction") {
    CHECK(null_accuracy({0, 0, 1}) == doctest::Approx(2.0 / 3.0));
    CHECK(null_accuracy({5, 5, 5, 5}) == 1.0);
    // a 92-label multiset whose largest class holds 14 members
    std::vector<int> labels;
    for (int c = 0; c < 12; ++c)
        for (int i = 0; i < (c == 0 ? 14 : 0) + (c > 0 ? 78 / 11 : 0); ++i) labels.push_back(c);
    // 14 + 11*7 = 91; pad one more of class 1 to reach 92 without a new majority
    labels.push_back(1);
    REQUIRE(labels.size() == 92);
    CHECK(null_accuracy(labels) == doctest::Approx(14.0 / 92.0));
    CHECK(std::round(null_accuracy(labels) * 1e5) / 1e3 == doctest::Approx(15.217));
    CHECK_THROWS_AS(null_accuracy({}), DataError);
}

TEST_CASE("fold change reproduces the published ratios at one decimal") {
    auto fc1 = [](double acc, double null) { return std::round(fold_change(acc, null) * 10.0) / 10.0; };
    CHECK(fc1(84.783, 15.217) == 5.6);
    CHECK(fc1(64.130, 31.522) == 2.0);
    CHECK(fc1(55.435, 15.217) == 3.6);
    CHECK(fc1(35.870, 31.522) == 1.1);
    CHECK(fold_change(0.31522, 0.31522) == 1.0);
    CHECK_THROWS_AS(fold_change(0.5, 0.0), NumericError);
}

TEST_CASE("pearson r: exact lines, hand case, permutation p-value") {
    const std::vector<double> x = {1, 2, 3, 4};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 * v + 1.0);
    auto [r_up, p_up] = pearson_r(x, y, 0, 1);
    CHECK(r_up == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    CHECK(pearson_r(x, neg, 0, 1).first == doctest::Approx(-1.0).epsilon(1e-12));

    const std::vector<double> y2 = {1, 3, 2, 4};
    auto [r, p] = pearson_r(x, y2, 1000, 5);
    CHECK(r == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(p > 0.0);
    CHECK(p <= 1.0);

    // p-value definition: with zero permutations it is exactly 1
    CHECK(pearson_r(x, y2, 0, 5).second == 1.0);

    CHECK_THROWS_AS(pearson_r({1, 1, 1}, {1, 2, 3}, 0, 1), NumericError);
    CHECK_THROWS_AS(pearson_r({1, 2}, {1, 2}, 0, 1), DataError);
}

TEST_CASE("pearson r is affine-invariant and sign-flips") {
    Rng rng(9);
    std::vector<double> x(30), y(30);
    for (int i = 0; i < 30; ++i) {
        x[static_cast<size_t>(i)] = rng.uniform();
        y[static_cast<size_t>(i)] = rng.uniform() + 0.5 * x[static_cast<size_t>(i)];
    }
    const double r0 = pearson_r(x, y, 0, 1).first;
    std::vector<double> xs;
    for (double v : x) xs.push_back(3.5 * v - 2.0);
    CHECK(std::fabs(pearson_r(xs, y, 0, 1).first - r0) < 1e-6);
    std::vector<double> xf;
    for (double v : x) xf.push_back(-2.0 * v + 1.0);
    CHECK(std::fabs(pearson_r(xf, y, 0, 1).first + r0) < 1e-6);
}

TEST_CASE("probe report: constructed one-hot features") {
    // 12 samples, 3 classes one-hot in M, constant in S
    const int n = 12;
    Tensor rows({n, 3});
    std::vector<int> m(static_cast<size_t>(n)), s(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        m[static_cast<size_t>(i)] = i % 3;
        s[static_cast<size_t>(i)] = i % 2;
        rows.at2(i, i % 3) = 1.0f;
    }
    auto [moa, batch] = probe_report(make_features(rows), m, s, {}, 3);
    CHECK(moa.probe == "moa");
    CHECK(moa.accuracy == 1.0);
    CHECK(moa.n == n);
    CHECK(moa.fold_change == doctest::Approx(moa.accuracy / moa.null_accuracy));
    CHECK(batch.accuracy <= batch.null_accuracy + 0.25); // no S information in features
    CHECK(batch.fold_change == doctest::Approx(batch.accuracy / batch.null_accuracy));
}

TEST_CASE("probe report aggregates groups first") {
    // 8 samples in 4 groups of 2; group profiles separate perfectly in M
    Tensor rows({8, 2});
    std::vector<int> m(8), s(8), g(8);
    for (int i = 0; i < 8; ++i) {
        const int group = i / 2;
        g[static_cast<size_t>(i)] = group;
        m[static_cast<size_t>(i)] = group % 2;
        s[static_cast<size_t>(i)] = group / 2;
        rows.at2(i, 0) = 5.0f * static_cast<float>(group % 2) + (i % 2 ? 0.05f : -0.05f);
        rows.at2(i, 1) = static_cast<float>(group / 2);
    }
    auto [moa, batch] = probe_report(make_features(rows), m, s, g, 1);
    CHECK(moa.n == 4); // probes run at group level
    CHECK(batch.n == 4);
    CHECK(moa.accuracy == 1.0);
}
