#pragma once

#include <cstdint>
#include <vector>

#include "debias/evaluation.hpp"

namespace debias {

struct TsneConfig {
    double perplexity = 15.0;
    int iters = 1000;
    double learning_rate = 100.0;
    double momentum_early = 0.5;
    double momentum_late = 0.8;
    int momentum_switch_iter = 250;
    double exaggeration = 4.0;
    int exaggeration_iters = 100;
    std::uint64_t seed = 0;
};

struct Embedding2D {
    std::vector<double> points; // row-major [N,2]
    std::vector<int> row_ids;
    double final_kl = 0.0;
    double kl_after_exaggeration = 0.0; // KL(P||Q) the moment exaggeration ends
    TsneConfig config;

    int n() const { return static_cast<int>(row_ids.size()); }
};

// Row-stochastic conditional neighbor distributions p_{j|i} after per-row
// bandwidth calibration: bisection on each row's precision until the
// conditional entropy hits log2(perplexity) bits within 1e-4. Returned
// row-major [N,N] with zero diagonal; throws NumericError if any row fails
// to converge. This is the calibration stage of tsne_embed, exposed so it
// can be audited directly.
std::vector<double> tsne_conditionals(const FeatureMatrix& features, double perplexity);

// Exact (quadratic) t-SNE: per-row Gaussian bandwidths calibrated by
// bisection to entropy log2(perplexity) bits within 1e-4, symmetrized
// affinities, Student-t low-dimensional kernel, gradient descent with
// momentum, per-coordinate gains, and early exaggeration on the first
// exaggeration_iters iterations (gradient only; reported KLs always use the
// true P). Deterministic given the seed.
Embedding2D tsne_embed(const FeatureMatrix& features, const TsneConfig& config);
Embedding2D tsne_embed(const FeatureMatrix& features, double perplexity, int iters,
                       std::uint64_t seed);

} // namespace debias
