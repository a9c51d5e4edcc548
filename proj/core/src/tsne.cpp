#include "debias/tsne.hpp"

#include <algorithm>
#include <cmath>

#include "debias/errors.hpp"
#include "debias/rng.hpp"

namespace debias {

namespace {

constexpr double kTiny = 1e-12;

// Conditional distribution p_{j|i} for one row at precision beta = 1/(2s^2);
// returns its Shannon entropy in bits.
double fill_conditional(const std::vector<double>& d2_row, int i, double beta,
                        std::vector<double>& p_row) {
    const int n = static_cast<int>(d2_row.size());
    double zmax = -1e300;
    for (int j = 0; j < n; ++j)
        if (j != i) zmax = std::max(zmax, -beta * d2_row[static_cast<size_t>(j)]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        if (j == i) {
            p_row[static_cast<size_t>(j)] = 0.0;
            continue;
        }
        const double v = std::exp(-beta * d2_row[static_cast<size_t>(j)] - zmax);
        p_row[static_cast<size_t>(j)] = v;
        sum += v;
    }
    double entropy = 0.0;
    for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double p = p_row[static_cast<size_t>(j)] / sum;
        p_row[static_cast<size_t>(j)] = p;
        if (p > 0.0) entropy -= p * std::log2(p);
    }
    return entropy;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, int n) {
    double kl = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double pij = std::max(p[static_cast<size_t>(i) * n + j], kTiny);
            const double qij = std::max(q[static_cast<size_t>(i) * n + j], kTiny);
            kl += pij * std::log(pij / qij);
        }
    return kl;
}

// Student-t affinities of the current layout; returns them in q and the
// unnormalized kernel values in num.
void fill_q(const std::vector<double>& y, int n, std::vector<double>& num,
            std::vector<double>& q) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        num[static_cast<size_t>(i) * n + i] = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double dx = y[static_cast<size_t>(i) * 2] - y[static_cast<size_t>(j) * 2];
            const double dy = y[static_cast<size_t>(i) * 2 + 1] - y[static_cast<size_t>(j) * 2 + 1];
            const double v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[static_cast<size_t>(i) * n + j] = v;
            num[static_cast<size_t>(j) * n + i] = v;
            sum += 2.0 * v;
        }
    }
    for (size_t t = 0; t < q.size(); ++t) q[t] = num[t] / sum;
}

} // namespace

std::vector<double> tsne_conditionals(const FeatureMatrix& features, double perplexity) {
    features.validate();
    const int n = features.n(), d = features.d();
    if (n < 5) throw DataError("tsne: need at least 5 rows");
    if (!(perplexity > 1.0) || !(perplexity < static_cast<double>(n - 1) / 3.0))
        throw HyperparamError("tsne: perplexity must lie in (1, (N-1)/3)");

    // pairwise squared distances in input space
    std::vector<double> d2(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < d; ++t) {
                const double diff =
                    static_cast<double>(features.rows[static_cast<int64_t>(i) * d + t]) -
                    static_cast<double>(features.rows[static_cast<int64_t>(j) * d + t]);
                acc += diff * diff;
            }
            d2[static_cast<size_t>(i) * n + j] = acc;
            d2[static_cast<size_t>(j) * n + i] = acc;
        }

    // per-row bandwidth calibration: bisection on beta until the conditional
    // entropy hits log2(perplexity) within 1e-4 bits
    const double target = std::log2(perplexity);
    std::vector<double> p(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> d2_row(static_cast<size_t>(n)), p_row(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) d2_row[static_cast<size_t>(j)] = d2[static_cast<size_t>(i) * n + j];
        double beta = 1.0, lo = 0.0, hi = 0.0;
        bool has_lo = false, has_hi = false;
        double entropy = fill_conditional(d2_row, i, beta, p_row);
        for (int it = 0; it < 200 && std::fabs(entropy - target) > 1e-4; ++it) {
            if (entropy > target) { // too flat: raise beta
                lo = beta;
                has_lo = true;
                beta = has_hi ? 0.5 * (lo + hi) : beta * 2.0;
            } else {
                hi = beta;
                has_hi = true;
                beta = has_lo ? 0.5 * (lo + hi) : beta * 0.5;
            }
            entropy = fill_conditional(d2_row, i, beta, p_row);
        }
        if (std::fabs(entropy - target) > 1e-4)
            throw NumericError("tsne: bandwidth calibration did not converge");
        for (int j = 0; j < n; ++j) p[static_cast<size_t>(i) * n + j] = p_row[static_cast<size_t>(j)];
    }
    return p;
}

Embedding2D tsne_embed(const FeatureMatrix& features, const TsneConfig& config) {
    if (config.iters < 1) throw HyperparamError("tsne: iters must be positive");
    std::vector<double> p = tsne_conditionals(features, config.perplexity);
    const int n = features.n();

    // symmetrize: P = (P_cond + P_cond^T) / 2N, which sums to 1
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = (p[static_cast<size_t>(i) * n + j] + p[static_cast<size_t>(j) * n + i]) /
                             (2.0 * n);
            p[static_cast<size_t>(i) * n + j] = v;
            p[static_cast<size_t>(j) * n + i] = v;
        }

    Embedding2D emb;
    emb.row_ids = features.row_ids;
    emb.config = config;
    emb.points.assign(static_cast<size_t>(n) * 2, 0.0);
    {
        Rng rng = Rng(config.seed).substream("tsne");
        for (double& v : emb.points) v = 1e-4 * rng.normal();
    }

    std::vector<double> inc(static_cast<size_t>(n) * 2, 0.0);
    std::vector<double> gains(static_cast<size_t>(n) * 2, 1.0);
    std::vector<double> num(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> q(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> grad(static_cast<size_t>(n) * 2, 0.0);

    for (int iter = 0; iter < config.iters; ++iter) {
        const bool exaggerating = iter < config.exaggeration_iters;
        const double momentum =
            iter < config.momentum_switch_iter ? config.momentum_early : config.momentum_late;
        fill_q(emb.points, n, num, q);

        std::fill(grad.begin(), grad.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double pij = exaggerating
                                       ? config.exaggeration * p[static_cast<size_t>(i) * n + j]
                                       : p[static_cast<size_t>(i) * n + j];
                const double mult = 4.0 * (pij - q[static_cast<size_t>(i) * n + j]) *
                                    num[static_cast<size_t>(i) * n + j];
                grad[static_cast<size_t>(i) * 2] +=
                    mult * (emb.points[static_cast<size_t>(i) * 2] - emb.points[static_cast<size_t>(j) * 2]);
                grad[static_cast<size_t>(i) * 2 + 1] +=
                    mult * (emb.points[static_cast<size_t>(i) * 2 + 1] -
                            emb.points[static_cast<size_t>(j) * 2 + 1]);
            }
        }

        for (size_t t = 0; t < emb.points.size(); ++t) {
            const bool same_sign = (grad[t] > 0.0) == (inc[t] > 0.0);
            gains[t] = same_sign ? gains[t] * 0.8 : gains[t] + 0.2;
            gains[t] = std::max(gains[t], 0.01);
            inc[t] = momentum * inc[t] - config.learning_rate * gains[t] * grad[t];
            emb.points[t] += inc[t];
        }
        double mx = 0.0, my = 0.0; // recenter
        for (int i = 0; i < n; ++i) {
            mx += emb.points[static_cast<size_t>(i) * 2];
            my += emb.points[static_cast<size_t>(i) * 2 + 1];
        }
        mx /= n;
        my /= n;
        for (int i = 0; i < n; ++i) {
            emb.points[static_cast<size_t>(i) * 2] -= mx;
            emb.points[static_cast<size_t>(i) * 2 + 1] -= my;
        }

        if (iter + 1 == config.exaggeration_iters) {
            fill_q(emb.points, n, num, q);
            emb.kl_after_exaggeration = kl_divergence(p, q, n);
        }
    }

    fill_q(emb.points, n, num, q);
    emb.final_kl = kl_divergence(p, q, n);
    if (config.exaggeration_iters >= config.iters) emb.kl_after_exaggeration = emb.final_kl;
    return emb;
}

Embedding2D tsne_embed(const FeatureMatrix& features, double perplexity, int iters,
                       std::uint64_t seed) {
    TsneConfig cfg;
    cfg.perplexity = perplexity;
    cfg.iters = iters;
    cfg.seed = seed;
    return tsne_embed(features, cfg);
}

} // namespace debias
