#include "debias/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "debias/rng.hpp"
#include "debias/tape.hpp"
#include "debias/tensor.hpp"

namespace debias {

namespace {

// ---- double-precision references -------------------------------------------
// Deliberately naive re-implementations (bounds checks in the inner loop,
// scatter instead of gather) so they share no structure with the tape kernels.

using DVec = std::vector<double>;

DVec ref_conv2d(const DVec& x, const DVec& w, const DVec& b, int N, int Cin, int H, int W,
                int Cout, int kh, int kw, int s, int p) {
    const int Ho = (H + 2 * p - kh) / s + 1, Wo = (W + 2 * p - kw) / s + 1;
    DVec out(static_cast<size_t>(N) * Cout * Ho * Wo);
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int i = 0; i < Ho; ++i)
                for (int j = 0; j < Wo; ++j) {
                    double acc = b[static_cast<size_t>(co)];
                    for (int ci = 0; ci < Cin; ++ci)
                        for (int u = 0; u < kh; ++u)
                            for (int v = 0; v < kw; ++v) {
                                const int y = i * s - p + u, xx = j * s - p + v;
                                if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                                acc += x[static_cast<size_t>(((n * Cin + ci) * H + y) * W + xx)] *
                                       w[static_cast<size_t>(((co * Cin + ci) * kh + u) * kw + v)];
                            }
                    out[static_cast<size_t>(((n * Cout + co) * Ho + i) * Wo + j)] = acc;
                }
    return out;
}

DVec ref_convt(const DVec& x, const DVec& w, const DVec& b, int N, int Cin, int H, int W,
               int Cout, int kh, int kw, int s, int p) {
    const int Ho = (H - 1) * s - 2 * p + kh, Wo = (W - 1) * s - 2 * p + kw;
    DVec out(static_cast<size_t>(N) * Cout * Ho * Wo);
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int i = 0; i < Ho; ++i)
                for (int j = 0; j < Wo; ++j)
                    out[static_cast<size_t>(((n * Cout + co) * Ho + i) * Wo + j)] =
                        b[static_cast<size_t>(co)];
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const double xv = x[static_cast<size_t>(((n * Cin + ci) * H + i) * W + j)];
                    for (int co = 0; co < Cout; ++co)
                        for (int u = 0; u < kh; ++u)
                            for (int v = 0; v < kw; ++v) {
                                const int oy = i * s - p + u, ox = j * s - p + v;
                                if (oy < 0 || oy >= Ho || ox < 0 || ox >= Wo) continue;
                                out[static_cast<size_t>(((n * Cout + co) * Ho + oy) * Wo + ox)] +=
                                    xv * w[static_cast<size_t>(((ci * Cout + co) * kh + u) * kw + v)];
                            }
                }
    return out;
}

DVec ref_dense(const DVec& x, const DVec& w, const DVec& b, int N, int Din, int Dout) {
    DVec out(static_cast<size_t>(N) * Dout);
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < Dout; ++o) {
            double acc = b[static_cast<size_t>(o)];
            for (int d = 0; d < Din; ++d)
                acc += x[static_cast<size_t>(n * Din + d)] * w[static_cast<size_t>(o * Din + d)];
            out[static_cast<size_t>(n * Dout + o)] = acc;
        }
    return out;
}

DVec ref_softmax_rows(const DVec& x, int N, int K) {
    DVec out(x.size());
    for (int n = 0; n < N; ++n) {
        const size_t base = static_cast<size_t>(n) * K;
        double mx = x[base];
        for (int k = 1; k < K; ++k) mx = std::max(mx, x[base + k]);
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(x[base + k] - mx);
        for (int k = 0; k < K; ++k) out[base + k] = std::exp(x[base + k] - mx) / sum;
    }
    return out;
}

double dot(const DVec& a, const DVec& r) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * r[i];
    return acc;
}

// ---- harness ----------------------------------------------------------------

// ref maps the flattened differentiable inputs to the scalar the tape computes.
using RefFn = std::function<double(const std::vector<DVec>&)>;
using BuildFn = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

GradCheckResult check_case(const std::string& name, const std::vector<Tensor>& inputs,
                           const BuildFn& build, const RefFn& ref, const std::string& corrupt_op) {
    Tape tape;
    std::vector<NodeId> ids;
    ids.reserve(inputs.size());
    for (const Tensor& in : inputs) ids.push_back(tape.leaf(in, /*requires_grad=*/true));
    const NodeId loss = build(tape, ids);
    tape.backward(loss);

    std::vector<DVec> base(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i) {
        base[i].assign(inputs[i].data(), inputs[i].data() + inputs[i].numel());
    }

    GradCheckResult res;
    res.op = name;
    const double h = 1e-3;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const bool have = tape.has_grad(ids[i]);
        for (int64_t c = 0; c < inputs[i].numel(); ++c) {
            double a = have ? static_cast<double>(tape.grad(ids[i])[c]) : 0.0;
            if (name == corrupt_op) a += 0.05;
            const double x0 = base[i][static_cast<size_t>(c)];
            base[i][static_cast<size_t>(c)] = x0 + h;
            const double fp = ref(base);
            base[i][static_cast<size_t>(c)] = x0 - h;
            const double fm = ref(base);
            base[i][static_cast<size_t>(c)] = x0;
            const double fd = (fp - fm) / (2.0 * h);
            const double err = std::abs(a - fd);
            const double rel = err / std::max({std::abs(a), std::abs(fd), 0.01});
            res.max_rel_err = std::max(res.max_rel_err, rel);
            res.max_abs_err = std::max(res.max_abs_err, err);
            res.coords += 1;
        }
    }
    res.passed = res.max_rel_err < 1e-3;
    return res;
}

Tensor draw_uniform(Rng& rng, std::vector<int> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// Magnitudes in [0.2, 1.0] with random sign: keeps relu/leaky inputs far from
// the kink relative to the finite-difference step.
Tensor draw_signed_away_from_zero(Rng& rng, std::vector<int> shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) {
        const double mag = rng.uniform(0.2, 1.0);
        t[i] = static_cast<float>(rng.uniform() < 0.5 ? -mag : mag);
    }
    return t;
}

Tensor draw_projection(Rng& rng, std::vector<int> shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) {
        const double mag = rng.uniform(0.5, 1.5);
        t[i] = static_cast<float>(rng.uniform() < 0.5 ? -mag : mag);
    }
    return t;
}

DVec as_dvec(const Tensor& t) { return DVec(t.data(), t.data() + t.numel()); }

} // namespace

std::vector<GradCheckResult> run_gradcheck(uint64_t seed, const std::string& corrupt_op) {
    std::vector<GradCheckResult> report;
    const Rng root(seed);

    { // conv2d: x[2,3,6,6], w[4,3,3,3], b[4], stride 2, pad 1 -> out[2,4,3,3]
        Rng rng = root.substream("conv2d");
        Tensor x = draw_uniform(rng, {2, 3, 6, 6}, -0.5, 0.5);
        Tensor w = draw_uniform(rng, {4, 3, 3, 3}, -0.5, 0.5);
        Tensor b = draw_uniform(rng, {4}, -0.5, 0.5);
        Tensor R = draw_projection(rng, {2, 4, 3, 3});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "conv2d", {x, w, b},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.conv2d(in[0], in[1], in[2], 2, 1), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                return dot(ref_conv2d(in[0], in[1], in[2], 2, 3, 6, 6, 4, 3, 3, 2, 1), rd);
            },
            corrupt_op));
    }
    { // conv_transpose2d: x[2,3,3,3], w[3,4,3,3], stride 2, pad 1 -> out[2,4,5,5]
        Rng rng = root.substream("conv_transpose2d");
        Tensor x = draw_uniform(rng, {2, 3, 3, 3}, -0.5, 0.5);
        Tensor w = draw_uniform(rng, {3, 4, 3, 3}, -0.5, 0.5);
        Tensor b = draw_uniform(rng, {4}, -0.5, 0.5);
        Tensor R = draw_projection(rng, {2, 4, 5, 5});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "conv_transpose2d", {x, w, b},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.conv_transpose2d(in[0], in[1], in[2], 2, 1), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                return dot(ref_convt(in[0], in[1], in[2], 2, 3, 3, 3, 4, 3, 3, 2, 1), rd);
            },
            corrupt_op));
    }
    { // dense: x[3,7], w[5,7], b[5]
        Rng rng = root.substream("dense");
        Tensor x = draw_uniform(rng, {3, 7}, -0.5, 0.5);
        Tensor w = draw_uniform(rng, {5, 7}, -0.5, 0.5);
        Tensor b = draw_uniform(rng, {5}, -0.5, 0.5);
        Tensor R = draw_projection(rng, {3, 5});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "dense", {x, w, b},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.dense(in[0], in[1], in[2]), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                return dot(ref_dense(in[0], in[1], in[2], 3, 7, 5), rd);
            },
            corrupt_op));
    }
    { // relu: x[2,3,4,4] away from the kink
        Rng rng = root.substream("relu");
        Tensor x = draw_signed_away_from_zero(rng, {2, 3, 4, 4});
        Tensor R = draw_projection(rng, {2, 3, 4, 4});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "relu", {x},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.relu(in[0]), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (size_t i = 0; i < in[0].size(); ++i) {
                    acc += (in[0][i] > 0.0 ? in[0][i] : 0.0) * rd[i];
                }
                return acc;
            },
            corrupt_op));
    }
    { // leaky_relu, alpha 0.1
        Rng rng = root.substream("leaky_relu");
        Tensor x = draw_signed_away_from_zero(rng, {2, 3, 4, 4});
        Tensor R = draw_projection(rng, {2, 3, 4, 4});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "leaky_relu", {x},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.leaky_relu(in[0], 0.1f), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (size_t i = 0; i < in[0].size(); ++i) {
                    acc += (in[0][i] > 0.0 ? in[0][i] : 0.1 * in[0][i]) * rd[i];
                }
                return acc;
            },
            corrupt_op));
    }
    { // sigmoid: x[3,5]
        Rng rng = root.substream("sigmoid");
        Tensor x = draw_uniform(rng, {3, 5}, -1.0, 1.0);
        Tensor R = draw_projection(rng, {3, 5});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "sigmoid", {x},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.sigmoid(in[0]), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (size_t i = 0; i < in[0].size(); ++i) acc += rd[i] / (1.0 + std::exp(-in[0][i]));
                return acc;
            },
            corrupt_op));
    }
    { // softmax over axis 1: x[3,6]
        Rng rng = root.substream("softmax");
        Tensor x = draw_uniform(rng, {3, 6}, -1.0, 1.0);
        Tensor R = draw_projection(rng, {3, 6});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "softmax", {x},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.softmax(in[0], 1), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) { return dot(ref_softmax_rows(in[0], 3, 6), rd); },
            corrupt_op));
    }
    { // reshape [2,3,4] -> [4,6]
        Rng rng = root.substream("reshape");
        Tensor x = draw_uniform(rng, {2, 3, 4}, -0.5, 0.5);
        Tensor R = draw_projection(rng, {4, 6});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "reshape", {x},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.reshape(in[0], {4, 6}), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) { return dot(in[0], rd); },
            corrupt_op));
    }
    { // add
        Rng rng = root.substream("add");
        Tensor a = draw_uniform(rng, {3, 4}, -0.5, 0.5);
        Tensor b = draw_uniform(rng, {3, 4}, -0.5, 0.5);
        Tensor R = draw_projection(rng, {3, 4});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "add", {a, b},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.add(in[0], in[1]), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (size_t i = 0; i < rd.size(); ++i) acc += (in[0][i] + in[1][i]) * rd[i];
                return acc;
            },
            corrupt_op));
    }
    { // sub
        Rng rng = root.substream("sub");
        Tensor a = draw_uniform(rng, {3, 4}, -0.5, 0.5);
        Tensor b = draw_uniform(rng, {3, 4}, -0.5, 0.5);
        Tensor R = draw_projection(rng, {3, 4});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "sub", {a, b},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.sub(in[0], in[1]), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (size_t i = 0; i < rd.size(); ++i) acc += (in[0][i] - in[1][i]) * rd[i];
                return acc;
            },
            corrupt_op));
    }
    { // mul (both sides differentiable)
        Rng rng = root.substream("mul");
        Tensor a = draw_uniform(rng, {3, 4}, -0.5, 0.5);
        Tensor b = draw_uniform(rng, {3, 4}, -0.5, 0.5);
        Tensor R = draw_projection(rng, {3, 4});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "mul", {a, b},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.mul(in[0], in[1]), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (size_t i = 0; i < rd.size(); ++i) acc += in[0][i] * in[1][i] * rd[i];
                return acc;
            },
            corrupt_op));
    }
    { // scale by 1.7
        Rng rng = root.substream("scale");
        Tensor a = draw_uniform(rng, {3, 4}, -0.5, 0.5);
        Tensor R = draw_projection(rng, {3, 4});
        const DVec rd = as_dvec(R);
        report.push_back(check_case(
            "scale", {a},
            [&R](Tape& t, const std::vector<NodeId>& in) {
                return t.sum_all(t.mul(t.scale(in[0], 1.7), t.constant(R)));
            },
            [rd](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (size_t i = 0; i < rd.size(); ++i) acc += 1.7 * in[0][i] * rd[i];
                return acc;
            },
            corrupt_op));
    }
    { // sum_all, with a non-unit upstream gradient via scale
        Rng rng = root.substream("sum_all");
        Tensor a = draw_uniform(rng, {2, 5}, -0.5, 0.5);
        report.push_back(check_case(
            "sum_all", {a},
            [](Tape& t, const std::vector<NodeId>& in) { return t.scale(t.sum_all(in[0]), 1.3); },
            [](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (double v : in[0]) acc += v;
                return 1.3 * acc;
            },
            corrupt_op));
    }
    { // mse_loss, scaled upstream
        Rng rng = root.substream("mse_loss");
        Tensor a = draw_uniform(rng, {2, 3, 4}, 0.0, 1.0);
        Tensor b = draw_uniform(rng, {2, 3, 4}, 0.0, 1.0);
        report.push_back(check_case(
            "mse_loss", {a, b},
            [](Tape& t, const std::vector<NodeId>& in) {
                return t.scale(t.mse_loss(in[0], in[1]), 1.3);
            },
            [](const std::vector<DVec>& in) {
                double acc = 0.0;
                for (size_t i = 0; i < in[0].size(); ++i) {
                    const double d = in[0][i] - in[1][i];
                    acc += d * d;
                }
                return 1.3 * acc / static_cast<double>(in[0].size());
            },
            corrupt_op));
    }
    { // cross_entropy_loss: logits [4,5], negative upstream scale mirrors -lambda
        Rng rng = root.substream("cross_entropy_loss");
        Tensor logits = draw_uniform(rng, {4, 5}, -1.0, 1.0);
        std::vector<int> labels(4);
        for (int& l : labels) l = static_cast<int>(rng.below(5));
        report.push_back(check_case(
            "cross_entropy_loss", {logits},
            [&labels](Tape& t, const std::vector<NodeId>& in) {
                return t.scale(t.cross_entropy_loss(in[0], labels), -2.0);
            },
            [labels](const std::vector<DVec>& in) {
                const int N = 4, K = 5;
                double acc = 0.0;
                for (int n = 0; n < N; ++n) {
                    const size_t base = static_cast<size_t>(n) * K;
                    double mx = in[0][base];
                    for (int k = 1; k < K; ++k) mx = std::max(mx, in[0][base + k]);
                    double sum = 0.0;
                    for (int k = 0; k < K; ++k) sum += std::exp(in[0][base + k] - mx);
                    acc += mx + std::log(sum) - in[0][base + static_cast<size_t>(labels[static_cast<size_t>(n)])];
                }
                return -2.0 * acc / static_cast<double>(N);
            },
            corrupt_op));
    }

    return report;
}

bool gradcheck_passed(const std::vector<GradCheckResult>& results) {
    for (const auto& r : results) {
        if (!r.passed) return false;
    }
    return true;
}

} // namespace debias
