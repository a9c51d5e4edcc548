#include "debias/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "debias/errors.hpp"
#include "debias/parallel.hpp"

namespace debias {

namespace {

void want_rank(const Tensor& t, int r, const char* what) {
    if (t.rank() != r) {
        throw ShapeError(std::string(what) + ": expected rank-" + std::to_string(r) +
                         " tensor, got shape " + shape_str(t.shape()));
    }
}

struct ConvDims {
    int N, Cin, H, W;
    int Cout, kh, kw;
    int stride, pad;
    int Hout, Wout;
};

// ---- conv2d kernels ------------------------------------------------------
// Per-output-pixel accumulation in double; the valid kernel tap range is
// hoisted out of the inner loops so there are no bounds checks inside.

void conv2d_fwd(const float* x, const float* w, const float* b, float* y, const ConvDims& d) {
    parallel_for(static_cast<int64_t>(d.N) * d.Cout, [&](int64_t p) {
        const int n = static_cast<int>(p / d.Cout);
        const int co = static_cast<int>(p % d.Cout);
        const float* xn = x + static_cast<int64_t>(n) * d.Cin * d.H * d.W;
        const float* wc = w + static_cast<int64_t>(co) * d.Cin * d.kh * d.kw;
        float* yp = y + (static_cast<int64_t>(n) * d.Cout + co) * d.Hout * d.Wout;
        const double bias = b[co];
        for (int i = 0; i < d.Hout; ++i) {
            const int y0 = i * d.stride - d.pad;
            const int u0 = std::max(0, -y0), u1 = std::min(d.kh, d.H - y0);
            for (int j = 0; j < d.Wout; ++j) {
                const int x0 = j * d.stride - d.pad;
                const int v0 = std::max(0, -x0), v1 = std::min(d.kw, d.W - x0);
                double acc = bias;
                for (int ci = 0; ci < d.Cin; ++ci) {
                    const float* xc = xn + static_cast<int64_t>(ci) * d.H * d.W;
                    const float* wk = wc + static_cast<int64_t>(ci) * d.kh * d.kw;
                    for (int u = u0; u < u1; ++u) {
                        const float* xr = xc + static_cast<int64_t>(y0 + u) * d.W + x0;
                        const float* wr = wk + static_cast<int64_t>(u) * d.kw;
                        for (int v = v0; v < v1; ++v) acc += static_cast<double>(xr[v]) * wr[v];
                    }
                }
                yp[static_cast<int64_t>(i) * d.Wout + j] = static_cast<float>(acc);
            }
        }
    });
}

void conv2d_bwd_x(const float* dy, const float* w, float* dx, const ConvDims& d) {
    parallel_for(d.N, [&](int64_t n) {
        std::vector<double> s(static_cast<size_t>(d.Cin) * d.H * d.W, 0.0);
        for (int co = 0; co < d.Cout; ++co) {
            const float* g = dy + (n * d.Cout + co) * d.Hout * d.Wout;
            const float* wc = w + static_cast<int64_t>(co) * d.Cin * d.kh * d.kw;
            for (int i = 0; i < d.Hout; ++i) {
                const int y0 = i * d.stride - d.pad;
                const int u0 = std::max(0, -y0), u1 = std::min(d.kh, d.H - y0);
                for (int j = 0; j < d.Wout; ++j) {
                    const double gv = g[static_cast<int64_t>(i) * d.Wout + j];
                    if (gv == 0.0) continue;
                    const int x0 = j * d.stride - d.pad;
                    const int v0 = std::max(0, -x0), v1 = std::min(d.kw, d.W - x0);
                    for (int ci = 0; ci < d.Cin; ++ci) {
                        double* sc = s.data() + static_cast<int64_t>(ci) * d.H * d.W;
                        const float* wk = wc + static_cast<int64_t>(ci) * d.kh * d.kw;
                        for (int u = u0; u < u1; ++u) {
                            double* sr = sc + static_cast<int64_t>(y0 + u) * d.W + x0;
                            const float* wr = wk + static_cast<int64_t>(u) * d.kw;
                            for (int v = v0; v < v1; ++v) sr[v] += gv * wr[v];
                        }
                    }
                }
            }
        }
        float* out = dx + n * d.Cin * d.H * d.W;
        for (size_t t = 0; t < s.size(); ++t) out[t] += static_cast<float>(s[t]);
    });
}

void conv2d_bwd_w(const float* dy, const float* x, float* dw, const ConvDims& d) {
    parallel_for(d.Cout, [&](int64_t co) {
        std::vector<double> s(static_cast<size_t>(d.Cin) * d.kh * d.kw, 0.0);
        for (int n = 0; n < d.N; ++n) {
            const float* xn = x + static_cast<int64_t>(n) * d.Cin * d.H * d.W;
            const float* g = dy + (static_cast<int64_t>(n) * d.Cout + co) * d.Hout * d.Wout;
            for (int i = 0; i < d.Hout; ++i) {
                const int y0 = i * d.stride - d.pad;
                const int u0 = std::max(0, -y0), u1 = std::min(d.kh, d.H - y0);
                for (int j = 0; j < d.Wout; ++j) {
                    const double gv = g[static_cast<int64_t>(i) * d.Wout + j];
                    if (gv == 0.0) continue;
                    const int x0 = j * d.stride - d.pad;
                    const int v0 = std::max(0, -x0), v1 = std::min(d.kw, d.W - x0);
                    for (int ci = 0; ci < d.Cin; ++ci) {
                        const float* xc = xn + static_cast<int64_t>(ci) * d.H * d.W;
                        double* sk = s.data() + static_cast<int64_t>(ci) * d.kh * d.kw;
                        for (int u = u0; u < u1; ++u) {
                            const float* xr = xc + static_cast<int64_t>(y0 + u) * d.W + x0;
                            double* sr = sk + static_cast<int64_t>(u) * d.kw;
                            for (int v = v0; v < v1; ++v) sr[v] += gv * xr[v];
                        }
                    }
                }
            }
        }
        float* out = dw + co * d.Cin * d.kh * d.kw;
        for (size_t t = 0; t < s.size(); ++t) out[t] += static_cast<float>(s[t]);
    });
}

void conv_bwd_b(const float* dy, float* db, int N, int Cout, int64_t plane) {
    parallel_for(Cout, [&](int64_t co) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* g = dy + (static_cast<int64_t>(n) * Cout + co) * plane;
            for (int64_t t = 0; t < plane; ++t) acc += g[t];
        }
        db[co] += static_cast<float>(acc);
    });
}

// ---- conv_transpose2d kernels --------------------------------------------
// Output position o receives taps (u, i) with i*stride - pad + u == o. The
// list depends only on the geometry, so it is built once per kernel call.

std::vector<std::vector<std::pair<int, int>>> transpose_taps(int out_size, int k, int stride,
                                                             int pad, int in_size) {
    std::vector<std::vector<std::pair<int, int>>> taps(static_cast<size_t>(out_size));
    for (int o = 0; o < out_size; ++o) {
        for (int u = (o + pad) % stride; u < k; u += stride) {
            const int num = o + pad - u;
            if (num < 0) break;
            const int i = num / stride;
            if (i < in_size) taps[static_cast<size_t>(o)].push_back({u, i});
        }
    }
    return taps;
}

void convt_fwd(const float* x, const float* w, const float* b, float* y, const ConvDims& d) {
    const auto rows = transpose_taps(d.Hout, d.kh, d.stride, d.pad, d.H);
    const auto cols = transpose_taps(d.Wout, d.kw, d.stride, d.pad, d.W);
    parallel_for(static_cast<int64_t>(d.N) * d.Cout, [&](int64_t p) {
        const int n = static_cast<int>(p / d.Cout);
        const int co = static_cast<int>(p % d.Cout);
        const float* xn = x + static_cast<int64_t>(n) * d.Cin * d.H * d.W;
        float* yp = y + (static_cast<int64_t>(n) * d.Cout + co) * d.Hout * d.Wout;
        const double bias = b[co];
        for (int oy = 0; oy < d.Hout; ++oy) {
            for (int ox = 0; ox < d.Wout; ++ox) {
                double acc = bias;
                for (int ci = 0; ci < d.Cin; ++ci) {
                    const float* xc = xn + static_cast<int64_t>(ci) * d.H * d.W;
                    const float* wk = w + (static_cast<int64_t>(ci) * d.Cout + co) * d.kh * d.kw;
                    for (const auto& [u, i] : rows[static_cast<size_t>(oy)]) {
                        for (const auto& [v, j] : cols[static_cast<size_t>(ox)]) {
                            acc += static_cast<double>(xc[static_cast<int64_t>(i) * d.W + j]) *
                                   wk[static_cast<int64_t>(u) * d.kw + v];
                        }
                    }
                }
                yp[static_cast<int64_t>(oy) * d.Wout + ox] = static_cast<float>(acc);
            }
        }
    });
}

void convt_bwd_x(const float* dy, const float* w, float* dx, const ConvDims& d) {
    parallel_for(static_cast<int64_t>(d.N) * d.Cin, [&](int64_t p) {
        const int n = static_cast<int>(p / d.Cin);
        const int ci = static_cast<int>(p % d.Cin);
        float* dxp = dx + (static_cast<int64_t>(n) * d.Cin + ci) * d.H * d.W;
        for (int i = 0; i < d.H; ++i) {
            const int oyb = i * d.stride - d.pad;
            const int u0 = std::max(0, -oyb), u1 = std::min(d.kh, d.Hout - oyb);
            for (int j = 0; j < d.W; ++j) {
                const int oxb = j * d.stride - d.pad;
                const int v0 = std::max(0, -oxb), v1 = std::min(d.kw, d.Wout - oxb);
                double acc = 0.0;
                for (int co = 0; co < d.Cout; ++co) {
                    const float* g = dy + (static_cast<int64_t>(n) * d.Cout + co) * d.Hout * d.Wout;
                    const float* wk = w + (static_cast<int64_t>(ci) * d.Cout + co) * d.kh * d.kw;
                    for (int u = u0; u < u1; ++u) {
                        const float* gr = g + static_cast<int64_t>(oyb + u) * d.Wout + oxb;
                        const float* wr = wk + static_cast<int64_t>(u) * d.kw;
                        for (int v = v0; v < v1; ++v) acc += static_cast<double>(gr[v]) * wr[v];
                    }
                }
                dxp[static_cast<int64_t>(i) * d.W + j] += static_cast<float>(acc);
            }
        }
    });
}

void convt_bwd_w(const float* dy, const float* x, float* dw, const ConvDims& d) {
    parallel_for(d.Cin, [&](int64_t ci) {
        std::vector<double> s(static_cast<size_t>(d.Cout) * d.kh * d.kw, 0.0);
        for (int n = 0; n < d.N; ++n) {
            const float* xc = x + (static_cast<int64_t>(n) * d.Cin + ci) * d.H * d.W;
            for (int i = 0; i < d.H; ++i) {
                const int oyb = i * d.stride - d.pad;
                const int u0 = std::max(0, -oyb), u1 = std::min(d.kh, d.Hout - oyb);
                for (int j = 0; j < d.W; ++j) {
                    const double xv = xc[static_cast<int64_t>(i) * d.W + j];
                    if (xv == 0.0) continue;
                    const int oxb = j * d.stride - d.pad;
                    const int v0 = std::max(0, -oxb), v1 = std::min(d.kw, d.Wout - oxb);
                    for (int co = 0; co < d.Cout; ++co) {
                        const float* g = dy + (static_cast<int64_t>(n) * d.Cout + co) * d.Hout * d.Wout;
                        double* sk = s.data() + static_cast<int64_t>(co) * d.kh * d.kw;
                        for (int u = u0; u < u1; ++u) {
                            const float* gr = g + static_cast<int64_t>(oyb + u) * d.Wout + oxb;
                            double* sr = sk + static_cast<int64_t>(u) * d.kw;
                            for (int v = v0; v < v1; ++v) sr[v] += xv * gr[v];
                        }
                    }
                }
            }
        }
        float* out = dw + ci * d.Cout * d.kh * d.kw;
        for (size_t t = 0; t < s.size(); ++t) out[t] += static_cast<float>(s[t]);
    });
}

// ---- dense kernels --------------------------------------------------------

void dense_fwd(const float* x, const float* w, const float* b, float* y, int N, int Din, int Dout) {
    parallel_for(N, [&](int64_t n) {
        const float* xr = x + n * Din;
        float* yr = y + n * Dout;
        for (int o = 0; o < Dout; ++o) {
            const float* wr = w + static_cast<int64_t>(o) * Din;
            double acc = b[o];
            for (int dd = 0; dd < Din; ++dd) acc += static_cast<double>(xr[dd]) * wr[dd];
            yr[o] = static_cast<float>(acc);
        }
    });
}

void dense_bwd_x(const float* dy, const float* w, float* dx, int N, int Din, int Dout) {
    parallel_for(N, [&](int64_t n) {
        std::vector<double> s(static_cast<size_t>(Din), 0.0);
        const float* gr = dy + n * Dout;
        for (int o = 0; o < Dout; ++o) {
            const double gv = gr[o];
            if (gv == 0.0) continue;
            const float* wr = w + static_cast<int64_t>(o) * Din;
            for (int dd = 0; dd < Din; ++dd) s[static_cast<size_t>(dd)] += gv * wr[dd];
        }
        float* out = dx + n * Din;
        for (int dd = 0; dd < Din; ++dd) out[dd] += static_cast<float>(s[static_cast<size_t>(dd)]);
    });
}

void dense_bwd_w(const float* dy, const float* x, float* dw, int N, int Din, int Dout) {
    parallel_for(Dout, [&](int64_t o) {
        std::vector<double> s(static_cast<size_t>(Din), 0.0);
        for (int n = 0; n < N; ++n) {
            const double gv = dy[static_cast<int64_t>(n) * Dout + o];
            if (gv == 0.0) continue;
            const float* xr = x + static_cast<int64_t>(n) * Din;
            for (int dd = 0; dd < Din; ++dd) s[static_cast<size_t>(dd)] += gv * xr[dd];
        }
        float* out = dw + o * Din;
        for (int dd = 0; dd < Din; ++dd) out[dd] += static_cast<float>(s[static_cast<size_t>(dd)]);
    });
}

void dense_bwd_b(const float* dy, float* db, int N, int Dout) {
    parallel_for(Dout, [&](int64_t o) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) acc += dy[static_cast<int64_t>(n) * Dout + o];
        db[o] += static_cast<float>(acc);
    });
}

} // namespace

// ---- tape plumbing ---------------------------------------------------------

NodeId Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
    if (backward_ran_) throw Error("tape already consumed by backward(); build a new tape");
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = needs_grad ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::set_exact(NodeId id, double v) {
    Node& n = nodes_[static_cast<size_t>(id)];
    n.has_exact = true;
    n.exact = v;
}

const Tensor& Tape::grad(NodeId id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) {
        throw Error("no gradient recorded for node " + std::to_string(id) +
                    " (not reachable from the loss, or backward() not run)");
    }
    return n.grad;
}

double Tape::scalar_value(NodeId id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.has_exact) return n.exact;
    if (n.value.numel() != 1) {
        throw NumericError("scalar_value on tensor of shape " + shape_str(n.value.shape()));
    }
    return static_cast<double>(n.value[0]);
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
    if (value.empty()) throw ShapeError("leaf: empty tensor");
    return push(std::move(value), requires_grad, nullptr);
}

void Tape::backward(NodeId loss) {
    if (loss < 0 || static_cast<size_t>(loss) >= nodes_.size()) {
        throw Error("backward: invalid node id");
    }
    if (backward_ran_) throw Error("backward() already run on this tape");
    backward_ran_ = true;
    if (nodes_[static_cast<size_t>(loss)].value.numel() != 1) {
        throw NumericError("backward requires a scalar loss, got shape " +
                           shape_str(nodes_[static_cast<size_t>(loss)].value.shape()));
    }
    grad_buf(loss)[0] = 1.0f;
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.back && !n.grad.empty()) n.back(*this);
    }
}

// ---- ops -------------------------------------------------------------------

NodeId Tape::conv2d(NodeId x, NodeId weight, NodeId bias, int stride, int padding) {
    if (stride < 1) throw HyperparamError("conv2d: stride must be >= 1, got " + std::to_string(stride));
    if (padding < 0) throw HyperparamError("conv2d: padding must be >= 0, got " + std::to_string(padding));
    const Tensor& xv = value(x);
    const Tensor& wv = value(weight);
    const Tensor& bv = value(bias);
    want_rank(xv, 4, "conv2d input");
    want_rank(wv, 4, "conv2d weight");
    want_rank(bv, 1, "conv2d bias");
    ConvDims d;
    d.N = xv.dim(0); d.Cin = xv.dim(1); d.H = xv.dim(2); d.W = xv.dim(3);
    d.Cout = wv.dim(0); d.kh = wv.dim(2); d.kw = wv.dim(3);
    d.stride = stride; d.pad = padding;
    if (wv.dim(1) != d.Cin) {
        throw ShapeError("conv2d: weight expects " + std::to_string(wv.dim(1)) +
                         " input channels, input has " + std::to_string(d.Cin));
    }
    if (bv.dim(0) != d.Cout) {
        throw ShapeError("conv2d: bias size " + std::to_string(bv.dim(0)) +
                         " != output channels " + std::to_string(d.Cout));
    }
    if (d.kh > d.H + 2 * padding || d.kw > d.W + 2 * padding) {
        throw ShapeError("conv2d: kernel " + std::to_string(d.kh) + "x" + std::to_string(d.kw) +
                         " larger than padded input " + std::to_string(d.H + 2 * padding) + "x" +
                         std::to_string(d.W + 2 * padding));
    }
    d.Hout = (d.H + 2 * padding - d.kh) / stride + 1;
    d.Wout = (d.W + 2 * padding - d.kw) / stride + 1;

    Tensor out({d.N, d.Cout, d.Hout, d.Wout});
    conv2d_fwd(xv.data(), wv.data(), bv.data(), out.data(), d);

    const bool ngx = needs_grad(x), ngw = needs_grad(weight), ngb = needs_grad(bias);
    auto back = [x, weight, bias, d, ngx, ngw, ngb, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const float* dy = t.grad(out_id).data();
        if (ngx) conv2d_bwd_x(dy, t.value(weight).data(), t.grad_buf(x).data(), d);
        if (ngw) conv2d_bwd_w(dy, t.value(x).data(), t.grad_buf(weight).data(), d);
        if (ngb) conv_bwd_b(dy, t.grad_buf(bias).data(), d.N, d.Cout,
                            static_cast<int64_t>(d.Hout) * d.Wout);
    };
    return push(std::move(out), ngx || ngw || ngb, back);
}

NodeId Tape::conv_transpose2d(NodeId x, NodeId weight, NodeId bias, int stride, int padding) {
    if (stride < 1) throw HyperparamError("conv_transpose2d: stride must be >= 1, got " + std::to_string(stride));
    if (padding < 0) throw HyperparamError("conv_transpose2d: padding must be >= 0, got " + std::to_string(padding));
    const Tensor& xv = value(x);
    const Tensor& wv = value(weight);
    const Tensor& bv = value(bias);
    want_rank(xv, 4, "conv_transpose2d input");
    want_rank(wv, 4, "conv_transpose2d weight");
    want_rank(bv, 1, "conv_transpose2d bias");
    ConvDims d;
    d.N = xv.dim(0); d.Cin = xv.dim(1); d.H = xv.dim(2); d.W = xv.dim(3);
    d.Cout = wv.dim(1); d.kh = wv.dim(2); d.kw = wv.dim(3);
    d.stride = stride; d.pad = padding;
    if (wv.dim(0) != d.Cin) {
        throw ShapeError("conv_transpose2d: weight expects " + std::to_string(wv.dim(0)) +
                         " input channels, input has " + std::to_string(d.Cin));
    }
    if (bv.dim(0) != d.Cout) {
        throw ShapeError("conv_transpose2d: bias size " + std::to_string(bv.dim(0)) +
                         " != output channels " + std::to_string(d.Cout));
    }
    d.Hout = (d.H - 1) * stride - 2 * padding + d.kh;
    d.Wout = (d.W - 1) * stride - 2 * padding + d.kw;
    if (d.Hout < 1 || d.Wout < 1) {
        throw ShapeError("conv_transpose2d: output " + std::to_string(d.Hout) + "x" +
                         std::to_string(d.Wout) + " is empty; padding too large for kernel");
    }

    Tensor out({d.N, d.Cout, d.Hout, d.Wout});
    convt_fwd(xv.data(), wv.data(), bv.data(), out.data(), d);

    const bool ngx = needs_grad(x), ngw = needs_grad(weight), ngb = needs_grad(bias);
    auto back = [x, weight, bias, d, ngx, ngw, ngb, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const float* dy = t.grad(out_id).data();
        if (ngx) convt_bwd_x(dy, t.value(weight).data(), t.grad_buf(x).data(), d);
        if (ngw) convt_bwd_w(dy, t.value(x).data(), t.grad_buf(weight).data(), d);
        if (ngb) conv_bwd_b(dy, t.grad_buf(bias).data(), d.N, d.Cout,
                            static_cast<int64_t>(d.Hout) * d.Wout);
    };
    return push(std::move(out), ngx || ngw || ngb, back);
}

NodeId Tape::dense(NodeId x, NodeId weight, NodeId bias) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(weight);
    const Tensor& bv = value(bias);
    want_rank(xv, 2, "dense input");
    want_rank(wv, 2, "dense weight");
    want_rank(bv, 1, "dense bias");
    const int N = xv.dim(0), Din = xv.dim(1), Dout = wv.dim(0);
    if (wv.dim(1) != Din) {
        throw ShapeError("dense: weight expects " + std::to_string(wv.dim(1)) +
                         " input features, input has " + std::to_string(Din));
    }
    if (bv.dim(0) != Dout) {
        throw ShapeError("dense: bias size " + std::to_string(bv.dim(0)) +
                         " != output features " + std::to_string(Dout));
    }

    Tensor out({N, Dout});
    dense_fwd(xv.data(), wv.data(), bv.data(), out.data(), N, Din, Dout);

    const bool ngx = needs_grad(x), ngw = needs_grad(weight), ngb = needs_grad(bias);
    auto back = [x, weight, bias, N, Din, Dout, ngx, ngw, ngb,
                 out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const float* dy = t.grad(out_id).data();
        if (ngx) dense_bwd_x(dy, t.value(weight).data(), t.grad_buf(x).data(), N, Din, Dout);
        if (ngw) dense_bwd_w(dy, t.value(x).data(), t.grad_buf(weight).data(), N, Din, Dout);
        if (ngb) dense_bwd_b(dy, t.grad_buf(bias).data(), N, Dout);
    };
    return push(std::move(out), ngx || ngw || ngb, back);
}

NodeId Tape::relu(NodeId x) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (int64_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
    const bool ng = needs_grad(x);
    auto back = [x, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        const Tensor& v = t.value(x);
        Tensor& gx = t.grad_buf(x);
        for (int64_t i = 0; i < v.numel(); ++i) {
            if (v[i] > 0.0f) gx[i] += g[i];
        }
    };
    return push(std::move(out), ng, back);
}

NodeId Tape::leaky_relu(NodeId x, float alpha) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (int64_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] > 0.0f ? xv[i] : alpha * xv[i];
    const bool ng = needs_grad(x);
    auto back = [x, alpha, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        const Tensor& v = t.value(x);
        Tensor& gx = t.grad_buf(x);
        for (int64_t i = 0; i < v.numel(); ++i) gx[i] += v[i] > 0.0f ? g[i] : alpha * g[i];
    };
    return push(std::move(out), ng, back);
}

NodeId Tape::sigmoid(NodeId x) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (int64_t i = 0; i < xv.numel(); ++i) {
        out[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(xv[i]))));
    }
    const bool ng = needs_grad(x);
    auto back = [x, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        const Tensor& y = t.value(out_id);
        Tensor& gx = t.grad_buf(x);
        for (int64_t i = 0; i < y.numel(); ++i) gx[i] += g[i] * y[i] * (1.0f - y[i]);
    };
    return push(std::move(out), ng, back);
}

NodeId Tape::softmax(NodeId x, int axis) {
    const Tensor& xv = value(x);
    if (axis < 0 || axis >= xv.rank()) {
        throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(xv.rank()));
    }
    int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= xv.dim(a);
    const int64_t an = xv.dim(axis);
    for (int a = axis + 1; a < xv.rank(); ++a) inner *= xv.dim(a);

    Tensor out(xv.shape());
    std::vector<double> e(static_cast<size_t>(an));
    for (int64_t oi = 0; oi < outer; ++oi) {
        for (int64_t ii = 0; ii < inner; ++ii) {
            const int64_t base = oi * an * inner + ii;
            double mx = xv[base];
            for (int64_t k = 1; k < an; ++k) mx = std::max(mx, static_cast<double>(xv[base + k * inner]));
            double sum = 0.0;
            for (int64_t k = 0; k < an; ++k) {
                e[static_cast<size_t>(k)] = std::exp(static_cast<double>(xv[base + k * inner]) - mx);
                sum += e[static_cast<size_t>(k)];
            }
            for (int64_t k = 0; k < an; ++k) {
                out[base + k * inner] = static_cast<float>(e[static_cast<size_t>(k)] / sum);
            }
        }
    }
    const bool ng = needs_grad(x);
    auto back = [x, outer, an, inner, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        const Tensor& y = t.value(out_id);
        Tensor& gx = t.grad_buf(x);
        for (int64_t oi = 0; oi < outer; ++oi) {
            for (int64_t ii = 0; ii < inner; ++ii) {
                const int64_t base = oi * an * inner + ii;
                double dot = 0.0;
                for (int64_t k = 0; k < an; ++k) {
                    dot += static_cast<double>(y[base + k * inner]) * g[base + k * inner];
                }
                for (int64_t k = 0; k < an; ++k) {
                    const int64_t at = base + k * inner;
                    gx[at] += static_cast<float>(y[at] * (static_cast<double>(g[at]) - dot));
                }
            }
        }
    };
    return push(std::move(out), ng, back);
}

NodeId Tape::reshape(NodeId x, std::vector<int> new_shape) {
    const Tensor& xv = value(x);
    if (numel_of(new_shape) != xv.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(xv.shape()) + " as " +
                         shape_str(new_shape));
    }
    Tensor out(std::move(new_shape), xv.storage());
    const bool ng = needs_grad(x);
    auto back = [x, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        Tensor& gx = t.grad_buf(x);
        for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
    };
    return push(std::move(out), ng, back);
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "add");
    Tensor out(av.shape());
    for (int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
    const bool nga = needs_grad(a), ngb = needs_grad(b);
    auto back = [a, b, nga, ngb, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        if (nga) {
            Tensor& ga = t.grad_buf(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (ngb) {
            Tensor& gb = t.grad_buf(b);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
        }
    };
    NodeId id = push(std::move(out), nga || ngb, back);
    if (value(id).numel() == 1) set_exact(id, scalar_value(a) + scalar_value(b));
    return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "sub");
    Tensor out(av.shape());
    for (int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] - bv[i];
    const bool nga = needs_grad(a), ngb = needs_grad(b);
    auto back = [a, b, nga, ngb, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        if (nga) {
            Tensor& ga = t.grad_buf(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (ngb) {
            Tensor& gb = t.grad_buf(b);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
        }
    };
    NodeId id = push(std::move(out), nga || ngb, back);
    if (value(id).numel() == 1) set_exact(id, scalar_value(a) - scalar_value(b));
    return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "mul");
    Tensor out(av.shape());
    for (int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] * bv[i];
    const bool nga = needs_grad(a), ngb = needs_grad(b);
    auto back = [a, b, nga, ngb, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        if (nga) {
            Tensor& ga = t.grad_buf(a);
            const Tensor& vb = t.value(b);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb[i];
        }
        if (ngb) {
            Tensor& gb = t.grad_buf(b);
            const Tensor& va = t.value(a);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
        }
    };
    NodeId id = push(std::move(out), nga || ngb, back);
    if (value(id).numel() == 1) set_exact(id, scalar_value(a) * scalar_value(b));
    return id;
}

NodeId Tape::scale(NodeId a, double factor) {
    const Tensor& av = value(a);
    Tensor out(av.shape());
    for (int64_t i = 0; i < av.numel(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(av[i]) * factor);
    }
    const bool ng = needs_grad(a);
    auto back = [a, factor, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const Tensor& g = t.grad(out_id);
        Tensor& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) {
            ga[i] += static_cast<float>(static_cast<double>(g[i]) * factor);
        }
    };
    NodeId id = push(std::move(out), ng, back);
    if (value(id).numel() == 1) set_exact(id, scalar_value(a) * factor);
    return id;
}

NodeId Tape::sum_all(NodeId a) {
    const Tensor& av = value(a);
    double acc = 0.0;
    for (int64_t i = 0; i < av.numel(); ++i) acc += av[i];
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    const bool ng = needs_grad(a);
    auto back = [a, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const float g = t.grad(out_id)[0];
        Tensor& ga = t.grad_buf(a);
        for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    };
    NodeId id = push(std::move(out), ng, back);
    set_exact(id, acc);
    return id;
}

NodeId Tape::mse_loss(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "mse_loss");
    const int64_t n = av.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double diff = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
        acc += diff * diff;
    }
    const double mean = acc / static_cast<double>(n);
    Tensor out = Tensor::scalar(static_cast<float>(mean));
    const bool nga = needs_grad(a), ngb = needs_grad(b);
    auto back = [a, b, n, nga, ngb, out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const double g = t.grad(out_id)[0];
        const double c = 2.0 * g / static_cast<double>(n);
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        if (nga) {
            Tensor& ga = t.grad_buf(a);
            for (int64_t i = 0; i < n; ++i) {
                ga[i] += static_cast<float>(c * (static_cast<double>(va[i]) - vb[i]));
            }
        }
        if (ngb) {
            Tensor& gb = t.grad_buf(b);
            for (int64_t i = 0; i < n; ++i) {
                gb[i] -= static_cast<float>(c * (static_cast<double>(va[i]) - vb[i]));
            }
        }
    };
    NodeId id = push(std::move(out), nga || ngb, back);
    set_exact(id, mean);
    return id;
}

NodeId Tape::cross_entropy_loss(NodeId logits, const std::vector<int>& labels) {
    const Tensor& lv = value(logits);
    want_rank(lv, 2, "cross_entropy_loss logits");
    const int N = lv.dim(0), K = lv.dim(1);
    if (static_cast<int>(labels.size()) != N) {
        throw ShapeError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(N) + " rows");
    }
    for (int n = 0; n < N; ++n) {
        if (labels[static_cast<size_t>(n)] < 0 || labels[static_cast<size_t>(n)] >= K) {
            throw DataError("cross_entropy_loss: label " + std::to_string(labels[static_cast<size_t>(n)]) +
                            " out of range [0, " + std::to_string(K) + ") at row " + std::to_string(n));
        }
    }
    // Row losses via log-sum-exp; softmax rows are kept for the backward pass.
    Tensor probs({N, K});
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
        const int64_t base = static_cast<int64_t>(n) * K;
        double mx = lv[base];
        for (int k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(lv[base + k]));
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(static_cast<double>(lv[base + k]) - mx);
        const double lse = mx + std::log(sum);
        acc += lse - static_cast<double>(lv[base + labels[static_cast<size_t>(n)]]);
        for (int k = 0; k < K; ++k) {
            probs[base + k] = static_cast<float>(std::exp(static_cast<double>(lv[base + k]) - mx) / sum);
        }
    }
    const double mean = acc / static_cast<double>(N);
    Tensor out = Tensor::scalar(static_cast<float>(mean));
    const bool ng = needs_grad(logits);
    auto back = [logits, labels, N, K, p = std::move(probs),
                 out_id = static_cast<NodeId>(nodes_.size())](Tape& t) {
        const double g = t.grad(out_id)[0];
        const double c = g / static_cast<double>(N);
        Tensor& gl = t.grad_buf(logits);
        for (int n = 0; n < N; ++n) {
            const int64_t base = static_cast<int64_t>(n) * K;
            const int lab = labels[static_cast<size_t>(n)];
            for (int k = 0; k < K; ++k) {
                const double ind = (k == lab) ? 1.0 : 0.0;
                gl[base + k] += static_cast<float>(c * (static_cast<double>(p[base + k]) - ind));
            }
        }
    };
    NodeId id = push(std::move(out), ng, back);
    set_exact(id, mean);
    return id;
}

} // namespace debias
