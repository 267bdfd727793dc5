#include "restain/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace restain::nn {

namespace {

NodePtr make_op(Tensor value, std::string name, std::vector<NodePtr> inputs) {
    check_finite(value, name);
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->name = std::move(name);
    n->inputs = std::move(inputs);
    return n;
}

// Whether backward needs d(loss)/d(node): true for interior nodes and for
// leaves that asked for a gradient.
bool wants_grad(const Node* n) {
    return n->requiresGrad || static_cast<bool>(n->backprop);
}

// Generic pointwise op. Deriv receives (input value, output value).
Var pointwise(Var x, const std::string& name, std::function<double(double)> f,
              std::function<double(double, double)> deriv) {
    const Tensor& xv = x.val();
    Tensor out(xv.n, xv.c, xv.h, xv.w);
    for (std::size_t i = 0; i < xv.size(); ++i)
        out.data[i] = f(xv.data[i]);
    NodePtr node = make_op(std::move(out), name, {x.node});
    Node* raw = node.get();
    Node* xn = x.node.get();
    node->backprop = [raw, xn, deriv = std::move(deriv)]() {
        const std::vector<double>& g = raw->grad.data;
        const std::vector<double>& in = xn->value.data;
        const std::vector<double>& ov = raw->value.data;
        std::vector<double>& xg = xn->grad_buf().data;
        for (std::size_t i = 0; i < g.size(); ++i)
            xg[i] += g[i] * deriv(in[i], ov[i]);
    };
    return Var{node};
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& name) {
    if (!a.same_shape(b))
        throw Error(name + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// Index bounds of the output positions whose receptive field stays inside
// the input along one axis: o in [lo, hi] with 0 <= o*stride + k - pad < extent.
std::pair<int, int> valid_range(int k, int pad, int stride, int extent, int outExtent) {
    const int t = pad - k;
    int lo = t > 0 ? (t + stride - 1) / stride : 0;
    int hi = extent - 1 - (k - pad);
    if (hi < 0)
        return {1, 0}; // empty
    hi /= stride;
    return {lo, std::min(hi, outExtent - 1)};
}

} // namespace

Var conv2d(Var x, Var w, Var b, int stride, int pad, const std::string& name) {
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    const Tensor& bv = b.val();
    if (wv.c != xv.c)
        throw Error(name + ": input has " + std::to_string(xv.c) + " channels, weights expect " +
                    std::to_string(wv.c));
    if (bv.n != 1 || bv.c != wv.n || bv.h != 1 || bv.w != 1)
        throw Error(name + ": bias shape " + bv.shape_str() + " does not match " +
                    std::to_string(wv.n) + " output channels");
    if (stride < 1 || pad < 0)
        throw Error(name + ": invalid stride/pad");

    const int N = xv.n, C = xv.c, H = xv.h, W = xv.w;
    const int O = wv.n, K = wv.h, KW = wv.w;
    const int Ho = (H + 2 * pad - K) / stride + 1;
    const int Wo = (W + 2 * pad - KW) / stride + 1;
    if (Ho < 1 || Wo < 1)
        throw Error(name + ": kernel larger than padded input");

    Tensor out(N, O, Ho, Wo);
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
            const double bias = bv.data[o];
            for (int i = 0; i < Ho; ++i) {
                double* orow = out.row(n, o, i);
                std::fill(orow, orow + Wo, bias);
            }
            for (int c = 0; c < C; ++c)
                for (int u = 0; u < K; ++u) {
                    const auto [ilo, ihi] = valid_range(u, pad, stride, H, Ho);
                    for (int v = 0; v < KW; ++v) {
                        const double wgt = wv.at(o, c, u, v);
                        const auto [jlo, jhi] = valid_range(v, pad, stride, W, Wo);
                        for (int i = ilo; i <= ihi; ++i) {
                            const double* xr = xv.row(n, c, i * stride + u - pad);
                            const double* xp = xr + (jlo * stride + v - pad);
                            double* orow = out.row(n, o, i);
                            for (int j = jlo; j <= jhi; ++j, xp += stride)
                                orow[j] += wgt * *xp;
                        }
                    }
                }
        }

    NodePtr node = make_op(std::move(out), name, {x.node, w.node, b.node});
    Node* raw = node.get();
    Node* xn = x.node.get();
    Node* wn = w.node.get();
    Node* bn = b.node.get();
    node->backprop = [raw, xn, wn, bn, stride, pad]() {
        const Tensor& g = raw->grad;
        const Tensor& xval = xn->value;
        const Tensor& wval = wn->value;
        const int N = xval.n, C = xval.c, H = xval.h, W = xval.w;
        const int O = wval.n, K = wval.h, KW = wval.w;
        const int Ho = g.h, Wo = g.w;
        const bool needX = wants_grad(xn);

        Tensor& wg = wn->grad_buf();
        Tensor& bg = bn->grad_buf();
        Tensor* xg = needX ? &xn->grad_buf() : nullptr;

        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) {
                double bacc = 0;
                for (int i = 0; i < Ho; ++i) {
                    const double* gr = g.row(n, o, i);
                    for (int j = 0; j < Wo; ++j)
                        bacc += gr[j];
                }
                bg.data[o] += bacc;

                for (int c = 0; c < C; ++c)
                    for (int u = 0; u < K; ++u) {
                        const auto [ilo, ihi] = valid_range(u, pad, stride, H, Ho);
                        for (int v = 0; v < KW; ++v) {
                            const auto [jlo, jhi] = valid_range(v, pad, stride, W, Wo);
                            const double wgt = wval.at(o, c, u, v);
                            double wacc = 0;
                            for (int i = ilo; i <= ihi; ++i) {
                                const int y = i * stride + u - pad;
                                const double* gr = g.row(n, o, i);
                                const double* xp = xval.row(n, c, y) + (jlo * stride + v - pad);
                                if (needX) {
                                    double* dxp = xg->row(n, c, y) + (jlo * stride + v - pad);
                                    for (int j = jlo; j <= jhi; ++j, xp += stride, dxp += stride) {
                                        wacc += gr[j] * *xp;
                                        *dxp += wgt * gr[j];
                                    }
                                } else {
                                    for (int j = jlo; j <= jhi; ++j, xp += stride)
                                        wacc += gr[j] * *xp;
                                }
                            }
                            wg.at(o, c, u, v) += wacc;
                        }
                    }
            }
    };
    return Var{node};
}

Var leaky_relu(Var x, double slope) {
    return pointwise(
        x, "leaky_relu", [slope](double v) { return v >= 0 ? v : slope * v; },
        [slope](double v, double) { return v >= 0 ? 1.0 : slope; });
}

Var relu(Var x) {
    return pointwise(
        x, "relu", [](double v) { return v > 0 ? v : 0.0; },
        [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
    return pointwise(
        x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double o) { return o * (1.0 - o); });
}

Var tanh_act(Var x) {
    return pointwise(
        x, "tanh", [](double v) { return std::tanh(v); },
        [](double, double o) { return 1.0 - o * o; });
}

Var upsample2(Var x) {
    const Tensor& xv = x.val();
    Tensor out(xv.n, xv.c, xv.h * 2, xv.w * 2);
    for (int n = 0; n < xv.n; ++n)
        for (int c = 0; c < xv.c; ++c)
            for (int y = 0; y < out.h; ++y) {
                const double* src = xv.row(n, c, y / 2);
                double* dst = out.row(n, c, y);
                for (int xcol = 0; xcol < out.w; ++xcol)
                    dst[xcol] = src[xcol / 2];
            }
    NodePtr node = make_op(std::move(out), "upsample2", {x.node});
    Node* raw = node.get();
    Node* xn = x.node.get();
    node->backprop = [raw, xn]() {
        const Tensor& g = raw->grad;
        Tensor& xg = xn->grad_buf();
        for (int n = 0; n < g.n; ++n)
            for (int c = 0; c < g.c; ++c)
                for (int y = 0; y < g.h; ++y) {
                    const double* gr = g.row(n, c, y);
                    double* xr = xg.row(n, c, y / 2);
                    for (int xcol = 0; xcol < g.w; ++xcol)
                        xr[xcol / 2] += gr[xcol];
                }
    };
    return Var{node};
}

Var concat_c(Var a, Var b) {
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    if (av.n != bv.n || av.h != bv.h || av.w != bv.w)
        throw Error("concat_c: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out(av.n, av.c + bv.c, av.h, av.w);
    const std::size_t plane = static_cast<std::size_t>(av.h) * av.w;
    for (int n = 0; n < av.n; ++n) {
        std::copy_n(&av.data[n * av.c * plane], av.c * plane, &out.data[n * out.c * plane]);
        std::copy_n(&bv.data[n * bv.c * plane], bv.c * plane,
                    &out.data[n * out.c * plane + av.c * plane]);
    }
    NodePtr node = make_op(std::move(out), "concat_c", {a.node, b.node});
    Node* raw = node.get();
    Node* an = a.node.get();
    Node* bn = b.node.get();
    node->backprop = [raw, an, bn, plane]() {
        const Tensor& g = raw->grad;
        Tensor& ag = an->grad_buf();
        Tensor& bg = bn->grad_buf();
        const int ac = an->value.c, bc = bn->value.c;
        for (int n = 0; n < g.n; ++n) {
            const double* gp = &g.data[n * g.c * plane];
            double* ap = &ag.data[n * ac * plane];
            double* bp = &bg.data[n * bc * plane];
            for (std::size_t i = 0; i < ac * plane; ++i)
                ap[i] += gp[i];
            for (std::size_t i = 0; i < bc * plane; ++i)
                bp[i] += gp[ac * plane + i];
        }
    };
    return Var{node};
}

Var add(Var a, Var b) {
    require_same_shape(a.val(), b.val(), "add");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] += b.val().data[i];
    NodePtr node = make_op(std::move(out), "add", {a.node, b.node});
    Node* raw = node.get();
    Node* an = a.node.get();
    Node* bn = b.node.get();
    node->backprop = [raw, an, bn]() {
        const auto& g = raw->grad.data;
        auto& ag = an->grad_buf().data;
        auto& bg = bn->grad_buf().data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ag[i] += g[i];
            bg[i] += g[i];
        }
    };
    return Var{node};
}

Var sub(Var a, Var b) {
    require_same_shape(a.val(), b.val(), "sub");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] -= b.val().data[i];
    NodePtr node = make_op(std::move(out), "sub", {a.node, b.node});
    Node* raw = node.get();
    Node* an = a.node.get();
    Node* bn = b.node.get();
    node->backprop = [raw, an, bn]() {
        const auto& g = raw->grad.data;
        auto& ag = an->grad_buf().data;
        auto& bg = bn->grad_buf().data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ag[i] += g[i];
            bg[i] -= g[i];
        }
    };
    return Var{node};
}

Var mul(Var a, Var b) {
    require_same_shape(a.val(), b.val(), "mul");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] *= b.val().data[i];
    NodePtr node = make_op(std::move(out), "mul", {a.node, b.node});
    Node* raw = node.get();
    Node* an = a.node.get();
    Node* bn = b.node.get();
    node->backprop = [raw, an, bn]() {
        const auto& g = raw->grad.data;
        auto& ag = an->grad_buf().data;
        auto& bg = bn->grad_buf().data;
        const auto& av = an->value.data;
        const auto& bv = bn->value.data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ag[i] += g[i] * bv[i];
            bg[i] += g[i] * av[i];
        }
    };
    return Var{node};
}

Var add_scalar(Var x, double k) {
    return pointwise(
        x, "add_scalar", [k](double v) { return v + k; }, [](double, double) { return 1.0; });
}

Var mul_scalar(Var x, double k) {
    return pointwise(
        x, "mul_scalar", [k](double v) { return v * k; }, [k](double, double) { return k; });
}

Var abs_val(Var x) {
    return pointwise(
        x, "abs", [](double v) { return std::abs(v); },
        [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var log_val(Var x) {
    return pointwise(
        x, "log", [](double v) { return std::log(v); },
        [](double v, double) { return 1.0 / v; });
}

Var clamp_val(Var x, double lo, double hi) {
    return pointwise(
        x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
        [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Var unary_map(Var x, std::function<double(double)> f, std::function<double(double)> dfdx,
              const std::string& name) {
    return pointwise(
        x, name, std::move(f),
        [d = std::move(dfdx)](double v, double) { return d(v); });
}

Var channel_matmul3(Var x, const std::array<double, 9>& m, const std::string& name) {
    const Tensor& xv = x.val();
    if (xv.c != 3)
        throw Error(name + ": expected 3 channels, got " + std::to_string(xv.c));
    Tensor out(xv.n, 3, xv.h, xv.w);
    for (int n = 0; n < xv.n; ++n)
        for (int y = 0; y < xv.h; ++y) {
            const double* x0 = xv.row(n, 0, y);
            const double* x1 = xv.row(n, 1, y);
            const double* x2 = xv.row(n, 2, y);
            for (int k = 0; k < 3; ++k) {
                double* o = out.row(n, k, y);
                const double m0 = m[k * 3], m1 = m[k * 3 + 1], m2 = m[k * 3 + 2];
                for (int j = 0; j < xv.w; ++j)
                    o[j] = m0 * x0[j] + m1 * x1[j] + m2 * x2[j];
            }
        }
    NodePtr node = make_op(std::move(out), name, {x.node});
    Node* raw = node.get();
    Node* xn = x.node.get();
    node->backprop = [raw, xn, m]() {
        const Tensor& g = raw->grad;
        Tensor& xg = xn->grad_buf();
        for (int n = 0; n < g.n; ++n)
            for (int y = 0; y < g.h; ++y) {
                const double* g0 = g.row(n, 0, y);
                const double* g1 = g.row(n, 1, y);
                const double* g2 = g.row(n, 2, y);
                for (int j2 = 0; j2 < 3; ++j2) {
                    double* xr = xg.row(n, j2, y);
                    const double m0 = m[j2], m1 = m[3 + j2], m2 = m[6 + j2];
                    for (int j = 0; j < g.w; ++j)
                        xr[j] += m0 * g0[j] + m1 * g1[j] + m2 * g2[j];
                }
            }
    };
    return Var{node};
}

Var select_channel(Var x, int channel) {
    const Tensor& xv = x.val();
    if (channel < 0 || channel >= xv.c)
        throw Error("select_channel: channel " + std::to_string(channel) + " out of range");
    Tensor out(xv.n, 1, xv.h, xv.w);
    const std::size_t plane = static_cast<std::size_t>(xv.h) * xv.w;
    for (int n = 0; n < xv.n; ++n)
        std::copy_n(xv.row(n, channel, 0), plane, out.row(n, 0, 0));
    NodePtr node = make_op(std::move(out), "select_channel", {x.node});
    Node* raw = node.get();
    Node* xn = x.node.get();
    node->backprop = [raw, xn, channel, plane]() {
        const Tensor& g = raw->grad;
        Tensor& xg = xn->grad_buf();
        for (int n = 0; n < g.n; ++n) {
            const double* gp = g.row(n, 0, 0);
            double* xp = xg.row(n, channel, 0);
            for (std::size_t i = 0; i < plane; ++i)
                xp[i] += gp[i];
        }
    };
    return Var{node};
}

Var stack3(Var c0, Var c1, Var c2) {
    const Tensor& v0 = c0.val();
    require_same_shape(v0, c1.val(), "stack3");
    require_same_shape(v0, c2.val(), "stack3");
    if (v0.c != 1)
        throw Error("stack3: inputs must be single-channel");
    Tensor out(v0.n, 3, v0.h, v0.w);
    const std::size_t plane = static_cast<std::size_t>(v0.h) * v0.w;
    const Tensor* src[3] = {&v0, &c1.val(), &c2.val()};
    for (int n = 0; n < v0.n; ++n)
        for (int c = 0; c < 3; ++c)
            std::copy_n(src[c]->row(n, 0, 0), plane, out.row(n, c, 0));
    NodePtr node = make_op(std::move(out), "stack3", {c0.node, c1.node, c2.node});
    Node* raw = node.get();
    Node* in[3] = {c0.node.get(), c1.node.get(), c2.node.get()};
    node->backprop = [raw, n0 = in[0], n1 = in[1], n2 = in[2], plane]() {
        const Tensor& g = raw->grad;
        Node* nodes[3] = {n0, n1, n2};
        for (int n = 0; n < g.n; ++n)
            for (int c = 0; c < 3; ++c) {
                const double* gp = g.row(n, c, 0);
                double* xp = nodes[c]->grad_buf().row(n, 0, 0);
                for (std::size_t i = 0; i < plane; ++i)
                    xp[i] += gp[i];
            }
    };
    return Var{node};
}

Var mean_all(Var x) {
    const Tensor& xv = x.val();
    Tensor out(1, 1, 1, 1);
    double s = 0;
    for (double v : xv.data)
        s += v;
    out.data[0] = s / static_cast<double>(xv.size());
    NodePtr node = make_op(std::move(out), "mean_all", {x.node});
    Node* raw = node.get();
    Node* xn = x.node.get();
    node->backprop = [raw, xn]() {
        const double g = raw->grad.data[0] / static_cast<double>(xn->value.size());
        auto& xg = xn->grad_buf().data;
        for (double& v : xg)
            v += g;
    };
    return Var{node};
}

Var sum_all(Var x) {
    const Tensor& xv = x.val();
    Tensor out(1, 1, 1, 1);
    double s = 0;
    for (double v : xv.data)
        s += v;
    out.data[0] = s;
    NodePtr node = make_op(std::move(out), "sum_all", {x.node});
    Node* raw = node.get();
    Node* xn = x.node.get();
    node->backprop = [raw, xn]() {
        const double g = raw->grad.data[0];
        auto& xg = xn->grad_buf().data;
        for (double& v : xg)
            v += g;
    };
    return Var{node};
}

} // namespace restain::nn
