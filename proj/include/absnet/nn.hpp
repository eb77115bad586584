#pragma once

// Differentiable building blocks with explicit forward caches and backward
// passes. Backward functions accumulate (+=) into parameter and input
// gradients, so a block used several times sums its contributions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "absnet/kernels.hpp"
#include "absnet/params.hpp"

namespace absnet::nn {

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kLayerNormEps = 1e-8;

template <class T>
T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <class T>
T leaky_relu(T x) {
    return x > T(0) ? x : T(kLeakySlope) * x;
}

template <class T>
T leaky_relu_grad(T pre) {
    return pre > T(0) ? T(1) : T(kLeakySlope);
}

template <class T>
using Vec = std::vector<T>;

template <class T>
std::span<const T> cspan(const std::vector<T>& v) {
    return {v.data(), v.size()};
}

// ---------------------------------------------------------------------------
// Affine map y = W x + b, W stored out x in, row-major.
// ---------------------------------------------------------------------------

struct Linear {
    std::string name;  // parameters <name>.w, <name>.b
    int in = 0;
    int out = 0;

    template <class T>
    void declare(ParameterStore<T>& s) const {
        s.add(name + ".w", {out, in});
        s.add(name + ".b", {out});
    }

    template <class T>
    void forward(const ParameterStore<T>& p, std::span<const T> x, std::span<T> y) const {
        auto b = p.get(name + ".b");
        std::copy(b.begin(), b.end(), y.begin());
        kernels::fast::gemv<T>(p.get(name + ".w"), out, in, x, y);
    }

    template <class T>
    Vec<T> forward(const ParameterStore<T>& p, std::span<const T> x) const {
        Vec<T> y(static_cast<std::size_t>(out));
        forward<T>(p, x, y);
        return y;
    }

    // dx may be empty.
    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, std::span<const T> x, std::span<const T> dy,
                  std::span<T> dx) const {
        kernels::fast::ger<T>(dy, out, x, in, g.get(name + ".w"));
        auto db = g.get(name + ".b");
        for (int i = 0; i < out; ++i) db[i] += dy[i];
        if (!dx.empty()) kernels::fast::gemv_t<T>(p.get(name + ".w"), out, in, dy, dx);
    }
};

// ---------------------------------------------------------------------------
// GRU, gate order [reset, update, candidate]:
//   r = s(Wx_r x + bx_r + Wh_r h + bh_r)
//   z = s(Wx_z x + bx_z + Wh_z h + bh_z)
//   n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n))
//   h' = (1 - z) * n + z * h
// ---------------------------------------------------------------------------

template <class T>
struct GruTrace {
    int steps = 0;
    int hidden = 0;
    Vec<T> h;      // (steps + 1) x H, row 0 = initial state
    Vec<T> r, z, n, hn;  // steps x H

    std::span<const T> state(int t) const { return {h.data() + std::size_t(t + 1) * hidden, std::size_t(hidden)}; }
};

struct Gru {
    std::string name;  // <name>.wx .bx .wh .bh
    int in = 0;
    int hidden = 0;

    template <class T>
    void declare(ParameterStore<T>& s) const {
        s.add(name + ".wx", {3 * hidden, in});
        s.add(name + ".bx", {3 * hidden});
        s.add(name + ".wh", {3 * hidden, hidden});
        s.add(name + ".bh", {3 * hidden});
    }

    // Runs over `inputs` (steps x in) from a zero initial state.
    template <class T>
    GruTrace<T> forward(const ParameterStore<T>& p, const std::vector<std::span<const T>>& inputs) const {
        const int H = hidden;
        const std::size_t uH = std::size_t(H);
        GruTrace<T> tr;
        tr.steps = static_cast<int>(inputs.size());
        tr.hidden = H;
        tr.h.assign(std::size_t(tr.steps + 1) * uH, T(0));
        tr.r.resize(std::size_t(tr.steps) * uH);
        tr.z.resize(tr.r.size());
        tr.n.resize(tr.r.size());
        tr.hn.resize(tr.r.size());
        auto wx = p.get(name + ".wx"), bx = p.get(name + ".bx"), wh = p.get(name + ".wh"), bh = p.get(name + ".bh");
        Vec<T> gx(3 * uH), gh(3 * uH);
        for (int t = 0; t < tr.steps; ++t) {
            std::copy(bx.begin(), bx.end(), gx.begin());
            kernels::fast::gemv<T>(wx, 3 * H, in, inputs[std::size_t(t)], gx);
            std::copy(bh.begin(), bh.end(), gh.begin());
            const T* hp = tr.h.data() + std::size_t(t) * uH;
            kernels::fast::gemv<T>(wh, 3 * H, H, {hp, uH}, gh);
            T* hq = tr.h.data() + std::size_t(t + 1) * uH;
            T* r = tr.r.data() + std::size_t(t) * uH;
            T* z = tr.z.data() + std::size_t(t) * uH;
            T* n = tr.n.data() + std::size_t(t) * uH;
            T* hn = tr.hn.data() + std::size_t(t) * uH;
            for (int k = 0; k < H; ++k) {
                r[k] = sigmoid(gx[k] + gh[k]);
                z[k] = sigmoid(gx[uH + k] + gh[uH + k]);
                hn[k] = gh[2 * uH + k];
                n[k] = std::tanh(gx[2 * uH + k] + r[k] * hn[k]);
                hq[k] = (T(1) - z[k]) * n[k] + z[k] * hp[k];
            }
        }
        return tr;
    }

    // dstates: steps x H gradients on each output state (processing order).
    // dinputs may be empty; otherwise steps spans of width `in`.
    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, const std::vector<std::span<const T>>& inputs,
                  const GruTrace<T>& tr, std::span<const T> dstates, const std::vector<std::span<T>>& dinputs) const {
        const int H = hidden;
        const std::size_t uH = std::size_t(H);
        auto wx = p.get(name + ".wx"), wh = p.get(name + ".wh");
        auto dwx = g.get(name + ".wx"), dbx = g.get(name + ".bx"), dwh = g.get(name + ".wh"), dbh = g.get(name + ".bh");
        Vec<T> dh_next(uH, T(0)), gxg(3 * uH), ghg(3 * uH);
        for (int t = tr.steps - 1; t >= 0; --t) {
            const T* hp = tr.h.data() + std::size_t(t) * uH;
            const T* r = tr.r.data() + std::size_t(t) * uH;
            const T* z = tr.z.data() + std::size_t(t) * uH;
            const T* n = tr.n.data() + std::size_t(t) * uH;
            const T* hn = tr.hn.data() + std::size_t(t) * uH;
            for (int k = 0; k < H; ++k) {
                const T d = dstates[std::size_t(t) * uH + k] + dh_next[k];
                const T dn = d * (T(1) - z[k]);
                const T dz = d * (hp[k] - n[k]);
                dh_next[k] = d * z[k];
                const T dan = dn * (T(1) - n[k] * n[k]);
                const T dr = dan * hn[k];
                const T dar = dr * r[k] * (T(1) - r[k]);
                const T daz = dz * z[k] * (T(1) - z[k]);
                gxg[k] = dar;
                gxg[uH + k] = daz;
                gxg[2 * uH + k] = dan;
                ghg[k] = dar;
                ghg[uH + k] = daz;
                ghg[2 * uH + k] = dan * r[k];
            }
            kernels::fast::ger<T>(gxg, 3 * H, inputs[std::size_t(t)], in, dwx);
            kernels::fast::ger<T>(ghg, 3 * H, {hp, uH}, H, dwh);
            for (std::size_t k = 0; k < 3 * uH; ++k) {
                dbx[k] += gxg[k];
                dbh[k] += ghg[k];
            }
            if (!dinputs.empty()) kernels::fast::gemv_t<T>(wx, 3 * H, in, gxg, dinputs[std::size_t(t)]);
            kernels::fast::gemv_t<T>(wh, 3 * H, H, ghg, dh_next);
        }
    }
};

// ---------------------------------------------------------------------------
// LSTM with a constant input per sequence; gate order [input, forget, cell,
// output]. The input projection Wx x + b is computed once per sequence.
// ---------------------------------------------------------------------------

template <class T>
struct LstmTrace {
    int steps = 0;
    int hidden = 0;
    Vec<T> xg;        // 4H, Wx x + b
    Vec<T> h, c;      // (steps + 1) x H
    Vec<T> gates;     // steps x 4H, post-activation

    std::span<const T> state(int t) const { return {h.data() + std::size_t(t + 1) * hidden, std::size_t(hidden)}; }
};

struct Lstm {
    std::string name;  // <name>.wx .wh .b
    int in = 0;
    int hidden = 0;

    template <class T>
    void declare(ParameterStore<T>& s) const {
        s.add(name + ".wx", {4 * hidden, in});
        s.add(name + ".wh", {4 * hidden, hidden});
        s.add(name + ".b", {4 * hidden});
    }

    template <class T>
    LstmTrace<T> forward(const ParameterStore<T>& p, std::span<const T> x, std::span<const T> h0, int steps) const {
        const int H = hidden;
        const std::size_t uH = std::size_t(H);
        LstmTrace<T> tr;
        tr.steps = steps;
        tr.hidden = H;
        auto b = p.get(name + ".b");
        tr.xg.assign(b.begin(), b.end());
        kernels::fast::gemv<T>(p.get(name + ".wx"), 4 * H, in, x, tr.xg);
        tr.h.assign(std::size_t(steps + 1) * uH, T(0));
        tr.c.assign(std::size_t(steps + 1) * uH, T(0));
        std::copy(h0.begin(), h0.end(), tr.h.begin());
        tr.gates.resize(std::size_t(steps) * 4 * uH);
        auto wh = p.get(name + ".wh");
        Vec<T> pre(4 * uH);
        for (int t = 0; t < steps; ++t) {
            std::copy(tr.xg.begin(), tr.xg.end(), pre.begin());
            const T* hp = tr.h.data() + std::size_t(t) * uH;
            const T* cp = tr.c.data() + std::size_t(t) * uH;
            kernels::fast::gemv<T>(wh, 4 * H, H, {hp, uH}, pre);
            T* gt = tr.gates.data() + std::size_t(t) * 4 * uH;
            T* hq = tr.h.data() + std::size_t(t + 1) * uH;
            T* cq = tr.c.data() + std::size_t(t + 1) * uH;
            for (int k = 0; k < H; ++k) {
                const T i = sigmoid(pre[k]);
                const T f = sigmoid(pre[uH + k]);
                const T gg = std::tanh(pre[2 * uH + k]);
                const T o = sigmoid(pre[3 * uH + k]);
                gt[k] = i;
                gt[uH + k] = f;
                gt[2 * uH + k] = gg;
                gt[3 * uH + k] = o;
                cq[k] = f * cp[k] + i * gg;
                hq[k] = o * std::tanh(cq[k]);
            }
        }
        return tr;
    }

    // dstates: steps x H. Accumulates into dx and dh0 (either may be empty).
    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, std::span<const T> x, const LstmTrace<T>& tr,
                  std::span<const T> dstates, std::span<T> dx, std::span<T> dh0) const {
        const int H = hidden;
        const std::size_t uH = std::size_t(H);
        auto wh = p.get(name + ".wh");
        auto dwh = g.get(name + ".wh");
        Vec<T> dh_next(uH, T(0)), dc_next(uH, T(0)), da(4 * uH), dxg(4 * uH, T(0));
        for (int t = tr.steps - 1; t >= 0; --t) {
            const T* hp = tr.h.data() + std::size_t(t) * uH;
            const T* cp = tr.c.data() + std::size_t(t) * uH;
            const T* cq = tr.c.data() + std::size_t(t + 1) * uH;
            const T* gt = tr.gates.data() + std::size_t(t) * 4 * uH;
            for (int k = 0; k < H; ++k) {
                const T i = gt[k], f = gt[uH + k], gg = gt[2 * uH + k], o = gt[3 * uH + k];
                const T dh = dstates[std::size_t(t) * uH + k] + dh_next[k];
                const T tc = std::tanh(cq[k]);
                const T dc = dc_next[k] + dh * o * (T(1) - tc * tc);
                da[k] = dc * gg * i * (T(1) - i);
                da[uH + k] = dc * cp[k] * f * (T(1) - f);
                da[2 * uH + k] = dc * i * (T(1) - gg * gg);
                da[3 * uH + k] = dh * tc * o * (T(1) - o);
                dc_next[k] = dc * f;
                dh_next[k] = T(0);
            }
            kernels::fast::ger<T>(da, 4 * H, {hp, uH}, H, dwh);
            kernels::fast::gemv_t<T>(wh, 4 * H, H, da, dh_next);
            for (std::size_t k = 0; k < 4 * uH; ++k) dxg[k] += da[k];
        }
        kernels::fast::ger<T>(dxg, 4 * H, x, in, g.get(name + ".wx"));
        auto db = g.get(name + ".b");
        for (std::size_t k = 0; k < 4 * uH; ++k) db[k] += dxg[k];
        if (!dx.empty()) kernels::fast::gemv_t<T>(p.get(name + ".wx"), 4 * H, in, dxg, dx);
        if (!dh0.empty())
            for (int k = 0; k < H; ++k) dh0[k] += dh_next[k];
    }
};

// ---------------------------------------------------------------------------
// Layer normalisation over one vector: y = gain * (x - mean) / sd + bias.
// ---------------------------------------------------------------------------

template <class T>
struct LayerNormTrace {
    Vec<T> xhat;
    T inv_sd = 0;
};

struct LayerNorm {
    std::string name;  // <name>.gain .bias
    int width = 0;

    template <class T>
    void declare(ParameterStore<T>& s) const {
        s.add(name + ".gain", {width});
        s.add(name + ".bias", {width});
    }

    template <class T>
    static LayerNormTrace<T> normalize(std::span<const T> x) {
        LayerNormTrace<T> tr;
        const std::size_t n = x.size();
        T mean = 0;
        for (T v : x) mean += v;
        mean /= T(n);
        T var = 0;
        for (T v : x) var += (v - mean) * (v - mean);
        var /= T(n);
        tr.inv_sd = T(1) / std::sqrt(var + T(kLayerNormEps));
        tr.xhat.resize(n);
        for (std::size_t k = 0; k < n; ++k) tr.xhat[k] = (x[k] - mean) * tr.inv_sd;
        return tr;
    }

    template <class T>
    LayerNormTrace<T> forward(const ParameterStore<T>& p, std::span<const T> x, std::span<T> y) const {
        auto tr = normalize<T>(x);
        auto gain = p.get(name + ".gain"), bias = p.get(name + ".bias");
        for (int k = 0; k < width; ++k) y[k] = gain[k] * tr.xhat[k] + bias[k];
        return tr;
    }

    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, const LayerNormTrace<T>& tr, std::span<const T> dy,
                  std::span<T> dx) const {
        auto gain = p.get(name + ".gain");
        auto dgain = g.get(name + ".gain"), dbias = g.get(name + ".bias");
        Vec<T> dxhat(static_cast<std::size_t>(width));
        T mean_d = 0, mean_dx = 0;
        for (int k = 0; k < width; ++k) {
            dgain[k] += dy[k] * tr.xhat[k];
            dbias[k] += dy[k];
            dxhat[k] = dy[k] * gain[k];
            mean_d += dxhat[k];
            mean_dx += dxhat[k] * tr.xhat[k];
        }
        mean_d /= T(width);
        mean_dx /= T(width);
        for (int k = 0; k < width; ++k) dx[k] += tr.inv_sd * (dxhat[k] - mean_d - tr.xhat[k] * mean_dx);
    }
};

// ---------------------------------------------------------------------------
// Attention pooling with an external query:
//   u_t = tanh(Wu s_t + bu),  e_t = u_t . q,  a = softmax(e),  out = sum a_t s_t
// ---------------------------------------------------------------------------

template <class T>
struct AttentionTrace {
    int steps = 0;
    Vec<T> u;       // steps x A
    Vec<T> weights; // steps
};

struct AttentionPool {
    Linear proj;  // D -> A

    template <class T>
    void declare(ParameterStore<T>& s) const {
        proj.declare(s);
    }

    // states: steps spans of width proj.in. out must have width proj.in.
    template <class T>
    AttentionTrace<T> forward(const ParameterStore<T>& p, const std::vector<std::span<const T>>& states,
                              std::span<const T> query, std::span<T> out) const {
        const int A = proj.out;
        AttentionTrace<T> tr;
        tr.steps = static_cast<int>(states.size());
        std::fill(out.begin(), out.end(), T(0));
        if (tr.steps == 0) return tr;
        tr.u.resize(std::size_t(tr.steps) * A);
        tr.weights.resize(std::size_t(tr.steps));
        T max_score = -std::numeric_limits<T>::infinity();
        for (int t = 0; t < tr.steps; ++t) {
            std::span<T> u{tr.u.data() + std::size_t(t) * A, std::size_t(A)};
            proj.forward<T>(p, states[std::size_t(t)], u);
            T e = 0;
            for (int k = 0; k < A; ++k) {
                u[k] = std::tanh(u[k]);
                e += u[k] * query[k];
            }
            tr.weights[std::size_t(t)] = e;
            max_score = std::max(max_score, e);
        }
        T z = 0;
        for (auto& w : tr.weights) {
            w = std::exp(w - max_score);
            z += w;
        }
        for (auto& w : tr.weights) w /= z;
        for (int t = 0; t < tr.steps; ++t) {
            const T w = tr.weights[std::size_t(t)];
            const auto& s = states[std::size_t(t)];
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * s[k];
        }
        return tr;
    }

    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, const std::vector<std::span<const T>>& states,
                  std::span<const T> query, const AttentionTrace<T>& tr, std::span<const T> dout,
                  const std::vector<std::span<T>>& dstates, std::span<T> dquery) const {
        const int A = proj.out;
        if (tr.steps == 0) return;
        Vec<T> dw(static_cast<std::size_t>(tr.steps));
        T weighted = 0;
        for (int t = 0; t < tr.steps; ++t) {
            const auto& s = states[std::size_t(t)];
            T d = 0;
            for (std::size_t k = 0; k < dout.size(); ++k) d += s[k] * dout[k];
            dw[std::size_t(t)] = d;
            weighted += tr.weights[std::size_t(t)] * d;
        }
        Vec<T> da(static_cast<std::size_t>(A));
        for (int t = 0; t < tr.steps; ++t) {
            const T w = tr.weights[std::size_t(t)];
            auto& ds = dstates[std::size_t(t)];
            for (std::size_t k = 0; k < dout.size(); ++k) ds[k] += w * dout[k];
            const T de = w * (dw[std::size_t(t)] - weighted);
            const T* u = tr.u.data() + std::size_t(t) * A;
            for (int k = 0; k < A; ++k) {
                dquery[k] += de * u[k];
                da[std::size_t(k)] = de * query[k] * (T(1) - u[k] * u[k]);
            }
            proj.backward<T>(p, g, states[std::size_t(t)], da, ds);
        }
    }
};

// ---------------------------------------------------------------------------
// 3x3 convolution (padding 1) on CHW tensors.
// ---------------------------------------------------------------------------

struct Conv3x3 {
    std::string name;  // <name>.w (out, in, 3, 3), <name>.b
    int in = 0;
    int out = 0;
    int stride = 1;

    template <class T>
    void declare(ParameterStore<T>& s) const {
        s.add(name + ".w", {out, in, 3, 3});
        s.add(name + ".b", {out});
    }

    kernels::ConvShape shape(int h, int w) const { return {in, out, h, w, stride}; }

    template <class T>
    Vec<T> forward(const ParameterStore<T>& p, std::span<const T> x, int h, int w) const {
        auto s = shape(h, w);
        Vec<T> y(std::size_t(out) * s.out_height() * s.out_width());
        kernels::fast::conv3x3_forward<T>(s, x, p.get(name + ".w"), p.get(name + ".b"), y);
        return y;
    }

    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, std::span<const T> x, int h, int w,
                  std::span<const T> dy, std::span<T> dx) const {
        kernels::fast::conv3x3_backward<T>(shape(h, w), x, p.get(name + ".w"), dy, dx, g.get(name + ".w"),
                                           g.get(name + ".b"));
    }
};

}  // namespace absnet::nn
