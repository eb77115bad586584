#pragma once

// Dense kernels used by every network block.
//
// Two implementations are kept side by side:
//   kernels::ref   straightforward per-element formulas, serial. Used as the
//                  oracle in tests and as the baseline in benchmarks.
//   kernels::fast  contiguous SIMD inner loops (convolutions go through a
//                  patch matrix), with OpenMP work sharing over an output
//                  dimension.
//
// Every output element of a `fast` kernel is produced by exactly one thread
// with a fixed summation order, so results do not depend on the thread count.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace absnet::kernels {

struct ConvShape {
    int in_channels = 0;
    int out_channels = 0;
    int height = 0;  // input
    int width = 0;   // input
    int stride = 1;

    // 3x3 kernel, padding 1.
    int out_height() const { return (height - 1) / stride + 1; }
    int out_width() const { return (width - 1) / stride + 1; }
    std::size_t weight_size() const { return std::size_t(out_channels) * in_channels * 9; }
};

inline int upsampled_size(int in, double factor) {
    return static_cast<int>(in * factor + 0.5);
}

void set_threads(int n);
int max_threads();

// Work below this many multiply-adds is not worth a parallel region.
inline constexpr long kParallelThreshold = 1L << 15;

namespace ref {

template <class T>
void gemv(std::span<const T> w, int rows, int cols, std::span<const T> x, std::span<T> y) {
    for (int r = 0; r < rows; ++r) {
        T acc = 0;
        for (int c = 0; c < cols; ++c) acc += w[std::size_t(r) * cols + c] * x[c];
        y[r] += acc;
    }
}

template <class T>
void gemv_t(std::span<const T> w, int rows, int cols, std::span<const T> g, std::span<T> dx) {
    for (int c = 0; c < cols; ++c) {
        T acc = 0;
        for (int r = 0; r < rows; ++r) acc += w[std::size_t(r) * cols + c] * g[r];
        dx[c] += acc;
    }
}

template <class T>
void ger(std::span<const T> g, int rows, std::span<const T> x, int cols, std::span<T> dw) {
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) dw[std::size_t(r) * cols + c] += g[r] * x[c];
}

template <class T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> w,
                     std::span<const T> b, std::span<T> out) {
    const int ho = s.out_height(), wo = s.out_width();
    for (int oc = 0; oc < s.out_channels; ++oc)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                T acc = b[oc];
                for (int ic = 0; ic < s.in_channels; ++ic)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy * s.stride + ky - 1;
                            const int ix = ox * s.stride + kx - 1;
                            if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                            acc += w[((std::size_t(oc) * s.in_channels + ic) * 3 + ky) * 3 + kx] *
                                   in[(std::size_t(ic) * s.height + iy) * s.width + ix];
                        }
                out[(std::size_t(oc) * ho + oy) * wo + ox] = acc;
            }
}

template <class T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> w,
                      std::span<const T> dout, std::span<T> din, std::span<T> dw, std::span<T> db) {
    const int ho = s.out_height(), wo = s.out_width();
    for (int oc = 0; oc < s.out_channels; ++oc)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                const T g = dout[(std::size_t(oc) * ho + oy) * wo + ox];
                db[oc] += g;
                for (int ic = 0; ic < s.in_channels; ++ic)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy * s.stride + ky - 1;
                            const int ix = ox * s.stride + kx - 1;
                            if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                            const std::size_t wi = ((std::size_t(oc) * s.in_channels + ic) * 3 + ky) * 3 + kx;
                            const std::size_t ii = (std::size_t(ic) * s.height + iy) * s.width + ix;
                            dw[wi] += g * in[ii];
                            if (!din.empty()) din[ii] += g * w[wi];
                        }
            }
}

template <class T>
void upsample_nearest(int channels, int in_h, int in_w, int out_h, int out_w, std::span<const T> in,
                      std::span<T> out) {
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                const int sy = static_cast<int>(static_cast<long>(y) * in_h / out_h);
                const int sx = static_cast<int>(static_cast<long>(x) * in_w / out_w);
                out[(std::size_t(c) * out_h + y) * out_w + x] = in[(std::size_t(c) * in_h + sy) * in_w + sx];
            }
}

template <class T>
void upsample_nearest_backward(int channels, int in_h, int in_w, int out_h, int out_w,
                               std::span<const T> dout, std::span<T> din) {
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                const int sy = static_cast<int>(static_cast<long>(y) * in_h / out_h);
                const int sx = static_cast<int>(static_cast<long>(x) * in_w / out_w);
                din[(std::size_t(c) * in_h + sy) * in_w + sx] += dout[(std::size_t(c) * out_h + y) * out_w + x];
            }
}

}  // namespace ref

namespace fast {

namespace detail {

// Fixed-order SIMD dot product.
template <class T>
T dot(const T* a, const T* b, int n) {
    T acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
void axpy(T* y, const T* x, T a, int n) {
#pragma omp simd
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// Per-thread scratch reused across calls.
template <class T>
T* scratch(std::size_t n, int slot) {
    thread_local std::vector<T> buffers[2];
    auto& b = buffers[slot];
    if (b.size() < n) b.resize(n);
    return b.data();
}

// Patch matrix, one row of K = in_channels * 9 values per output position,
// ordered like a weight row (ic, ky, kx); padding reads as zero.
template <class T>
void im2row(const ConvShape& s, const T* in, T* rows) {
    const int ho = s.out_height(), wo = s.out_width();
    const int K = s.in_channels * 9;
    const std::size_t hw_in = std::size_t(s.height) * s.width;
#pragma omp parallel for schedule(static) if (long(ho) * wo * K > kParallelThreshold)
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
            T* row = rows + (std::size_t(oy) * wo + ox) * K;
            for (int ic = 0; ic < s.in_channels; ++ic) {
                const T* plane = in + std::size_t(ic) * hw_in;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * s.stride + ky - 1;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ox * s.stride + kx - 1;
                        const bool inside = iy >= 0 && iy < s.height && ix >= 0 && ix < s.width;
                        *row++ = inside ? plane[std::size_t(iy) * s.width + ix] : T(0);
                    }
                }
            }
        }
}

}  // namespace detail

template <class T>
void gemv(std::span<const T> w, int rows, int cols, std::span<const T> x, std::span<T> y) {
    const T* wp = w.data();
    const T* xp = x.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static) if (long(rows) * cols > kParallelThreshold)
    for (int r = 0; r < rows; ++r) {
        yp[r] += detail::dot(wp + std::size_t(r) * cols, xp, cols);
    }
}

// dx += W^T g. Columns are split into blocks; each block is owned by one
// thread, which walks the rows in order.
template <class T>
void gemv_t(std::span<const T> w, int rows, int cols, std::span<const T> g, std::span<T> dx) {
    constexpr int kBlock = 64;
    const int blocks = (cols + kBlock - 1) / kBlock;
    const T* wp = w.data();
    const T* gp = g.data();
    T* dp = dx.data();
#pragma omp parallel for schedule(static) if (long(rows) * cols > kParallelThreshold)
    for (int bi = 0; bi < blocks; ++bi) {
        const int c0 = bi * kBlock;
        const int c1 = std::min(cols, c0 + kBlock);
        for (int r = 0; r < rows; ++r) {
            const T gr = gp[r];
            if (gr == T(0)) continue;
            detail::axpy(dp + c0, wp + std::size_t(r) * cols + c0, gr, c1 - c0);
        }
    }
}

template <class T>
void ger(std::span<const T> g, int rows, std::span<const T> x, int cols, std::span<T> dw) {
    const T* gp = g.data();
    const T* xp = x.data();
    T* dp = dw.data();
#pragma omp parallel for schedule(static) if (long(rows) * cols > kParallelThreshold)
    for (int r = 0; r < rows; ++r) {
        const T gr = gp[r];
        if (gr == T(0)) continue;
        detail::axpy(dp + std::size_t(r) * cols, xp, gr, cols);
    }
}


template <class T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> w,
                     std::span<const T> b, std::span<T> out) {
    const int P = s.out_height() * s.out_width();
    const int K = s.in_channels * 9;
    T* rows = detail::scratch<T>(std::size_t(P) * K, 0);
    detail::im2row(s, in.data(), rows);
    const T* wp = w.data();
    T* op = out.data();
#pragma omp parallel for schedule(static) if (long(P) * K * s.out_channels > kParallelThreshold)
    for (int p = 0; p < P; ++p) {
        const T* row = rows + std::size_t(p) * K;
        for (int oc = 0; oc < s.out_channels; ++oc)
            op[std::size_t(oc) * P + p] = b[oc] + detail::dot(wp + std::size_t(oc) * K, row, K);
    }
}

// Accumulates into dw, db, and (when non-empty) din.
template <class T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> w,
                      std::span<const T> dout, std::span<T> din, std::span<T> dw, std::span<T> db) {
    const int ho = s.out_height(), wo = s.out_width();
    const int P = ho * wo;
    const int K = s.in_channels * 9;
    const long work = long(P) * K * s.out_channels;
    T* rows = detail::scratch<T>(std::size_t(P) * K, 0);
    detail::im2row(s, in.data(), rows);
    const T* wp = w.data();
    const T* gp = dout.data();
    T* dwp = dw.data();

    // weight and bias gradients: one output channel per thread
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (int oc = 0; oc < s.out_channels; ++oc) {
        const T* g = gp + std::size_t(oc) * P;
        T* k = dwp + std::size_t(oc) * K;
        T bsum = 0;
        for (int p = 0; p < P; ++p) {
            bsum += g[p];
            if (g[p] != T(0)) detail::axpy(k, rows + std::size_t(p) * K, g[p], K);
        }
        db[oc] += bsum;
    }

    if (din.empty()) return;
    // patch-row gradients: one output position per thread
    T* drows = detail::scratch<T>(std::size_t(P) * K, 1);
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (int p = 0; p < P; ++p) {
        T* dr = drows + std::size_t(p) * K;
        std::fill(dr, dr + K, T(0));
        for (int oc = 0; oc < s.out_channels; ++oc) {
            const T g = gp[std::size_t(oc) * P + p];
            if (g != T(0)) detail::axpy(dr, wp + std::size_t(oc) * K, g, K);
        }
    }
    // scatter back: one input channel per thread, positions in order
    const std::size_t hw_in = std::size_t(s.height) * s.width;
    T* dinp = din.data();
#pragma omp parallel for schedule(static) if (long(P) * K > kParallelThreshold)
    for (int ic = 0; ic < s.in_channels; ++ic) {
        T* plane = dinp + std::size_t(ic) * hw_in;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                const T* dr = drows + (std::size_t(oy) * wo + ox) * K + std::size_t(ic) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * s.stride + ky - 1;
                    if (iy < 0 || iy >= s.height) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ox * s.stride + kx - 1;
                        if (ix >= 0 && ix < s.width) plane[std::size_t(iy) * s.width + ix] += dr[ky * 3 + kx];
                    }
                }
            }
    }
}

template <class T>
void upsample_nearest(int channels, int in_h, int in_w, int out_h, int out_w, std::span<const T> in,
                      std::span<T> out) {
    const T* ip = in.data();
    T* op = out.data();
#pragma omp parallel for schedule(static) if (long(channels) * out_h * out_w > kParallelThreshold)
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < out_h; ++y) {
            const int sy = static_cast<int>(static_cast<long>(y) * in_h / out_h);
            const T* srow = ip + (std::size_t(c) * in_h + sy) * in_w;
            T* orow = op + (std::size_t(c) * out_h + y) * out_w;
            for (int x = 0; x < out_w; ++x) orow[x] = srow[static_cast<long>(x) * in_w / out_w];
        }
    }
}

template <class T>
void upsample_nearest_backward(int channels, int in_h, int in_w, int out_h, int out_w,
                               std::span<const T> dout, std::span<T> din) {
    const T* gp = dout.data();
    T* dp = din.data();
#pragma omp parallel for schedule(static) if (long(channels) * out_h * out_w > kParallelThreshold)
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < out_h; ++y) {
            const int sy = static_cast<int>(static_cast<long>(y) * in_h / out_h);
            T* drow = dp + (std::size_t(c) * in_h + sy) * in_w;
            const T* grow = gp + (std::size_t(c) * out_h + y) * out_w;
            for (int x = 0; x < out_w; ++x) drow[static_cast<long>(x) * in_w / out_w] += grow[x];
        }
    }
}

}  // namespace fast

}  // namespace absnet::kernels
