#include "airm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace airm::kern {

namespace {
int g_threads = 0;  // 0 = library default
}

int threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
    g_threads = n;
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

namespace {

// Eight-lane dot product. The lane split is fixed, so the summation order
// does not depend on vector width or thread count.
template <typename T>
inline T dot8(const T* x, const T* y, int n) {
    T s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    int p = 0;
    for (; p + 8 <= n; p += 8) {
        s0 += x[p] * y[p];
        s1 += x[p + 1] * y[p + 1];
        s2 += x[p + 2] * y[p + 2];
        s3 += x[p + 3] * y[p + 3];
        s4 += x[p + 4] * y[p + 4];
        s5 += x[p + 5] * y[p + 5];
        s6 += x[p + 6] * y[p + 6];
        s7 += x[p + 7] * y[p + 7];
    }
    T s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
    for (; p < n; ++p) s += x[p] * y[p];
    return s;
}

}  // namespace

template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static) if (int64_t(m) * k * n > 16384)
    for (int i = 0; i < m; ++i) {
        T* c = C + int64_t(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) c[j] = 0;
        const T* a = A + int64_t(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = a[p];
            const T* b = B + int64_t(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static) if (int64_t(m) * k * n > 16384)
    for (int i = 0; i < m; ++i) {
        const T* a = A + int64_t(i) * k;
        T* c = C + int64_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const T s = dot8(a, B + int64_t(j) * k, k);
            c[j] = accumulate ? c[j] + s : s;
        }
    }
}

template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static) if (int64_t(m) * k * n > 16384)
    for (int i = 0; i < m; ++i) {
        T* c = C + int64_t(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) c[j] = 0;
        for (int p = 0; p < k; ++p) {
            const T av = A[int64_t(p) * m + i];
            const T* b = B + int64_t(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

template <typename T>
void conv2d_fwd(const T* x, const T* w, const T* bias, T* y, int cin, int H,
                int W, int cout, int kh, int kw, int stride, int pad, int groups) {
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    const int cpg_in = cin / groups;
    const int cpg_out = cout / groups;
#pragma omp parallel for collapse(2) schedule(static) \
    if (int64_t(cout) * Ho * Wo * cpg_in * kh * kw > 16384)
    for (int co = 0; co < cout; ++co) {
        for (int oy = 0; oy < Ho; ++oy) {
            const int g = co / cpg_out;
            T* yrow = y + (int64_t(co) * Ho + oy) * Wo;
            for (int ox = 0; ox < Wo; ++ox) yrow[ox] = bias ? bias[co] : T(0);
            for (int ci = 0; ci < cpg_in; ++ci) {
                const T* xc = x + int64_t(g * cpg_in + ci) * H * W;
                const T* wc = w + ((int64_t(co) * cpg_in + ci) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    const T* xrow = xc + int64_t(iy) * W;
                    const T* wrow = wc + int64_t(ky) * kw;
                    for (int kx = 0; kx < kw; ++kx) {
                        const T wv = wrow[kx];
                        const int x0 = -pad + kx;
                        for (int ox = 0; ox < Wo; ++ox) {
                            const int ix = ox * stride + x0;
                            if (ix < 0 || ix >= W) continue;
                            yrow[ox] += wv * xrow[ix];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_bwd_data(const T* dy, const T* w, T* dx, int cin, int H, int W,
                     int cout, int kh, int kw, int stride, int pad, int groups) {
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    const int cpg_in = cin / groups;
    const int cpg_out = cout / groups;
#pragma omp parallel for collapse(2) schedule(static) \
    if (int64_t(cin) * H * W * cpg_out * kh * kw > 16384)
    for (int ci = 0; ci < cin; ++ci) {
        for (int iy = 0; iy < H; ++iy) {
            const int g = ci / cpg_in;
            T* dxrow = dx + (int64_t(ci) * H + iy) * W;
            for (int ix = 0; ix < W; ++ix) {
                T s = 0;
                for (int co = g * cpg_out; co < (g + 1) * cpg_out; ++co) {
                    const T* dyc = dy + int64_t(co) * Ho * Wo;
                    const T* wc =
                        w + ((int64_t(co) * cpg_in + (ci - g * cpg_in)) * kh) * kw;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int t = iy + pad - ky;
                        if (t < 0 || t % stride != 0) continue;
                        const int oy = t / stride;
                        if (oy >= Ho) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int u = ix + pad - kx;
                            if (u < 0 || u % stride != 0) continue;
                            const int ox = u / stride;
                            if (ox >= Wo) continue;
                            s += dyc[int64_t(oy) * Wo + ox] * wc[int64_t(ky) * kw + kx];
                        }
                    }
                }
                dxrow[ix] += s;
            }
        }
    }
}

template <typename T>
void conv2d_bwd_weight(const T* dy, const T* x, T* dw, int cin, int H, int W,
                       int cout, int kh, int kw, int stride, int pad, int groups) {
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    const int cpg_in = cin / groups;
    const int cpg_out = cout / groups;
#pragma omp parallel for schedule(static) \
    if (int64_t(cout) * cpg_in * kh * kw * Ho * Wo > 16384)
    for (int co = 0; co < cout; ++co) {
        const int g = co / cpg_out;
        const T* dyc = dy + int64_t(co) * Ho * Wo;
        for (int ci = 0; ci < cpg_in; ++ci) {
            const T* xc = x + int64_t(g * cpg_in + ci) * H * W;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    T s = 0;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= H) continue;
                        const T* xrow = xc + int64_t(iy) * W;
                        const T* dyrow = dyc + int64_t(oy) * Wo;
                        for (int ox = 0; ox < Wo; ++ox) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= W) continue;
                            s += dyrow[ox] * xrow[ix];
                        }
                    }
                    dw[((int64_t(co) * cpg_in + ci) * kh + ky) * kw + kx] += s;
                }
            }
        }
    }
}

template <typename T>
void conv2d_bwd_bias(const T* dy, T* db, int cout, int Ho, int Wo) {
#pragma omp parallel for schedule(static) if (int64_t(cout) * Ho * Wo > 16384)
    for (int co = 0; co < cout; ++co) {
        const T* dyc = dy + int64_t(co) * Ho * Wo;
        T s = 0;
        for (int64_t i = 0; i < int64_t(Ho) * Wo; ++i) s += dyc[i];
        db[co] += s;
    }
}

template <typename T>
void softmax_rows(const T* x, T* y, int rows, int cols) {
#pragma omp parallel for schedule(static) if (int64_t(rows) * cols > 16384)
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + int64_t(i) * cols;
        T* yr = y + int64_t(i) * cols;
        T mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T s = 0;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        const T inv = T(1) / s;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

template <typename T>
void softmax_rows_bwd(const T* y, const T* dy, T* dx, int rows, int cols) {
#pragma omp parallel for schedule(static) if (int64_t(rows) * cols > 16384)
    for (int i = 0; i < rows; ++i) {
        const T* yr = y + int64_t(i) * cols;
        const T* dyr = dy + int64_t(i) * cols;
        T* dxr = dx + int64_t(i) * cols;
        T dot = 0;
        for (int j = 0; j < cols; ++j) dot += yr[j] * dyr[j];
        for (int j = 0; j < cols; ++j) dxr[j] += yr[j] * (dyr[j] - dot);
    }
}

template <typename T>
void gather_rows(const T* X, const int* idx, T* Y, int m, int cols) {
#pragma omp parallel for schedule(static) if (int64_t(m) * cols > 16384)
    for (int j = 0; j < m; ++j)
        std::memcpy(Y + int64_t(j) * cols, X + int64_t(idx[j]) * cols,
                    sizeof(T) * size_t(cols));
}

template <typename T>
void scatter_add_rows(const T* dY, const int* idx, T* dX, int m, int cols) {
#pragma omp parallel for schedule(static) if (int64_t(m) * cols > 16384)
    for (int c = 0; c < cols; ++c) {
        for (int j = 0; j < m; ++j)
            dX[int64_t(idx[j]) * cols + c] += dY[int64_t(j) * cols + c];
    }
}

template <typename T>
void resize_bilinear(const T* src, T* dst, int C, int H, int W, int H2, int W2) {
    const double sy = double(H) / H2, sx = double(W) / W2;
#pragma omp parallel for collapse(2) schedule(static) \
    if (int64_t(C) * H2 * W2 > 16384)
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H2; ++y) {
            const double fy = std::min(std::max((y + 0.5) * sy - 0.5, 0.0),
                                       double(H - 1));
            const int y0 = int(fy);
            const int y1 = std::min(y0 + 1, H - 1);
            const double wy = fy - y0;
            const T* s0 = src + (int64_t(c) * H + y0) * W;
            const T* s1 = src + (int64_t(c) * H + y1) * W;
            T* d = dst + (int64_t(c) * H2 + y) * W2;
            for (int x = 0; x < W2; ++x) {
                const double fx = std::min(std::max((x + 0.5) * sx - 0.5, 0.0),
                                           double(W - 1));
                const int x0 = int(fx);
                const int x1 = std::min(x0 + 1, W - 1);
                const double wx = fx - x0;
                const double top = (1.0 - wx) * s0[x0] + wx * s0[x1];
                const double bot = (1.0 - wx) * s1[x0] + wx * s1[x1];
                d[x] = T((1.0 - wy) * top + wy * bot);
            }
        }
    }
}

template <typename T>
void resize_nearest(const T* src, T* dst, int C, int H, int W, int H2, int W2) {
#pragma omp parallel for collapse(2) schedule(static) \
    if (int64_t(C) * H2 * W2 > 16384)
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H2; ++y) {
            const int iy = std::min(int((y + 0.5) * double(H) / H2), H - 1);
            const T* s = src + (int64_t(c) * H + iy) * W;
            T* d = dst + (int64_t(c) * H2 + y) * W2;
            for (int x = 0; x < W2; ++x) {
                const int ix = std::min(int((x + 0.5) * double(W) / W2), W - 1);
                d[x] = s[ix];
            }
        }
    }
}

template <typename T>
void upsample_nearest2x(const T* src, T* dst, int C, int H, int W) {
#pragma omp parallel for collapse(2) schedule(static) if (int64_t(C) * H * W > 16384)
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
            const T* s = src + (int64_t(c) * H + y) * W;
            T* d0 = dst + (int64_t(c) * 2 * H + 2 * y) * 2 * W;
            T* d1 = d0 + 2 * W;
            for (int x = 0; x < W; ++x) {
                d0[2 * x] = d0[2 * x + 1] = s[x];
                d1[2 * x] = d1[2 * x + 1] = s[x];
            }
        }
    }
}

template <typename T>
void upsample_nearest2x_bwd(const T* ddst, T* dsrc, int C, int H, int W) {
#pragma omp parallel for collapse(2) schedule(static) if (int64_t(C) * H * W > 16384)
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
            const T* d0 = ddst + (int64_t(c) * 2 * H + 2 * y) * 2 * W;
            const T* d1 = d0 + 2 * W;
            T* s = dsrc + (int64_t(c) * H + y) * W;
            for (int x = 0; x < W; ++x)
                s[x] += (d0[2 * x] + d0[2 * x + 1]) + (d1[2 * x] + d1[2 * x + 1]);
        }
    }
}

template <typename T>
T reduce_sum(const T* x, int64_t n) {
    T s = 0;
    for (int64_t i = 0; i < n; ++i) s += x[i];
    return s;
}

namespace ref {

template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T s = accumulate ? C[int64_t(i) * n + j] : T(0);
            for (int p = 0; p < k; ++p)
                s += A[int64_t(i) * k + p] * B[int64_t(p) * n + j];
            C[int64_t(i) * n + j] = s;
        }
}

template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T s = accumulate ? C[int64_t(i) * n + j] : T(0);
            for (int p = 0; p < k; ++p)
                s += A[int64_t(i) * k + p] * B[int64_t(j) * k + p];
            C[int64_t(i) * n + j] = s;
        }
}

template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T s = accumulate ? C[int64_t(i) * n + j] : T(0);
            for (int p = 0; p < k; ++p)
                s += A[int64_t(p) * m + i] * B[int64_t(p) * n + j];
            C[int64_t(i) * n + j] = s;
        }
}

template <typename T>
void conv2d_fwd(const T* x, const T* w, const T* bias, T* y, int cin, int H,
                int W, int cout, int kh, int kw, int stride, int pad, int groups) {
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    const int cpg_in = cin / groups;
    const int cpg_out = cout / groups;
    for (int co = 0; co < cout; ++co) {
        const int g = co / cpg_out;
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                T s = bias ? bias[co] : T(0);
                for (int ci = 0; ci < cpg_in; ++ci)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride - pad + ky;
                            const int ix = ox * stride - pad + kx;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            s += x[(int64_t(g * cpg_in + ci) * H + iy) * W + ix] *
                                 w[((int64_t(co) * cpg_in + ci) * kh + ky) * kw + kx];
                        }
                y[(int64_t(co) * Ho + oy) * Wo + ox] = s;
            }
    }
}

template <typename T>
void softmax_rows(const T* x, T* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + int64_t(i) * cols;
        T* yr = y + int64_t(i) * cols;
        T mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T s = 0;
        for (int j = 0; j < cols; ++j) s += std::exp(xr[j] - mx);
        for (int j = 0; j < cols; ++j) yr[j] = std::exp(xr[j] - mx) / s;
    }
}

}  // namespace ref

#define AIRM_INSTANTIATE(T)                                                     \
    template void gemm_nn<T>(const T*, const T*, T*, int, int, int, bool);      \
    template void gemm_nt<T>(const T*, const T*, T*, int, int, int, bool);      \
    template void gemm_tn<T>(const T*, const T*, T*, int, int, int, bool);      \
    template void conv2d_fwd<T>(const T*, const T*, const T*, T*, int, int,     \
                                int, int, int, int, int, int, int);             \
    template void conv2d_bwd_data<T>(const T*, const T*, T*, int, int, int,     \
                                     int, int, int, int, int, int);             \
    template void conv2d_bwd_weight<T>(const T*, const T*, T*, int, int, int,   \
                                       int, int, int, int, int, int);           \
    template void conv2d_bwd_bias<T>(const T*, T*, int, int, int);              \
    template void softmax_rows<T>(const T*, T*, int, int);                      \
    template void softmax_rows_bwd<T>(const T*, const T*, T*, int, int);        \
    template void gather_rows<T>(const T*, const int*, T*, int, int);           \
    template void scatter_add_rows<T>(const T*, const int*, T*, int, int);      \
    template void resize_bilinear<T>(const T*, T*, int, int, int, int, int);    \
    template void resize_nearest<T>(const T*, T*, int, int, int, int, int);     \
    template void upsample_nearest2x<T>(const T*, T*, int, int, int);           \
    template void upsample_nearest2x_bwd<T>(const T*, T*, int, int, int);       \
    template T reduce_sum<T>(const T*, int64_t);                                \
    template void ref::gemm_nn<T>(const T*, const T*, T*, int, int, int, bool); \
    template void ref::gemm_nt<T>(const T*, const T*, T*, int, int, int, bool); \
    template void ref::gemm_tn<T>(const T*, const T*, T*, int, int, int, bool); \
    template void ref::conv2d_fwd<T>(const T*, const T*, const T*, T*, int,     \
                                     int, int, int, int, int, int, int, int);   \
    template void ref::softmax_rows<T>(const T*, T*, int, int);

AIRM_INSTANTIATE(float)
AIRM_INSTANTIATE(double)
#undef AIRM_INSTANTIATE

}  // namespace airm::kern
