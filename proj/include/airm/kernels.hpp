#pragma once

#include <cstdint>

namespace airm::kern {

// Thread-count control for the OpenMP kernels below. Every parallel kernel
// assigns each output element to exactly one thread and accumulates into it
// in a fixed order, so results are bitwise identical for any thread count.
// Reductions to a single scalar stay serial for the same reason.
int threads();
void set_threads(int n);

// ---- GEMM ------------------------------------------------------------
// C[m,n] (+)= A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate);
// C[m,n] (+)= A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate);
// C[m,n] (+)= A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate);

// ---- Convolution (single image, CHW) ---------------------------------
// x [cin,H,W], w [cout, cin/groups, kh, kw], bias [cout] or nullptr,
// y [cout, Ho, Wo] with Ho = (H + 2p - kh)/s + 1.
template <typename T>
void conv2d_fwd(const T* x, const T* w, const T* bias, T* y, int cin, int H,
                int W, int cout, int kh, int kw, int stride, int pad, int groups);
template <typename T>
void conv2d_bwd_data(const T* dy, const T* w, T* dx, int cin, int H, int W,
                     int cout, int kh, int kw, int stride, int pad, int groups);
template <typename T>
void conv2d_bwd_weight(const T* dy, const T* x, T* dw, int cin, int H, int W,
                       int cout, int kh, int kw, int stride, int pad, int groups);
template <typename T>
void conv2d_bwd_bias(const T* dy, T* db, int cout, int Ho, int Wo);

// ---- Row softmax ------------------------------------------------------
template <typename T>
void softmax_rows(const T* x, T* y, int rows, int cols);
// dx from (y, dy) of a row softmax.
template <typename T>
void softmax_rows_bwd(const T* y, const T* dy, T* dx, int rows, int cols);

// ---- Gather / scatter on row-major matrices ---------------------------
template <typename T>
void gather_rows(const T* X, const int* idx, T* Y, int m, int cols);
// dX[idx[j], :] += dY[j, :]  (parallel over columns; fixed j order)
template <typename T>
void scatter_add_rows(const T* dY, const int* idx, T* dX, int m, int cols);

// ---- Resampling --------------------------------------------------------
template <typename T>
void resize_bilinear(const T* src, T* dst, int C, int H, int W, int H2, int W2);
template <typename T>
void resize_nearest(const T* src, T* dst, int C, int H, int W, int H2, int W2);
template <typename T>
void upsample_nearest2x(const T* src, T* dst, int C, int H, int W);
template <typename T>
void upsample_nearest2x_bwd(const T* ddst, T* dsrc, int C, int H, int W);

// ---- Misc --------------------------------------------------------------
// Serial by design: single fixed summation order.
template <typename T>
T reduce_sum(const T* x, int64_t n);

// ---- Naive reference implementations ------------------------------------
// Kept for correctness tests and the kernel benchmark; never used on the
// production path.
namespace ref {
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate);
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate);
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int m, int k, int n, bool accumulate);
template <typename T>
void conv2d_fwd(const T* x, const T* w, const T* bias, T* y, int cin, int H,
                int W, int cout, int kh, int kw, int stride, int pad, int groups);
template <typename T>
void softmax_rows(const T* x, T* y, int rows, int cols);
}  // namespace ref

}  // namespace airm::kern
