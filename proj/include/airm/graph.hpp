#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "airm/kernels.hpp"
#include "airm/tensor.hpp"

namespace airm {

// Reverse-mode tape. Every op creates a Node holding its output value and a
// closure that scatters the output gradient into the parents. Creation order
// is a valid topological order, so backward() just walks ids downward.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;
    uint64_t id = 0;
    bool requires_grad = false;
    std::string name;

    Tensor<T>& ensure_grad() {
        if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
        return grad;
    }
    void zero_grad() {
        if (grad.numel()) std::fill(grad.vec().begin(), grad.vec().end(), T(0));
    }
};

template <typename T>
using NodeP = std::shared_ptr<Node<T>>;

namespace graph_detail {
uint64_t next_id();
bool& grad_enabled_flag();
}  // namespace graph_detail

inline bool grad_enabled() { return graph_detail::grad_enabled_flag(); }

// RAII guard: disables graph recording in scope (inference / evaluation).
class NoGrad {
public:
    NoGrad() : prev_(graph_detail::grad_enabled_flag()) {
        graph_detail::grad_enabled_flag() = false;
    }
    ~NoGrad() { graph_detail::grad_enabled_flag() = prev_; }

private:
    bool prev_;
};

template <typename T>
NodeP<T> make_leaf(Tensor<T> value, bool requires_grad = false,
                   std::string name = "") {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = graph_detail::next_id();
    n->name = std::move(name);
    return n;
}

template <typename T>
NodeP<T> constant(Tensor<T> value) {
    return make_leaf<T>(std::move(value), false);
}

template <typename T>
NodeP<T> make_op(Tensor<T> value, std::vector<NodeP<T>> parents,
                 std::function<void(Node<T>&)> bwd) {
    bool need = grad_enabled();
    if (need) {
        need = false;
        for (auto& p : parents) need = need || p->requires_grad;
    }
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->id = graph_detail::next_id();
    if (need) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward = std::move(bwd);
    }
    return n;
}

// Backpropagate from a scalar node. Gradients accumulate into any reachable
// leaf with requires_grad (parameter grads are zeroed by the optimizer, not
// here, so multi-sample accumulation works).
template <typename T>
void backward(const NodeP<T>& root) {
    if (root->value.numel() != 1)
        throw ShapeError("backward() expects a scalar root");
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<Node<T>*> stack{root.get()};
    while (!stack.empty()) {
        Node<T>* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (auto& p : n->parents)
            if (p->requires_grad) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });
    root->ensure_grad();
    root->grad[0] += T(1);
    for (Node<T>* n : order)
        if (n->backward) n->backward(*n);
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace ops {

template <typename T, typename FwdF, typename BwdF>
NodeP<T> unary_map(const NodeP<T>& x, FwdF f, BwdF dfdx) {
    Tensor<T> y(x->value.shape());
    const int64_t n = y.numel();
    const T* xv = x->value.data();
    T* yv = y.data();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) yv[i] = f(xv[i]);
    return make_op<T>(std::move(y), {x}, [dfdx](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* xv = p.value.data();
        const T* yv = self.value.data();
        const T* dy = self.grad.data();
        const int64_t n = self.value.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
        for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * dfdx(xv[i], yv[i]);
    });
}

template <typename T>
NodeP<T> relu(const NodeP<T>& x) {
    return unary_map(
        x, [](T v) { return v > 0 ? v : T(0); },
        [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
NodeP<T> sigmoid(const NodeP<T>& x) {
    return unary_map(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
NodeP<T> gelu(const NodeP<T>& x) {
    const T inv_sqrt2 = T(0.70710678118654752440);
    const T inv_sqrt2pi = T(0.39894228040143267794);
    return unary_map(
        x,
        [=](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
        [=](T v, T) {
            return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) +
                   v * inv_sqrt2pi * std::exp(T(-0.5) * v * v);
        });
}

template <typename T>
NodeP<T> exp(const NodeP<T>& x) {
    return unary_map(
        x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
NodeP<T> log(const NodeP<T>& x) {
    return unary_map(
        x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
NodeP<T> abs(const NodeP<T>& x) {
    return unary_map(
        x, [](T v) { return std::fabs(v); },
        [](T v, T) { return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0)); });
}

template <typename T>
NodeP<T> square(const NodeP<T>& x) {
    return unary_map(
        x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
NodeP<T> clamp(const NodeP<T>& x, T lo, T hi) {
    return unary_map(
        x, [=](T v) { return v < lo ? lo : (v > hi ? hi : v); },
        [=](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

// a*x + b with scalar constants.
template <typename T>
NodeP<T> affine(const NodeP<T>& x, T a, T b) {
    return unary_map(
        x, [=](T v) { return a * v + b; }, [=](T, T) { return a; });
}

template <typename T, typename FwdF>
NodeP<T> binary_map(const NodeP<T>& a, const NodeP<T>& b, FwdF f, T dfda, T dfdb) {
    if (!a->value.same_shape(b->value))
        throw ShapeError("elementwise op on mismatched shapes " +
                         a->value.shape_str() + " vs " + b->value.shape_str());
    Tensor<T> y(a->value.shape());
    const int64_t n = y.numel();
    const T* av = a->value.data();
    const T* bv = b->value.data();
    T* yv = y.data();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) yv[i] = f(av[i], bv[i]);
    return make_op<T>(std::move(y), {a, b}, [dfda, dfdb](Node<T>& self) {
        const T* dy = self.grad.data();
        const int64_t n = self.value.numel();
        for (int side = 0; side < 2; ++side) {
            auto& p = *self.parents[side];
            if (!p.requires_grad) continue;
            const T c = side == 0 ? dfda : dfdb;
            T* dx = p.ensure_grad().data();
#pragma omp parallel for schedule(static) if (n > 16384)
            for (int64_t i = 0; i < n; ++i) dx[i] += c * dy[i];
        }
    });
}

template <typename T>
NodeP<T> add(const NodeP<T>& a, const NodeP<T>& b) {
    return binary_map(
        a, b, [](T x, T y) { return x + y; }, T(1), T(1));
}

template <typename T>
NodeP<T> sub(const NodeP<T>& a, const NodeP<T>& b) {
    return binary_map(
        a, b, [](T x, T y) { return x - y; }, T(1), T(-1));
}

// Elementwise product (general backward, needs both values).
template <typename T>
NodeP<T> mul(const NodeP<T>& a, const NodeP<T>& b) {
    if (!a->value.same_shape(b->value))
        throw ShapeError("mul on mismatched shapes");
    Tensor<T> y(a->value.shape());
    const int64_t n = y.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = a->value[i] * b->value[i];
    return make_op<T>(std::move(y), {a, b}, [](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* dy = self.grad.data();
        const int64_t n = self.value.numel();
        if (pa.requires_grad) {
            T* da = pa.ensure_grad().data();
            const T* bv = pb.value.data();
            for (int64_t i = 0; i < n; ++i) da[i] += dy[i] * bv[i];
        }
        if (pb.requires_grad) {
            T* db = pb.ensure_grad().data();
            const T* av = pa.value.data();
            for (int64_t i = 0; i < n; ++i) db[i] += dy[i] * av[i];
        }
    });
}

template <typename T>
NodeP<T> reshape(const NodeP<T>& x, std::vector<int> shape) {
    Tensor<T> y = x->value.reshaped(shape);
    return make_op<T>(std::move(y), {x}, [](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* dy = self.grad.data();
        const int64_t n = self.value.numel();
        for (int64_t i = 0; i < n; ++i) dx[i] += dy[i];
    });
}

// C = A[m,k] * B[k,n]
template <typename T>
NodeP<T> matmul(const NodeP<T>& a, const NodeP<T>& b) {
    const int m = a->value.dim(0), k = a->value.dim(1);
    if (b->value.dim(0) != k)
        throw ShapeError("matmul inner dims disagree: " + a->value.shape_str() +
                         " x " + b->value.shape_str());
    const int n = b->value.dim(1);
    Tensor<T> y({m, n});
    kern::gemm_nn(a->value.data(), b->value.data(), y.data(), m, k, n, false);
    return make_op<T>(std::move(y), {a, b}, [m, k, n](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* dy = self.grad.data();
        if (pa.requires_grad)
            kern::gemm_nt(dy, pb.value.data(), pa.ensure_grad().data(), m, n, k,
                          true);
        if (pb.requires_grad)
            kern::gemm_tn(pa.value.data(), dy, pb.ensure_grad().data(), k, m, n,
                          true);
    });
}

// C = A[m,k] * B[n,k]^T
template <typename T>
NodeP<T> matmul_nt(const NodeP<T>& a, const NodeP<T>& b) {
    const int m = a->value.dim(0), k = a->value.dim(1);
    if (b->value.dim(1) != k)
        throw ShapeError("matmul_nt inner dims disagree: " +
                         a->value.shape_str() + " x " + b->value.shape_str());
    const int n = b->value.dim(0);
    Tensor<T> y({m, n});
    kern::gemm_nt(a->value.data(), b->value.data(), y.data(), m, k, n, false);
    return make_op<T>(std::move(y), {a, b}, [m, k, n](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* dy = self.grad.data();
        if (pa.requires_grad)
            kern::gemm_nn(dy, pb.value.data(), pa.ensure_grad().data(), m, n, k,
                          true);
        if (pb.requires_grad)
            kern::gemm_tn(dy, pa.value.data(), pb.ensure_grad().data(), n, m, k,
                          true);
    });
}

// X[N,C] + b (b shaped [C] or [1,C]).
template <typename T>
NodeP<T> add_rowvec(const NodeP<T>& x, const NodeP<T>& b) {
    const int n = x->value.dim(0), c = x->value.dim(1);
    if (b->value.numel() != c) throw ShapeError("add_rowvec size mismatch");
    Tensor<T> y(x->value.shape());
    const T* xv = x->value.data();
    const T* bv = b->value.data();
    T* yv = y.data();
#pragma omp parallel for schedule(static) if (int64_t(n) * c > 16384)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
            yv[int64_t(i) * c + j] = xv[int64_t(i) * c + j] + bv[j];
    return make_op<T>(std::move(y), {x, b}, [n, c](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* dy = self.grad.data();
        if (px.requires_grad) {
            T* dx = px.ensure_grad().data();
            const int64_t tot = int64_t(n) * c;
#pragma omp parallel for schedule(static) if (tot > 16384)
            for (int64_t i = 0; i < tot; ++i) dx[i] += dy[i];
        }
        if (pb.requires_grad) {
            T* db = pb.ensure_grad().data();
#pragma omp parallel for schedule(static) if (int64_t(n) * c > 16384)
            for (int j = 0; j < c; ++j) {
                T s = 0;
                for (int i = 0; i < n; ++i) s += dy[int64_t(i) * c + j];
                db[j] += s;
            }
        }
    });
}

template <typename T>
NodeP<T> softmax_rows(const NodeP<T>& x) {
    const int rows = x->value.dim(0), cols = x->value.dim(1);
    Tensor<T> y(x->value.shape());
    kern::softmax_rows(x->value.data(), y.data(), rows, cols);
    return make_op<T>(std::move(y), {x}, [rows, cols](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        kern::softmax_rows_bwd(self.value.data(), self.grad.data(),
                               p.ensure_grad().data(), rows, cols);
    });
}

// Per-row layer normalization with affine parameters gamma/beta of size C.
template <typename T>
NodeP<T> layernorm_rows(const NodeP<T>& x, const NodeP<T>& gamma,
                        const NodeP<T>& beta, T eps = T(1e-5)) {
    const int n = x->value.dim(0), c = x->value.dim(1);
    Tensor<T> y(x->value.shape());
    Tensor<T> xhat(x->value.shape());
    Tensor<T> rstd({n});
    const T* xv = x->value.data();
    const T* gv = gamma->value.data();
    const T* bv = beta->value.data();
#pragma omp parallel for schedule(static) if (int64_t(n) * c > 16384)
    for (int i = 0; i < n; ++i) {
        const T* xr = xv + int64_t(i) * c;
        T mu = 0;
        for (int j = 0; j < c; ++j) mu += xr[j];
        mu /= T(c);
        T var = 0;
        for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= T(c);
        const T rs = T(1) / std::sqrt(var + eps);
        rstd[i] = rs;
        T* xh = xhat.data() + int64_t(i) * c;
        T* yr = y.data() + int64_t(i) * c;
        for (int j = 0; j < c; ++j) {
            xh[j] = (xr[j] - mu) * rs;
            yr[j] = gv[j] * xh[j] + bv[j];
        }
    }
    return make_op<T>(
        std::move(y), {x, gamma, beta},
        [n, c, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            const T* dy = self.grad.data();
            const T* gv = pg.value.data();
            if (pg.requires_grad || pb.requires_grad) {
                T* dg = pg.requires_grad ? pg.ensure_grad().data() : nullptr;
                T* db = pb.requires_grad ? pb.ensure_grad().data() : nullptr;
#pragma omp parallel for schedule(static) if (int64_t(n) * c > 16384)
                for (int j = 0; j < c; ++j) {
                    T sg = 0, sb = 0;
                    for (int i = 0; i < n; ++i) {
                        sg += dy[int64_t(i) * c + j] * xhat[int64_t(i) * c + j];
                        sb += dy[int64_t(i) * c + j];
                    }
                    if (dg) dg[j] += sg;
                    if (db) db[j] += sb;
                }
            }
            if (px.requires_grad) {
                T* dx = px.ensure_grad().data();
#pragma omp parallel for schedule(static) if (int64_t(n) * c > 16384)
                for (int i = 0; i < n; ++i) {
                    const T* dyr = dy + int64_t(i) * c;
                    const T* xh = xhat.data() + int64_t(i) * c;
                    T m1 = 0, m2 = 0;
                    for (int j = 0; j < c; ++j) {
                        m1 += dyr[j] * gv[j];
                        m2 += dyr[j] * gv[j] * xh[j];
                    }
                    m1 /= T(c);
                    m2 /= T(c);
                    const T rs = rstd[i];
                    T* dxr = dx + int64_t(i) * c;
                    for (int j = 0; j < c; ++j)
                        dxr[j] += rs * (dyr[j] * gv[j] - m1 - xh[j] * m2);
                }
            }
        });
}

// conv2d on a single CHW image.
template <typename T>
NodeP<T> conv2d(const NodeP<T>& x, const NodeP<T>& w, const NodeP<T>& b,
                int stride, int pad, int groups = 1) {
    const int cin = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
    const int cout = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
    if (w->value.dim(1) != cin / groups)
        throw ShapeError("conv2d weight/input channel mismatch");
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    Tensor<T> y({cout, Ho, Wo});
    kern::conv2d_fwd(x->value.data(), w->value.data(),
                     b ? b->value.data() : nullptr, y.data(), cin, H, W, cout,
                     kh, kw, stride, pad, groups);
    std::vector<NodeP<T>> parents = b ? std::vector<NodeP<T>>{x, w, b}
                                      : std::vector<NodeP<T>>{x, w};
    return make_op<T>(
        std::move(y), std::move(parents),
        [cin, H, W, cout, kh, kw, stride, pad, groups, Ho, Wo](Node<T>& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            const T* dy = self.grad.data();
            if (px.requires_grad)
                kern::conv2d_bwd_data(dy, pw.value.data(),
                                      px.ensure_grad().data(), cin, H, W, cout,
                                      kh, kw, stride, pad, groups);
            if (pw.requires_grad)
                kern::conv2d_bwd_weight(dy, px.value.data(),
                                        pw.ensure_grad().data(), cin, H, W,
                                        cout, kh, kw, stride, pad, groups);
            if (self.parents.size() > 2 && self.parents[2]->requires_grad)
                kern::conv2d_bwd_bias(dy, self.parents[2]->ensure_grad().data(),
                                      cout, Ho, Wo);
        });
}

// Batch normalization over the spatial extent of a CHW tensor. Buffers are
// plain tensors owned by the module; in training mode they are updated as a
// side effect, in eval mode they parameterize a per-channel affine map.
template <typename T>
NodeP<T> batchnorm2d(const NodeP<T>& x, const NodeP<T>& gamma,
                     const NodeP<T>& beta, Tensor<T>* running_mean,
                     Tensor<T>* running_var, bool training,
                     T momentum = T(0.1), T eps = T(1e-5)) {
    const int C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
    const int64_t N = int64_t(H) * W;
    Tensor<T> y(x->value.shape());
    Tensor<T> xhat;
    Tensor<T> rstd({C});
    const T* xv = x->value.data();
    const T* gv = gamma->value.data();
    const T* bv = beta->value.data();
    if (training) {
        xhat = Tensor<T>(x->value.shape());
#pragma omp parallel for schedule(static) if (int64_t(C) * N > 16384)
        for (int c = 0; c < C; ++c) {
            const T* xc = xv + int64_t(c) * N;
            T mu = 0;
            for (int64_t i = 0; i < N; ++i) mu += xc[i];
            mu /= T(N);
            T var = 0;
            for (int64_t i = 0; i < N; ++i) var += (xc[i] - mu) * (xc[i] - mu);
            var /= T(N);
            const T rs = T(1) / std::sqrt(var + eps);
            rstd[c] = rs;
            (*running_mean)[c] =
                (T(1) - momentum) * (*running_mean)[c] + momentum * mu;
            (*running_var)[c] =
                (T(1) - momentum) * (*running_var)[c] + momentum * var;
            T* xh = xhat.data() + int64_t(c) * N;
            T* yc = y.data() + int64_t(c) * N;
            for (int64_t i = 0; i < N; ++i) {
                xh[i] = (xc[i] - mu) * rs;
                yc[i] = gv[c] * xh[i] + bv[c];
            }
        }
    } else {
#pragma omp parallel for schedule(static) if (int64_t(C) * N > 16384)
        for (int c = 0; c < C; ++c) {
            const T rs = T(1) / std::sqrt((*running_var)[c] + eps);
            rstd[c] = rs;
            const T mu = (*running_mean)[c];
            const T* xc = xv + int64_t(c) * N;
            T* yc = y.data() + int64_t(c) * N;
            for (int64_t i = 0; i < N; ++i) yc[i] = gv[c] * (xc[i] - mu) * rs + bv[c];
        }
    }
    return make_op<T>(
        std::move(y), {x, gamma, beta},
        [C, N, training, xhat = std::move(xhat), rstd = std::move(rstd),
         running_mean, running_var, eps](Node<T>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            const T* dy = self.grad.data();
            const T* gv = pg.value.data();
#pragma omp parallel for schedule(static) if (int64_t(C) * N > 16384)
            for (int c = 0; c < C; ++c) {
                const T* dyc = dy + int64_t(c) * N;
                T sum_dy = 0, sum_dy_xh = 0;
                if (training) {
                    const T* xh = xhat.data() + int64_t(c) * N;
                    for (int64_t i = 0; i < N; ++i) {
                        sum_dy += dyc[i];
                        sum_dy_xh += dyc[i] * xh[i];
                    }
                    if (px.requires_grad) {
                        T* dxc = px.ensure_grad().data() + int64_t(c) * N;
                        const T rs = rstd[c];
                        const T m1 = sum_dy / T(N), m2 = sum_dy_xh / T(N);
                        for (int64_t i = 0; i < N; ++i)
                            dxc[i] += gv[c] * rs * (dyc[i] - m1 - xh[i] * m2);
                    }
                } else {
                    const T mu = (*running_mean)[c];
                    const T rs = T(1) / std::sqrt((*running_var)[c] + eps);
                    for (int64_t i = 0; i < N; ++i) {
                        sum_dy += dyc[i];
                        sum_dy_xh += dyc[i] * (px.value[int64_t(c) * N + i] - mu) * rs;
                    }
                    if (px.requires_grad) {
                        T* dxc = px.ensure_grad().data() + int64_t(c) * N;
                        for (int64_t i = 0; i < N; ++i) dxc[i] += dyc[i] * gv[c] * rs;
                    }
                }
                if (pg.requires_grad) pg.ensure_grad()[c] += sum_dy_xh;
                if (pb.requires_grad) pb.ensure_grad()[c] += sum_dy;
            }
        });
}

// [h*w, C] tokens -> [C, h, w] grid (flat token index = y*w + x).
template <typename T>
NodeP<T> tokens_to_chw(const NodeP<T>& x, int h, int w) {
    const int C = x->value.dim(1);
    Tensor<T> y({C, h, w});
    const T* xv = x->value.data();
#pragma omp parallel for schedule(static) if (int64_t(C) * h * w > 16384)
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < h * w; ++i)
            y.data()[int64_t(c) * h * w + i] = xv[int64_t(i) * C + c];
    return make_op<T>(std::move(y), {x}, [h, w, C](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* dy = self.grad.data();
#pragma omp parallel for schedule(static) if (int64_t(C) * h * w > 16384)
        for (int i = 0; i < h * w; ++i)
            for (int c = 0; c < C; ++c)
                dx[int64_t(i) * C + c] += dy[int64_t(c) * h * w + i];
    });
}

template <typename T>
NodeP<T> chw_to_tokens(const NodeP<T>& x) {
    const int C = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    Tensor<T> y({h * w, C});
    const T* xv = x->value.data();
#pragma omp parallel for schedule(static) if (int64_t(C) * h * w > 16384)
    for (int i = 0; i < h * w; ++i)
        for (int c = 0; c < C; ++c)
            y.data()[int64_t(i) * C + c] = xv[int64_t(c) * h * w + i];
    return make_op<T>(std::move(y), {x}, [C, h, w](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* dy = self.grad.data();
#pragma omp parallel for schedule(static) if (int64_t(C) * h * w > 16384)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < h * w; ++i)
                dx[int64_t(c) * h * w + i] += dy[int64_t(i) * C + c];
    });
}

template <typename T>
NodeP<T> upsample2x_chw(const NodeP<T>& x) {
    const int C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
    Tensor<T> y({C, 2 * H, 2 * W});
    kern::upsample_nearest2x(x->value.data(), y.data(), C, H, W);
    return make_op<T>(std::move(y), {x}, [C, H, W](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        kern::upsample_nearest2x_bwd(self.grad.data(), p.ensure_grad().data(),
                                     C, H, W);
    });
}

template <typename T>
NodeP<T> concat_cols(const NodeP<T>& a, const NodeP<T>& b) {
    const int n = a->value.dim(0), ca = a->value.dim(1), cb = b->value.dim(1);
    if (b->value.dim(0) != n) throw ShapeError("concat_cols row mismatch");
    Tensor<T> y({n, ca + cb});
#pragma omp parallel for schedule(static) if (int64_t(n) * (ca + cb) > 16384)
    for (int i = 0; i < n; ++i) {
        T* yr = y.data() + int64_t(i) * (ca + cb);
        const T* ar = a->value.data() + int64_t(i) * ca;
        const T* br = b->value.data() + int64_t(i) * cb;
        for (int j = 0; j < ca; ++j) yr[j] = ar[j];
        for (int j = 0; j < cb; ++j) yr[ca + j] = br[j];
    }
    return make_op<T>(std::move(y), {a, b}, [n, ca, cb](Node<T>& self) {
        const T* dy = self.grad.data();
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            T* da = pa.ensure_grad().data();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < ca; ++j)
                    da[int64_t(i) * ca + j] += dy[int64_t(i) * (ca + cb) + j];
        }
        if (pb.requires_grad) {
            T* db = pb.ensure_grad().data();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < cb; ++j)
                    db[int64_t(i) * cb + j] += dy[int64_t(i) * (ca + cb) + ca + j];
        }
    });
}

template <typename T>
NodeP<T> slice_cols(const NodeP<T>& x, int c0, int c1) {
    const int n = x->value.dim(0), c = x->value.dim(1);
    Tensor<T> y({n, c1 - c0});
    for (int i = 0; i < n; ++i)
        for (int j = c0; j < c1; ++j)
            y.at(i, j - c0) = x->value.at(i, j);
    return make_op<T>(std::move(y), {x}, [n, c, c0, c1](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* dy = self.grad.data();
        for (int i = 0; i < n; ++i)
            for (int j = c0; j < c1; ++j)
                dx[int64_t(i) * c + j] += dy[int64_t(i) * (c1 - c0) + (j - c0)];
    });
}

template <typename T>
NodeP<T> slice_rows(const NodeP<T>& x, int r0, int r1) {
    const int c = x->value.dim(1);
    Tensor<T> y({r1 - r0, c});
    std::copy(x->value.data() + int64_t(r0) * c, x->value.data() + int64_t(r1) * c,
              y.data());
    return make_op<T>(std::move(y), {x}, [r0, r1, c](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* dy = self.grad.data();
        const int64_t n = int64_t(r1 - r0) * c;
        for (int64_t i = 0; i < n; ++i) dx[int64_t(r0) * c + i] += dy[i];
    });
}

template <typename T>
NodeP<T> gather_rows(const NodeP<T>& x, std::vector<int> idx) {
    const int c = x->value.dim(1);
    const int m = int(idx.size());
    Tensor<T> y({m, c});
    kern::gather_rows(x->value.data(), idx.data(), y.data(), m, c);
    return make_op<T>(std::move(y), {x}, [idx = std::move(idx), c](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        kern::scatter_add_rows(self.grad.data(), idx.data(),
                               p.ensure_grad().data(), int(idx.size()), c);
    });
}

// out[q] = sum_{j<4} w[4q+j] * x[4q+j]   (x is [4N,1], w constant)
template <typename T>
NodeP<T> weighted_pool4(const NodeP<T>& x, std::vector<T> w) {
    const int n4 = x->value.dim(0);
    const int n = n4 / 4;
    Tensor<T> y({n, 1});
    const T* xv = x->value.data();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int q = 0; q < n; ++q)
        y[q] = w[4 * q] * xv[4 * q] + w[4 * q + 1] * xv[4 * q + 1] +
               w[4 * q + 2] * xv[4 * q + 2] + w[4 * q + 3] * xv[4 * q + 3];
    return make_op<T>(std::move(y), {x}, [w = std::move(w), n](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* dy = self.grad.data();
#pragma omp parallel for schedule(static) if (n > 16384)
        for (int q = 0; q < n; ++q)
            for (int j = 0; j < 4; ++j) dx[4 * q + j] += w[4 * q + j] * dy[q];
    });
}

template <typename T>
NodeP<T> mean_all(const NodeP<T>& x) {
    const int64_t n = x->value.numel();
    Tensor<T> y = Tensor<T>::scalar(kern::reduce_sum(x->value.data(), n) / T(n));
    return make_op<T>(std::move(y), {x}, [n](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T g = self.grad[0] / T(n);
        for (int64_t i = 0; i < n; ++i) dx[i] += g;
    });
}

template <typename T>
NodeP<T> sum_all(const NodeP<T>& x) {
    const int64_t n = x->value.numel();
    Tensor<T> y = Tensor<T>::scalar(kern::reduce_sum(x->value.data(), n));
    return make_op<T>(std::move(y), {x}, [n](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T g = self.grad[0];
        for (int64_t i = 0; i < n; ++i) dx[i] += g;
    });
}

// Mean over each row: [N,C] -> [N,1].
template <typename T>
NodeP<T> row_mean(const NodeP<T>& x) {
    const int n = x->value.dim(0), c = x->value.dim(1);
    Tensor<T> y({n, 1});
    for (int i = 0; i < n; ++i) {
        T s = 0;
        for (int j = 0; j < c; ++j) s += x->value.at(i, j);
        y[i] = s / T(c);
    }
    return make_op<T>(std::move(y), {x}, [n, c](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* dy = self.grad.data();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) dx[int64_t(i) * c + j] += dy[i] / T(c);
    });
}

// Global average pool of a CHW tensor -> [1,C].
template <typename T>
NodeP<T> global_avg_pool(const NodeP<T>& x) {
    const int C = x->value.dim(0);
    const int64_t N = int64_t(x->value.dim(1)) * x->value.dim(2);
    Tensor<T> y({1, C});
    for (int c = 0; c < C; ++c)
        y[c] = kern::reduce_sum(x->value.data() + int64_t(c) * N, N) / T(N);
    return make_op<T>(std::move(y), {x}, [C, N](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        T* dx = p.ensure_grad().data();
        const T* dy = self.grad.data();
        for (int c = 0; c < C; ++c) {
            const T g = dy[c] / T(N);
            for (int64_t i = 0; i < N; ++i) dx[int64_t(c) * N + i] += g;
        }
    });
}

// Weighted sum of scalar nodes.
template <typename T>
NodeP<T> wsum(const std::vector<std::pair<NodeP<T>, T>>& terms) {
    T v = 0;
    std::vector<NodeP<T>> parents;
    std::vector<T> ws;
    for (auto& [n, w] : terms) {
        v += w * n->value[0];
        parents.push_back(n);
        ws.push_back(w);
    }
    return make_op<T>(Tensor<T>::scalar(v), std::move(parents),
                      [ws = std::move(ws)](Node<T>& self) {
                          for (size_t i = 0; i < self.parents.size(); ++i) {
                              auto& p = *self.parents[i];
                              if (!p.requires_grad) continue;
                              p.ensure_grad()[0] += ws[i] * self.grad[0];
                          }
                      });
}

}  // namespace ops

}  // namespace airm
