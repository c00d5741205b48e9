#pragma once

#include "airm/graph.hpp"
#include "airm/tensor.hpp"

namespace airm::losses {

struct LossWeights {
    double l1 = 0.2;
    double l2 = 0.2;
    double ce = 0.3;
    double grad = 0.4;
    double w_airmf = 0.5;
    double w_aff = 0.5;
};

constexpr double kCeEps = 1e-7;

double l1_loss(const TensorF& pred, const TensorF& gt);
double l2_loss(const TensorF& pred, const TensorF& gt);
// Mean binary cross-entropy; pred clamped to [eps, 1-eps].
double ce_loss(const TensorF& pred, const TensorF& gt);
// Mean L1 distance between forward-difference spatial gradients of pred and
// gt, normalized by the total number of difference entries.
double grad_loss(const TensorF& pred, const TensorF& gt);

struct AirmfTerms {
    double l1 = 0, l2 = 0, ce = 0, grad = 0;
    double combined = 0;
};

AirmfTerms combined_airmf_loss(const TensorF& pred, const TensorF& gt,
                               const LossWeights& w);

double total_loss(double airmf_term, double aff_term, const LossWeights& w);

// ---- Tape forms (same definitions, on graph nodes) -----------------------

template <typename T>
struct AirmfLossNodes {
    NodeP<T> l1, l2, ce, grad;
    NodeP<T> combined;
};

template <typename T>
NodeP<T> l1_loss_node(const NodeP<T>& pred, const NodeP<T>& gt) {
    return ops::mean_all(ops::abs(ops::sub(pred, gt)));
}

template <typename T>
NodeP<T> l2_loss_node(const NodeP<T>& pred, const NodeP<T>& gt) {
    return ops::mean_all(ops::square(ops::sub(pred, gt)));
}

template <typename T>
NodeP<T> ce_loss_node(const NodeP<T>& pred, const NodeP<T>& gt) {
    const T eps = T(kCeEps);
    auto p = ops::clamp(pred, eps, T(1) - eps);
    auto pos = ops::mul(gt, ops::log(p));
    auto neg = ops::mul(ops::affine(gt, T(-1), T(1)),
                        ops::log(ops::affine(p, T(-1), T(1))));
    return ops::affine(ops::mean_all(ops::add(pos, neg)), T(-1), T(0));
}

template <typename T>
NodeP<T> grad_loss_node(const NodeP<T>& pred, const NodeP<T>& gt) {
    const int H = pred->value.dim(0), W = pred->value.dim(1);
    std::vector<std::pair<NodeP<T>, T>> sums;
    int64_t count = 0;
    if (W > 1) {
        auto dxp = ops::sub(ops::slice_cols(pred, 1, W), ops::slice_cols(pred, 0, W - 1));
        auto dxg = ops::sub(ops::slice_cols(gt, 1, W), ops::slice_cols(gt, 0, W - 1));
        sums.emplace_back(ops::sum_all(ops::abs(ops::sub(dxp, dxg))), T(1));
        count += int64_t(H) * (W - 1);
    }
    if (H > 1) {
        auto dyp = ops::sub(ops::slice_rows(pred, 1, H), ops::slice_rows(pred, 0, H - 1));
        auto dyg = ops::sub(ops::slice_rows(gt, 1, H), ops::slice_rows(gt, 0, H - 1));
        sums.emplace_back(ops::sum_all(ops::abs(ops::sub(dyp, dyg))), T(1));
        count += int64_t(H - 1) * W;
    }
    if (count == 0) return constant(Tensor<T>::scalar(T(0)));
    auto total = ops::wsum(sums);
    return ops::affine(total, T(1.0 / double(count)), T(0));
}

template <typename T>
AirmfLossNodes<T> combined_airmf_loss_node(const NodeP<T>& pred,
                                           const NodeP<T>& gt,
                                           const LossWeights& w) {
    AirmfLossNodes<T> out;
    out.l1 = l1_loss_node(pred, gt);
    out.l2 = l2_loss_node(pred, gt);
    out.ce = ce_loss_node(pred, gt);
    out.grad = grad_loss_node(pred, gt);
    out.combined = ops::wsum<T>({{out.l1, T(w.l1)},
                                 {out.l2, T(w.l2)},
                                 {out.ce, T(w.ce)},
                                 {out.grad, T(w.grad)}});
    return out;
}

}  // namespace airm::losses
