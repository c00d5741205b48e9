#include "airm/losses.hpp"

#include <algorithm>
#include <cmath>

#include "airm/common.hpp"

namespace airm::losses {

namespace {
void check_same(const TensorF& a, const TensorF& b) {
    if (!a.same_shape(b))
        throw ShapeError("loss inputs differ in shape: " + a.shape_str() +
                         " vs " + b.shape_str());
}
}  // namespace

double l1_loss(const TensorF& pred, const TensorF& gt) {
    check_same(pred, gt);
    double s = 0;
    for (int64_t i = 0; i < pred.numel(); ++i)
        s += std::fabs(double(pred[i]) - double(gt[i]));
    return s / double(pred.numel());
}

double l2_loss(const TensorF& pred, const TensorF& gt) {
    check_same(pred, gt);
    double s = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const double d = double(pred[i]) - double(gt[i]);
        s += d * d;
    }
    return s / double(pred.numel());
}

double ce_loss(const TensorF& pred, const TensorF& gt) {
    check_same(pred, gt);
    double s = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const double p = std::clamp(double(pred[i]), kCeEps, 1.0 - kCeEps);
        const double g = double(gt[i]);
        s += g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    }
    return -s / double(pred.numel());
}

double grad_loss(const TensorF& pred, const TensorF& gt) {
    check_same(pred, gt);
    const int H = pred.dim(0), W = pred.dim(1);
    double s = 0;
    int64_t count = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x + 1 < W; ++x) {
            const double dp = double(pred.at(y, x + 1)) - double(pred.at(y, x));
            const double dg = double(gt.at(y, x + 1)) - double(gt.at(y, x));
            s += std::fabs(dp - dg);
            ++count;
        }
    for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double dp = double(pred.at(y + 1, x)) - double(pred.at(y, x));
            const double dg = double(gt.at(y + 1, x)) - double(gt.at(y, x));
            s += std::fabs(dp - dg);
            ++count;
        }
    return count ? s / double(count) : 0.0;
}

AirmfTerms combined_airmf_loss(const TensorF& pred, const TensorF& gt,
                               const LossWeights& w) {
    AirmfTerms t;
    t.l1 = l1_loss(pred, gt);
    t.l2 = l2_loss(pred, gt);
    t.ce = ce_loss(pred, gt);
    t.grad = grad_loss(pred, gt);
    t.combined = w.l1 * t.l1 + w.l2 * t.l2 + w.ce * t.ce + w.grad * t.grad;
    return t;
}

double total_loss(double airmf_term, double aff_term, const LossWeights& w) {
    return w.w_airmf * airmf_term + w.w_aff * aff_term;
}

}  // namespace airm::losses
