#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "airm/graph.hpp"
#include "airm/tensor.hpp"

namespace airm::affinity {

// Unordered within-radius pixel pairs on the feature grid, split by label
// agreement. Each pair is stored once with i < j (flat index y*w + x).
struct PairSets {
    std::vector<std::pair<int, int>> positives;
    std::vector<std::pair<int, int>> negatives;
    int radius = 0;
};

// Nearest-neighbor downsample of a binary [H,W] mask to [h,w] integer labels.
Tensor<int> downsample_labels(const TensorF& gt, int h, int w);

// Full hw x hw ground-truth affinity: 1 iff grid labels are equal.
// Symmetric with unit diagonal.
TensorF build_gt_affinity(const TensorF& gt, int h, int w);

// Enumerate unordered pairs within Chebyshev radius R and classify by label
// equality. When the total exceeds max_pairs, subsample uniformly (seeded)
// preserving the positive:negative ratio. max_pairs <= 0 means unlimited.
PairSets build_pair_set(const Tensor<int>& grid, int R, int64_t max_pairs,
                        uint64_t seed);

// -mean over S- of log(1-aff) - mean over S+ of log(aff); an empty subset
// contributes 0. Entries are clamped to [eps, 1-eps] with eps = 1e-7.
double affinity_loss(const TensorF& aff_pre, const PairSets& pairs);

constexpr double kAffinityEps = 1e-7;

// Tape form on gathered predictions, for training. Either node may be null
// (empty subset).
template <typename T>
NodeP<T> affinity_loss_node(const NodeP<T>& pos, const NodeP<T>& neg) {
    std::vector<std::pair<NodeP<T>, T>> terms;
    if (pos && pos->value.numel() > 0) {
        auto t = ops::mean_all(ops::log(ops::clamp(pos, T(kAffinityEps),
                                                   T(1.0 - kAffinityEps))));
        terms.emplace_back(t, T(-1));
    }
    if (neg && neg->value.numel() > 0) {
        auto one_minus = ops::affine(neg, T(-1), T(1));
        auto t = ops::mean_all(ops::log(ops::clamp(one_minus, T(kAffinityEps),
                                                   T(1.0 - kAffinityEps))));
        terms.emplace_back(t, T(-1));
    }
    if (terms.empty()) return constant(Tensor<T>::scalar(T(0)));
    return ops::wsum(terms);
}

}  // namespace airm::affinity
