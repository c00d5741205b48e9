#include "airm/affinity.hpp"

#include <algorithm>
#include <cmath>

#include "airm/common.hpp"
#include "airm/kernels.hpp"
#include "airm/rng.hpp"

namespace airm::affinity {

Tensor<int> downsample_labels(const TensorF& gt, int h, int w) {
    const int H = gt.dim(0), W = gt.dim(1);
    Tensor<int> grid({h, w});
    for (int y = 0; y < h; ++y) {
        const int sy = std::min(int((y + 0.5) * double(H) / h), H - 1);
        for (int x = 0; x < w; ++x) {
            const int sx = std::min(int((x + 0.5) * double(W) / w), W - 1);
            grid.at(y, x) = gt.at(sy, sx) >= 0.5f ? 1 : 0;
        }
    }
    return grid;
}

TensorF build_gt_affinity(const TensorF& gt, int h, int w) {
    const Tensor<int> grid = downsample_labels(gt, h, w);
    const int n = h * w;
    TensorF aff({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            aff.at(i, j) = grid[i] == grid[j] ? 1.f : 0.f;
    return aff;
}

PairSets build_pair_set(const Tensor<int>& grid, int R, int64_t max_pairs,
                        uint64_t seed) {
    if (R < 1) throw ParamError("pair radius must be >= 1");
    const int h = grid.dim(0), w = grid.dim(1);
    PairSets out;
    out.radius = R;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int i = y * w + x;
            for (int dy = 0; dy <= R && y + dy < h; ++dy) {
                const int dx_lo = dy == 0 ? 1 : -R;
                for (int dx = dx_lo; dx <= R; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= w) continue;
                    const int j = (y + dy) * w + xx;
                    if (grid[i] == grid[j])
                        out.positives.emplace_back(i, j);
                    else
                        out.negatives.emplace_back(i, j);
                }
            }
        }

    const int64_t total = int64_t(out.positives.size() + out.negatives.size());
    if (max_pairs > 0 && total > max_pairs) {
        Rng rng(Rng::derive(seed, 0xAFF));
        const double frac = double(max_pairs) / double(total);
        auto take = [&](std::vector<std::pair<int, int>>& v, int64_t keep) {
            keep = std::min<int64_t>(keep, int64_t(v.size()));
            rng.shuffle(v);
            v.resize(size_t(keep));
            std::sort(v.begin(), v.end());
        };
        int64_t keep_pos = int64_t(std::llround(frac * double(out.positives.size())));
        if (!out.positives.empty()) keep_pos = std::max<int64_t>(keep_pos, 1);
        int64_t keep_neg = max_pairs - keep_pos;
        if (!out.negatives.empty()) keep_neg = std::max<int64_t>(keep_neg, 1);
        take(out.positives, keep_pos);
        take(out.negatives, keep_neg);
    }
    return out;
}

double affinity_loss(const TensorF& aff_pre, const PairSets& pairs) {
    bool clamped = false;
    auto clamp01 = [&](double v) {
        if (v < kAffinityEps || v > 1.0 - kAffinityEps) {
            clamped = true;
            return std::clamp(v, kAffinityEps, 1.0 - kAffinityEps);
        }
        return v;
    };
    double loss = 0.0;
    if (!pairs.positives.empty()) {
        double s = 0.0;
        for (auto& [i, j] : pairs.positives)
            s += std::log(clamp01(double(aff_pre.at(i, j))));
        loss -= s / double(pairs.positives.size());
    }
    if (!pairs.negatives.empty()) {
        double s = 0.0;
        for (auto& [i, j] : pairs.negatives)
            s += std::log(1.0 - clamp01(double(aff_pre.at(i, j))));
        loss -= s / double(pairs.negatives.size());
    }
    if (clamped)
        warn_once("affinity_clamp",
                  "affinity_loss: predictions at {0,1} clamped to [eps,1-eps]");
    return loss;
}

}  // namespace airm::affinity
