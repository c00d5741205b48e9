#include "airm/airmf.hpp"

#include <algorithm>
#include <cmath>

namespace airm::airmf {

QueryBatch make_grid_queries(int out_h, int out_w) {
    QueryBatch q;
    q.out_h = out_h;
    q.out_w = out_w;
    q.xs.reserve(size_t(out_h) * out_w);
    q.ys.reserve(size_t(out_h) * out_w);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            q.ys.push_back(-1.0 + (2.0 * y + 1.0) / out_h);
            q.xs.push_back(-1.0 + (2.0 * x + 1.0) / out_w);
        }
    return q;
}

void validate_queries(const QueryBatch& q, int h, int w) {
    const double slack_x = 1.0 / w + 1e-9;
    const double slack_y = 1.0 / h + 1e-9;
    for (size_t i = 0; i < q.size(); ++i) {
        if (std::fabs(q.xs[i]) > 1.0 + slack_x ||
            std::fabs(q.ys[i]) > 1.0 + slack_y)
            throw ParamError("query coordinate out of range: (" +
                             std::to_string(q.xs[i]) + "," +
                             std::to_string(q.ys[i]) + ")");
    }
}

EnsembleGeometry ensemble_geometry(int h, int w, const QueryBatch& q) {
    EnsembleGeometry g;
    const size_t n = q.size();
    g.idx.resize(4 * n);
    g.off_x.resize(4 * n);
    g.off_y.resize(4 * n);
    g.weight.resize(4 * n);
    for (size_t i = 0; i < n; ++i) {
        // Continuous cell coordinates; cell centers sit at integers.
        const double tx_raw = (q.xs[i] + 1.0) * 0.5 * w - 0.5;
        const double ty_raw = (q.ys[i] + 1.0) * 0.5 * h - 0.5;
        const double tx = std::clamp(tx_raw, 0.0, double(w - 1));
        const double ty = std::clamp(ty_raw, 0.0, double(h - 1));
        int x0, x1, y0, y1;
        if (w >= 2) {
            x0 = std::min(int(std::floor(tx)), w - 2);
            x1 = x0 + 1;
        } else {
            x0 = x1 = 0;
        }
        if (h >= 2) {
            y0 = std::min(int(std::floor(ty)), h - 2);
            y1 = y0 + 1;
        } else {
            y0 = y1 = 0;
        }
        // Diagonal-swap area weights: each neighbor is weighted by the area
        // of the rectangle between the query and the opposite cell center.
        const double ax1 = std::fabs(tx - x0), ax0 = std::fabs(x1 - tx);
        const double ay1 = std::fabs(ty - y0), ay0 = std::fabs(y1 - ty);
        double wts[4] = {ax0 * ay0, ax1 * ay0, ax0 * ay1, ax1 * ay1};
        const int xs4[4] = {x0, x1, x0, x1};
        const int ys4[4] = {y0, y0, y1, y1};
        double total = wts[0] + wts[1] + wts[2] + wts[3];
        if (total < 1e-12) {
            wts[0] = wts[1] = wts[2] = wts[3] = 0.25;
            total = 1.0;
        }
        for (int k = 0; k < 4; ++k) {
            const size_t o = 4 * i + size_t(k);
            g.idx[o] = ys4[k] * w + xs4[k];
            g.off_x[o] = double(xs4[k]) - tx_raw;
            g.off_y[o] = double(ys4[k]) - ty_raw;
            g.weight[o] = wts[k] / total;
        }
    }
    return g;
}

}  // namespace airm::airmf
