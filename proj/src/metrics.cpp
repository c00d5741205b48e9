#include "airm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "airm/common.hpp"

namespace airm::metrics {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance transform (Felzenszwalb & Huttenlocher).
void dt1d(const double* f, double* d, int n) {
    std::vector<int> v(size_t(n));
    std::vector<double> z(size_t(n) + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            const int p = v[size_t(k)];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) /
                (2.0 * q - 2.0 * p);
            if (s > z[size_t(k)]) break;
            --k;
        }
        ++k;
        v[size_t(k)] = q;
        z[size_t(k)] = s;
        z[size_t(k) + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[size_t(k) + 1] < q) ++k;
        const int p = v[size_t(k)];
        d[q] = double(q - p) * (q - p) + f[p];
    }
}

void check_binary_pair(const TensorF& a, const TensorF& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || !a.same_shape(b))
        throw ShapeError("metrics: masks must be [H,W] of equal shape, got " +
                         a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

double iou(const TensorF& pred, const TensorF& gt) {
    check_binary_pair(pred, gt);
    int64_t inter = 0, uni = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const bool p = pred[i] >= 0.5f, g = gt[i] >= 0.5f;
        inter += (p && g);
        uni += (p || g);
    }
    if (uni == 0) return 1.0;
    return double(inter) / double(uni);
}

std::vector<std::pair<int, int>> boundary_pixels(const TensorF& mask) {
    const int H = mask.dim(0), W = mask.dim(1);
    std::vector<std::pair<int, int>> out;
    auto at = [&](int y, int x) { return mask.at(y, x) >= 0.5f; };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const bool v = at(y, x);
            if ((y > 0 && at(y - 1, x) != v) || (y + 1 < H && at(y + 1, x) != v) ||
                (x > 0 && at(y, x - 1) != v) || (x + 1 < W && at(y, x + 1) != v))
                out.emplace_back(y, x);
        }
    return out;
}

Tensor<double> boundary_distance_sq(const TensorF& mask) {
    const int H = mask.dim(0), W = mask.dim(1);
    Tensor<double> d({H, W});
    const auto boundary = boundary_pixels(mask);
    std::fill(d.vec().begin(), d.vec().end(), kInf);
    if (boundary.empty()) return d;
    for (auto& [y, x] : boundary) d.at(y, x) = 0.0;

    std::vector<double> col(size_t(H)), colout(size_t(H));
    for (int x = 0; x < W; ++x) {
        for (int y = 0; y < H; ++y) col[size_t(y)] = d.at(y, x);
        dt1d(col.data(), colout.data(), H);
        for (int y = 0; y < H; ++y) d.at(y, x) = colout[size_t(y)];
    }
    std::vector<double> row(size_t(W)), rowout(size_t(W));
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) row[size_t(x)] = d.at(y, x);
        dt1d(row.data(), rowout.data(), W);
        for (int x = 0; x < W; ++x) d.at(y, x) = rowout[size_t(x)];
    }
    return d;
}

TensorF boundary_band(const TensorF& mask, double radius_px) {
    const auto d = boundary_distance_sq(mask);
    TensorF band(mask.shape());
    const double r2 = radius_px * radius_px;
    for (int64_t i = 0; i < band.numel(); ++i)
        band[i] = d[i] <= r2 ? 1.f : 0.f;
    return band;
}

EvalReport mba(const TensorF& pred, const TensorF& gt, int n_radii) {
    check_binary_pair(pred, gt);
    EvalReport rep;
    const int H = gt.dim(0), W = gt.dim(1);
    const auto d = boundary_distance_sq(gt);
    const auto boundary = boundary_pixels(gt);

    if (boundary.empty()) {
        int64_t agree = 0;
        for (int64_t i = 0; i < gt.numel(); ++i)
            agree += (pred[i] >= 0.5f) == (gt[i] >= 0.5f);
        rep.mba = double(agree) / double(gt.numel());
        rep.no_boundary = true;
        rep.per_radius_accuracy.clear();
        return rep;
    }

    const double diag = std::sqrt(double(H) * H + double(W) * W);
    const double rmax = std::max(3.0, 0.02 * diag);
    for (int i = 0; i < n_radii; ++i) {
        const double r = n_radii == 1
                             ? rmax
                             : 1.0 + (rmax - 1.0) * double(i) / double(n_radii - 1);
        const double r2 = r * r;
        int64_t in_band = 0, agree = 0;
        for (int64_t j = 0; j < gt.numel(); ++j) {
            if (d[j] > r2) continue;
            ++in_band;
            agree += (pred[j] >= 0.5f) == (gt[j] >= 0.5f);
        }
        const double acc = in_band ? double(agree) / double(in_band) : 1.0;
        rep.per_radius_accuracy.emplace_back(r, acc);
        rep.mba += acc;
    }
    rep.mba /= double(n_radii);
    return rep;
}

EvalReport evaluate(const TensorF& pred, const TensorF& gt, int n_radii) {
    EvalReport rep = mba(pred, gt, n_radii);
    rep.iou = iou(pred, gt);
    return rep;
}

std::string EvalReport::to_json() const {
    std::ostringstream os;
    os.precision(10);
    os << "{\"iou\":" << iou << ",\"mba\":" << mba << ",\"no_boundary\":"
       << (no_boundary ? "true" : "false") << ",\"per_radius\":[";
    for (size_t i = 0; i < per_radius_accuracy.size(); ++i) {
        if (i) os << ",";
        os << "[" << per_radius_accuracy[i].first << ","
           << per_radius_accuracy[i].second << "]";
    }
    os << "]}";
    return os.str();
}

std::string EvalReport::csv_header() { return "id,iou,mba,no_boundary"; }

std::string EvalReport::to_csv_row(const std::string& id) const {
    std::ostringstream os;
    os.precision(10);
    os << id << "," << iou << "," << mba << "," << (no_boundary ? 1 : 0);
    return os.str();
}

}  // namespace airm::metrics
