#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "airm/params.hpp"

namespace airm::airmf {

// ---- Mapping function f: an L-layer perceptron -----------------------------

struct MapNetConfig {
    int depth = 5;     // number of linear layers
    int hidden = 64;
    int in_dim = 66;   // feature depth + 2 offset channels
    int out_dim = 1;
    int rank = 20;     // low-rank factor width
    bool use_offset = true;  // when false the offset channels are fed as zero

    std::vector<int> layer_dims() const {
        std::vector<int> dims{in_dim};
        for (int l = 0; l < depth - 1; ++l) dims.push_back(hidden);
        dims.push_back(out_dim);
        return dims;
    }
};

// Per-layer parameter counts of the factorized form: A [n_out,r], B [r,n_in],
// bias [n_out].
inline int64_t modulated_layer_count(int n_in, int n_out, int rank) {
    return int64_t(n_out) * rank + int64_t(rank) * n_in + n_out;
}

inline int64_t modulated_param_count(const MapNetConfig& cfg) {
    const auto dims = cfg.layer_dims();
    int64_t total = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l)
        total += modulated_layer_count(dims[l], dims[l + 1], cfg.rank);
    return total;
}

// Low-rank factors emitted by the hypernetwork (value form, for export and
// inspection).
template <typename T>
struct ModulatedParams {
    struct Layer {
        Tensor<T> A;  // [n_out, r]
        Tensor<T> B;  // [r, n_in]
        Tensor<T> b;  // [n_out]
    };
    std::vector<Layer> layers;
    int rank = 0;

    std::vector<T> flatten() const {
        std::vector<T> out;
        for (const auto& l : layers) {
            out.insert(out.end(), l.A.vec().begin(), l.A.vec().end());
            out.insert(out.end(), l.B.vec().begin(), l.B.vec().end());
            out.insert(out.end(), l.b.vec().begin(), l.b.vec().end());
        }
        return out;
    }
};

// W = A * B (plain value form).
template <typename T>
Tensor<T> compose_weights(const Tensor<T>& A, const Tensor<T>& B) {
    if (A.dim(1) != B.dim(0))
        throw ShapeError("compose_weights: inner dims disagree " +
                         A.shape_str() + " x " + B.shape_str());
    Tensor<T> W({A.dim(0), B.dim(1)});
    kern::gemm_nn(A.data(), B.data(), W.data(), A.dim(0), A.dim(1), B.dim(1),
                  false);
    return W;
}

// Composed per-layer weights, value form. Works for both the adaptive and the
// shared decoder.
template <typename T>
struct MapParams {
    std::vector<Tensor<T>> W;  // [n_out, n_in]
    std::vector<Tensor<T>> b;  // [n_out]
};

template <typename T>
MapParams<T> compose(const ModulatedParams<T>& mp) {
    MapParams<T> out;
    for (const auto& l : mp.layers) {
        out.W.push_back(compose_weights(l.A, l.B));
        out.b.push_back(l.b);
    }
    return out;
}

// Graph-node form of the per-layer weights.
template <typename T>
struct MapParamNodes {
    std::vector<NodeP<T>> W;
    std::vector<NodeP<T>> b;
    // Factors kept for rank inspection / export (empty for the shared net).
    std::vector<NodeP<T>> A, B;
};

template <typename T>
MapParams<T> values_of(const MapParamNodes<T>& nodes) {
    MapParams<T> out;
    for (auto& w : nodes.W) out.W.push_back(w->value);
    for (auto& b : nodes.b) {
        Tensor<T> t = b->value;
        t.reshape_inplace({int(t.numel())});
        out.b.push_back(std::move(t));
    }
    return out;
}

template <typename T>
ModulatedParams<T> modulated_values_of(const MapParamNodes<T>& nodes, int rank) {
    ModulatedParams<T> out;
    out.rank = rank;
    for (size_t l = 0; l < nodes.A.size(); ++l) {
        typename ModulatedParams<T>::Layer layer;
        layer.A = nodes.A[l]->value;
        layer.B = nodes.B[l]->value;
        layer.b = nodes.b[l]->value;
        layer.b.reshape_inplace({int(layer.b.numel())});
        out.layers.push_back(std::move(layer));
    }
    return out;
}

// Batched forward of the mapping function on plain tensors: X [M, in_dim] ->
// [M, out_dim]. ReLU between layers, raw logits out.
template <typename T>
Tensor<T> mapnet_forward(const MapParams<T>& p, const Tensor<T>& X) {
    Tensor<T> cur = X;
    for (size_t l = 0; l < p.W.size(); ++l) {
        const int m = cur.dim(0);
        const int n_out = p.W[l].dim(0);
        Tensor<T> next({m, n_out});
        kern::gemm_nt(cur.data(), p.W[l].data(), next.data(), m, cur.dim(1),
                      n_out, false);
        const bool last = l + 1 == p.W.size();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n_out; ++j) {
                T v = next.at(i, j) + p.b[l][j];
                next.at(i, j) = last ? v : (v > 0 ? v : T(0));
            }
        cur = std::move(next);
    }
    return cur;
}

// Single-point evaluation: logit of f(z_p, offset).
template <typename T>
T map_point(const MapParams<T>& p, const std::vector<T>& z, T dx, T dy,
            bool use_offset = true) {
    Tensor<T> X({1, int(z.size()) + 2});
    for (size_t i = 0; i < z.size(); ++i) X[int64_t(i)] = z[i];
    X[int64_t(z.size())] = use_offset ? dx : T(0);
    X[int64_t(z.size()) + 1] = use_offset ? dy : T(0);
    return mapnet_forward(p, X)[0];
}

// Tape form of the batched mapping function.
template <typename T>
NodeP<T> mapnet_forward_node(const MapParamNodes<T>& p, const NodeP<T>& X) {
    NodeP<T> cur = X;
    for (size_t l = 0; l < p.W.size(); ++l) {
        cur = ops::add_rowvec(ops::matmul_nt(cur, p.W[l]), p.b[l]);
        if (l + 1 < p.W.size()) cur = ops::relu(cur);
    }
    return cur;
}

// ---- Query geometry --------------------------------------------------------

// Continuous query coordinates in [-1,1]^2 (x right, y down). Grid-shaped
// batches carry their raster dims.
struct QueryBatch {
    std::vector<double> xs, ys;
    int out_h = 0, out_w = 0;
    size_t size() const { return xs.size(); }
};

QueryBatch make_grid_queries(int out_h, int out_w);

// 4-neighbor local ensemble geometry: neighbor token indices, cell-unit
// offsets (p - q) and normalized area weights (diagonal swap). Weights are
// computed in double so they sum to 1 to machine precision.
struct EnsembleGeometry {
    std::vector<int> idx;        // 4 per query
    std::vector<double> off_x;   // 4 per query, cell units
    std::vector<double> off_y;
    std::vector<double> weight;  // 4 per query, sums to 1 per query
};

EnsembleGeometry ensemble_geometry(int h, int w, const QueryBatch& q);

// Throws ParamError when a coordinate leaves [-1,1] by more than half a cell.
void validate_queries(const QueryBatch& q, int h, int w);

// Sigmoid output clamp keeping decoded masks strictly inside (0,1).
constexpr double kMaskEps = 1e-7;

// Local-ensemble decode on the tape: soft mask values [N,1] in (0,1).
template <typename T>
NodeP<T> local_ensemble_decode_node(const NodeP<T>& feat, int h, int w,
                                    const MapParamNodes<T>& params,
                                    const QueryBatch& q, bool use_offset) {
    validate_queries(q, h, w);
    if (q.size() == 0) return constant(Tensor<T>({0, 1}));
    const EnsembleGeometry geom = ensemble_geometry(h, w, q);
    const int n4 = int(geom.idx.size());
    const int D = feat->value.dim(1);

    auto z = ops::gather_rows(feat, geom.idx);
    Tensor<T> off({n4, 2});
    for (int i = 0; i < n4; ++i) {
        off.at(i, 0) = use_offset ? T(geom.off_x[size_t(i)]) : T(0);
        off.at(i, 1) = use_offset ? T(geom.off_y[size_t(i)]) : T(0);
    }
    auto X = ops::concat_cols(z, constant(std::move(off)));
    (void)D;
    auto logits = mapnet_forward_node(params, X);
    std::vector<T> wts(size_t(n4));
    for (int i = 0; i < n4; ++i) wts[size_t(i)] = T(geom.weight[size_t(i)]);
    auto pooled = ops::weighted_pool4(logits, std::move(wts));
    return ops::clamp(ops::sigmoid(pooled), T(kMaskEps), T(1.0 - kMaskEps));
}

// Plain decode over a full output raster; chunked to bound memory. Returns
// an [out_h, out_w] soft mask.
template <typename T>
Tensor<T> decode_grid(const Tensor<T>& feat, int h, int w,
                      const MapParams<T>& params, int out_h, int out_w,
                      bool use_offset = true) {
    if (out_h < 1 || out_w < 1) throw ParamError("decode_grid: empty output");
    NoGrad ng;
    MapParamNodes<T> pn;
    for (auto& W : params.W) pn.W.push_back(constant(W));
    for (auto& b : params.b) pn.b.push_back(constant(b));
    auto fn = constant(feat);

    const QueryBatch full = make_grid_queries(out_h, out_w);
    Tensor<T> out({out_h, out_w});
    const size_t chunk = 16384;
    for (size_t start = 0; start < full.size(); start += chunk) {
        const size_t end = std::min(full.size(), start + chunk);
        QueryBatch part;
        part.xs.assign(full.xs.begin() + start, full.xs.begin() + end);
        part.ys.assign(full.ys.begin() + start, full.ys.begin() + end);
        auto vals = local_ensemble_decode_node(fn, h, w, pn, part, use_offset);
        for (size_t i = start; i < end; ++i)
            out[int64_t(i)] = vals->value[int64_t(i - start)];
    }
    return out;
}

// ---- Hypernetwork ----------------------------------------------------------

struct HyperConfig {
    int feat_dim = 64;   // D of the incoming feature grid
    int conv_ch = 48;
    int conv_layers = 2;
    MapNetConfig map;
};

// Conv tower -> global average pool -> one linear head emitting the flat
// concatenation of all {A,B,b}. The head bias carries the init scale of the
// factors so the composed W starts in a trainable regime; the head weight is
// small so params vary mildly with the input at init.
template <typename T>
class HyperNet {
public:
    void build(ParamStore<T>& store, const HyperConfig& cfg, Rng& rng) {
        cfg_ = cfg;
        layers_.clear();
        int cin = cfg.feat_dim;
        for (int l = 0; l < cfg.conv_layers; ++l) {
            ConvLayer layer;
            const std::string lp = "hyper.conv" + std::to_string(l);
            layer.w = store.add(lp + ".w", init::he_normal<T>(
                                               {cfg.conv_ch, cin, 3, 3},
                                               cin * 9, rng));
            layer.b = store.add(lp + ".b", init::zeros<T>({cfg.conv_ch}));
            layer.bn_g = store.add(lp + ".bn.g", init::ones<T>({cfg.conv_ch}));
            layer.bn_b = store.add(lp + ".bn.b", init::zeros<T>({cfg.conv_ch}));
            layer.bn_mean = store.add_buffer(lp + ".bn.running_mean",
                                             init::zeros<T>({cfg.conv_ch}));
            layer.bn_var = store.add_buffer(lp + ".bn.running_var",
                                            init::ones<T>({cfg.conv_ch}));
            layers_.push_back(std::move(layer));
            cin = cfg.conv_ch;
        }
        const int64_t total = modulated_param_count(cfg.map);
        head_w_ = store.add("hyper.head.w",
                            init::normal<T>({cfg.conv_ch, int(total)}, 1e-3, rng));
        head_b_ = store.add("hyper.head.b", head_bias_init(rng));
    }

    // F tokens [h*w, D] -> per-layer composed weights.
    MapParamNodes<T> forward(const NodeP<T>& feat, int h, int w,
                             bool training) const {
        NodeP<T> cur = ops::tokens_to_chw(feat, h, w);
        for (const auto& layer : layers_) {
            cur = ops::conv2d(cur, layer.w, layer.b, 1, 1);
            cur = ops::relu(cur);
            cur = ops::batchnorm2d(cur, layer.bn_g, layer.bn_b, layer.bn_mean,
                                   layer.bn_var, training);
        }
        auto pooled = ops::global_avg_pool(cur);                 // [1, ch]
        auto flat = ops::add_rowvec(ops::matmul(pooled, head_w_), head_b_);

        MapParamNodes<T> out;
        const auto dims = cfg_.map.layer_dims();
        const int r = cfg_.map.rank;
        int off = 0;
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            const int n_in = dims[l], n_out = dims[l + 1];
            auto A = ops::reshape(ops::slice_cols(flat, off, off + n_out * r),
                                  {n_out, r});
            off += n_out * r;
            auto B = ops::reshape(ops::slice_cols(flat, off, off + r * n_in),
                                  {r, n_in});
            off += r * n_in;
            auto b = ops::slice_cols(flat, off, off + n_out);
            off += n_out;
            out.A.push_back(A);
            out.B.push_back(B);
            out.W.push_back(ops::matmul(A, B));
            out.b.push_back(b);
        }
        return out;
    }

    const HyperConfig& config() const { return cfg_; }

private:
    Tensor<T> head_bias_init(Rng& rng) const {
        const auto dims = cfg_.map.layer_dims();
        const int r = cfg_.map.rank;
        Tensor<T> b({int(modulated_param_count(cfg_.map))});
        int64_t off = 0;
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            const int n_in = dims[l], n_out = dims[l + 1];
            // Var(W_ij) = r * s^4 = 2/n_in  =>  s = (2/(n_in*r))^(1/4)
            const double s = std::pow(2.0 / (double(n_in) * r), 0.25);
            for (int64_t i = 0; i < int64_t(n_out) * r; ++i)
                b[off++] = T(rng.normal() * s);
            for (int64_t i = 0; i < int64_t(r) * n_in; ++i)
                b[off++] = T(rng.normal() * s);
            for (int i = 0; i < n_out; ++i) b[off++] = T(0);
        }
        return b;
    }

    struct ConvLayer {
        NodeP<T> w, b, bn_g, bn_b;
        Tensor<T>* bn_mean = nullptr;
        Tensor<T>* bn_var = nullptr;
    };
    HyperConfig cfg_;
    std::vector<ConvLayer> layers_;
    NodeP<T> head_w_, head_b_;
};

// ---- Shared mapping function (the non-adaptive baseline) -------------------

template <typename T>
class SharedMapNet {
public:
    void build(ParamStore<T>& store, const MapNetConfig& cfg, Rng& rng) {
        cfg_ = cfg;
        const auto dims = cfg.layer_dims();
        w_.clear();
        b_.clear();
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            const std::string lp = "sirmf.l" + std::to_string(l);
            w_.push_back(store.add(
                lp + ".w", init::he_normal<T>({dims[l + 1], dims[l]}, dims[l], rng)));
            b_.push_back(store.add(lp + ".b", init::zeros<T>({dims[l + 1]})));
        }
    }

    MapParamNodes<T> nodes() const {
        MapParamNodes<T> out;
        out.W = w_;
        out.b = b_;
        return out;
    }

    const MapNetConfig& config() const { return cfg_; }

private:
    MapNetConfig cfg_;
    std::vector<NodeP<T>> w_, b_;
};

}  // namespace airm::airmf
