#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "airm/params.hpp"

namespace airm::encoder {

// ---- Feature / attention containers ------------------------------------

template <typename T>
struct FeatureGrid {
    Tensor<T> data;  // [h*w, D] tokens, flat index y*w + x
    int h = 0, w = 0;
    int stride = 0;  // input pixels per cell
    int depth() const { return data.dim(1); }
};

template <typename T>
struct AttentionStack {
    // c matrices of shape [hw, hw]; channel order is block-major then head.
    std::vector<Tensor<T>> maps;
    int tokens() const { return maps.empty() ? 0 : maps[0].dim(0); }
    int channels() const { return int(maps.size()); }
};

// ---- AEE: two-stage mix-transformer with exposed attention ---------------

struct AeeConfig {
    int in_ch = 4;   // RGB + coarse mask
    int c1 = 32;     // stage-1 width (tokens at stride 4)
    int c2 = 64;     // stage-2 width (tokens at stride 8)
    int blocks1 = 2;
    int blocks2 = 2;
    int heads1 = 2;
    int heads2 = 2;
    int ffn_expand = 2;
    int d_out = 64;  // D of the fused feature grid

    static constexpr int kStride = 4;       // feature-grid stride
    static constexpr int kTotalStride = 8;  // input divisibility requirement
    int attention_channels() const { return blocks1 * heads1; }
};

template <typename T>
struct EncodeResult {
    NodeP<T> feat;              // [h*w, D]
    std::vector<NodeP<T>> att;  // retained attention maps, [hw, hw] each
    int h = 0, w = 0;
};

template <typename T>
class AeeEncoder {
public:
    void build(ParamStore<T>& store, const AeeConfig& cfg, Rng& rng) {
        cfg_ = cfg;
        build_stage(store, s1_, "aee.s1", cfg.in_ch, cfg.c1, cfg.blocks1,
                    cfg.heads1, 7, rng);
        build_stage(store, s2_, "aee.s2", cfg.c1, cfg.c2, cfg.blocks2,
                    cfg.heads2, 3, rng);
        const int fused = cfg.c1 + cfg.c2;
        fuse_w_ = store.add("aee.fuse.w",
                            init::he_normal<T>({fused, cfg.d_out}, fused, rng));
        fuse_b_ = store.add("aee.fuse.b", init::zeros<T>({cfg.d_out}));
    }

    // x: [in_ch, H, W]; H and W must be divisible by kTotalStride.
    EncodeResult<T> forward(const NodeP<T>& x, bool training,
                            bool retain_attention) const {
        (void)training;  // the transformer has no train-only statistics
        const int H = x->value.dim(1), W = x->value.dim(2);
        if (H % AeeConfig::kTotalStride || W % AeeConfig::kTotalStride)
            throw ShapeError("AEE input " + std::to_string(H) + "x" +
                             std::to_string(W) + " not divisible by " +
                             std::to_string(AeeConfig::kTotalStride));
        EncodeResult<T> out;
        out.h = H / AeeConfig::kStride;
        out.w = W / AeeConfig::kStride;

        // Stage 1 at stride 4 (kernel 7, pad 3): tokens align with the
        // feature grid, so its attention maps feed affinity prediction.
        auto t1 = ops::conv2d(x, s1_.embed_w, s1_.embed_b, 4, 3);
        auto tokens1 = ops::layernorm_rows(ops::chw_to_tokens(t1),
                                           s1_.embed_ln_g, s1_.embed_ln_b);
        for (const auto& blk : s1_.blocks)
            tokens1 = run_block(blk, tokens1, out.h, out.w,
                                retain_attention ? &out.att : nullptr);
        tokens1 = ops::layernorm_rows(tokens1, s1_.out_ln_g, s1_.out_ln_b);

        // Stage 2 at stride 8 (kernel 3, pad 1).
        const int h2 = out.h / 2, w2 = out.w / 2;
        auto t2 = ops::conv2d(ops::tokens_to_chw(tokens1, out.h, out.w),
                              s2_.embed_w, s2_.embed_b, 2, 1);
        auto tokens2 = ops::layernorm_rows(ops::chw_to_tokens(t2),
                                           s2_.embed_ln_g, s2_.embed_ln_b);
        for (const auto& blk : s2_.blocks)
            tokens2 = run_block(blk, tokens2, h2, w2, nullptr);
        tokens2 = ops::layernorm_rows(tokens2, s2_.out_ln_g, s2_.out_ln_b);

        // Fuse both stages on the stride-4 grid.
        auto up2 = ops::chw_to_tokens(
            ops::upsample2x_chw(ops::tokens_to_chw(tokens2, h2, w2)));
        auto cat = ops::concat_cols(tokens1, up2);
        out.feat = ops::add_rowvec(ops::matmul(cat, fuse_w_), fuse_b_);
        return out;
    }

    const AeeConfig& config() const { return cfg_; }

private:
    struct Block {
        NodeP<T> ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
        NodeP<T> ln2_g, ln2_b, fc1_w, fc1_b, dw_w, dw_b, fc2_w, fc2_b;
        int heads = 0;
    };
    struct Stage {
        NodeP<T> embed_w, embed_b, embed_ln_g, embed_ln_b;
        NodeP<T> out_ln_g, out_ln_b;
        std::vector<Block> blocks;
        int width = 0;
    };

    void build_stage(ParamStore<T>& store, Stage& st, const std::string& prefix,
                     int cin, int width, int blocks, int heads, int patch_k,
                     Rng& rng) {
        st.width = width;
        st.embed_w = store.add(
            prefix + ".embed.w",
            init::he_normal<T>({width, cin, patch_k, patch_k},
                               cin * patch_k * patch_k, rng));
        st.embed_b = store.add(prefix + ".embed.b", init::zeros<T>({width}));
        st.embed_ln_g = store.add(prefix + ".embed.ln.g", init::ones<T>({width}));
        st.embed_ln_b = store.add(prefix + ".embed.ln.b", init::zeros<T>({width}));
        const int e = width * 2;  // ffn expansion fixed by cfg at build time
        for (int b = 0; b < blocks; ++b) {
            Block blk;
            blk.heads = heads;
            const std::string bp = prefix + ".blk" + std::to_string(b);
            blk.ln1_g = store.add(bp + ".ln1.g", init::ones<T>({width}));
            blk.ln1_b = store.add(bp + ".ln1.b", init::zeros<T>({width}));
            blk.wq = store.add(bp + ".attn.wq",
                               init::xavier_uniform<T>({width, width}, width,
                                                       width, rng));
            blk.bq = store.add(bp + ".attn.bq", init::zeros<T>({width}));
            blk.wk = store.add(bp + ".attn.wk",
                               init::xavier_uniform<T>({width, width}, width,
                                                       width, rng));
            blk.bk = store.add(bp + ".attn.bk", init::zeros<T>({width}));
            blk.wv = store.add(bp + ".attn.wv",
                               init::xavier_uniform<T>({width, width}, width,
                                                       width, rng));
            blk.bv = store.add(bp + ".attn.bv", init::zeros<T>({width}));
            blk.wo = store.add(bp + ".attn.wo",
                               init::xavier_uniform<T>({width, width}, width,
                                                       width, rng));
            blk.bo = store.add(bp + ".attn.bo", init::zeros<T>({width}));
            blk.ln2_g = store.add(bp + ".ln2.g", init::ones<T>({width}));
            blk.ln2_b = store.add(bp + ".ln2.b", init::zeros<T>({width}));
            blk.fc1_w = store.add(bp + ".ffn.fc1.w",
                                  init::he_normal<T>({width, e}, width, rng));
            blk.fc1_b = store.add(bp + ".ffn.fc1.b", init::zeros<T>({e}));
            blk.dw_w = store.add(bp + ".ffn.dw.w",
                                 init::he_normal<T>({e, 1, 3, 3}, 9, rng));
            blk.dw_b = store.add(bp + ".ffn.dw.b", init::zeros<T>({e}));
            blk.fc2_w = store.add(bp + ".ffn.fc2.w",
                                  init::he_normal<T>({e, width}, e, rng));
            blk.fc2_b = store.add(bp + ".ffn.fc2.b", init::zeros<T>({width}));
            st.blocks.push_back(std::move(blk));
        }
        st.out_ln_g = store.add(prefix + ".ln.g", init::ones<T>({width}));
        st.out_ln_b = store.add(prefix + ".ln.b", init::zeros<T>({width}));
    }

    // Pre-norm block: x += MHSA(LN(x)); x += MixFFN(LN(x)).
    // MixFFN carries a 3x3 depthwise conv between the two linear layers in
    // place of positional encoding.
    NodeP<T> run_block(const Block& blk, const NodeP<T>& tokens, int h, int w,
                       std::vector<NodeP<T>>* att_sink) const {
        const int width = tokens->value.dim(1);
        const int d = width / blk.heads;
        auto xn = ops::layernorm_rows(tokens, blk.ln1_g, blk.ln1_b);
        auto q = ops::add_rowvec(ops::matmul(xn, blk.wq), blk.bq);
        auto k = ops::add_rowvec(ops::matmul(xn, blk.wk), blk.bk);
        auto v = ops::add_rowvec(ops::matmul(xn, blk.wv), blk.bv);
        NodeP<T> heads_cat;
        for (int hd = 0; hd < blk.heads; ++hd) {
            auto qh = ops::slice_cols(q, hd * d, (hd + 1) * d);
            auto kh = ops::slice_cols(k, hd * d, (hd + 1) * d);
            auto vh = ops::slice_cols(v, hd * d, (hd + 1) * d);
            auto scores = ops::affine(ops::matmul_nt(qh, kh),
                                      T(1.0 / std::sqrt(double(d))), T(0));
            auto probs = ops::softmax_rows(scores);
            if (att_sink) att_sink->push_back(probs);
            auto oh = ops::matmul(probs, vh);
            heads_cat = hd == 0 ? oh : ops::concat_cols(heads_cat, oh);
        }
        auto attn_out =
            ops::add_rowvec(ops::matmul(heads_cat, blk.wo), blk.bo);
        auto x1 = ops::add(tokens, attn_out);

        auto x1n = ops::layernorm_rows(x1, blk.ln2_g, blk.ln2_b);
        auto f = ops::add_rowvec(ops::matmul(x1n, blk.fc1_w), blk.fc1_b);
        const int e = f->value.dim(1);
        auto fg = ops::conv2d(ops::tokens_to_chw(f, h, w), blk.dw_w, blk.dw_b,
                              1, 1, e);
        auto fa = ops::gelu(ops::chw_to_tokens(fg));
        auto ffn_out = ops::add_rowvec(ops::matmul(fa, blk.fc2_w), blk.fc2_b);
        return ops::add(x1, ffn_out);
    }

    AeeConfig cfg_;
    Stage s1_, s2_;
    NodeP<T> fuse_w_, fuse_b_;
};

// ---- Simple CNN encoder ---------------------------------------------------

struct CnnConfig {
    int in_ch = 4;
    int kernel = 3;  // odd
    int depth = 3;
    int stride = 4;  // carried by the first layer
    int d_out = 64;
};

template <typename T>
class CnnEncoder {
public:
    void build(ParamStore<T>& store, const CnnConfig& cfg, Rng& rng) {
        if (cfg.kernel < 1 || cfg.kernel % 2 == 0)
            throw ParamError("CNN encoder kernel must be odd and >= 1, got " +
                             std::to_string(cfg.kernel));
        if (cfg.depth < 1) throw ParamError("CNN encoder depth must be >= 1");
        cfg_ = cfg;
        layers_.clear();
        for (int l = 0; l < cfg.depth; ++l) {
            Layer layer;
            const int cin = l == 0 ? cfg.in_ch : cfg.d_out;
            const std::string lp = "cnn.l" + std::to_string(l);
            layer.w = store.add(
                lp + ".conv.w",
                init::he_normal<T>({cfg.d_out, cin, cfg.kernel, cfg.kernel},
                                   cin * cfg.kernel * cfg.kernel, rng));
            layer.b = store.add(lp + ".conv.b", init::zeros<T>({cfg.d_out}));
            layer.bn_g = store.add(lp + ".bn.g", init::ones<T>({cfg.d_out}));
            layer.bn_b = store.add(lp + ".bn.b", init::zeros<T>({cfg.d_out}));
            layer.bn_mean =
                store.add_buffer(lp + ".bn.running_mean", init::zeros<T>({cfg.d_out}));
            layer.bn_var =
                store.add_buffer(lp + ".bn.running_var", init::ones<T>({cfg.d_out}));
            layers_.push_back(std::move(layer));
        }
    }

    // x: [in_ch, H, W] with H, W divisible by cfg.stride. Layers are
    // Conv -> ReLU -> BatchNorm; the first conv carries the stride.
    NodeP<T> forward(const NodeP<T>& x, bool training) const {
        const int H = x->value.dim(1), W = x->value.dim(2);
        if (H % cfg_.stride || W % cfg_.stride)
            throw ShapeError("CNN input not divisible by stride");
        const int pad = (cfg_.kernel - 1) / 2;
        NodeP<T> cur = x;
        for (size_t l = 0; l < layers_.size(); ++l) {
            const auto& layer = layers_[l];
            const int stride = l == 0 ? cfg_.stride : 1;
            cur = ops::conv2d(cur, layer.w, layer.b, stride, pad);
            cur = ops::relu(cur);
            cur = ops::batchnorm2d(cur, layer.bn_g, layer.bn_b, layer.bn_mean,
                                   layer.bn_var, training);
        }
        return ops::chw_to_tokens(cur);
    }

    const CnnConfig& config() const { return cfg_; }

private:
    struct Layer {
        NodeP<T> w, b, bn_g, bn_b;
        Tensor<T>* bn_mean = nullptr;
        Tensor<T>* bn_var = nullptr;
    };
    CnnConfig cfg_;
    std::vector<Layer> layers_;
};

// Closed-form receptive field of the stacked conv encoder: the first layer
// contributes the kernel at input resolution, each later layer widens it by
// (k-1)*stride input pixels.
inline int receptive_field_of(int kernel_size, int depth, int stride) {
    return 1 + (kernel_size - 1) * (1 + (depth - 1) * stride);
}

// ---- Affinity prediction head --------------------------------------------

template <typename T>
class AffinityHead {
public:
    void build(ParamStore<T>& store, int channels, Rng& rng) {
        channels_ = channels;
        w_ = store.add("affhead.w",
                       init::normal<T>({channels, 1}, 1.0 / std::sqrt(channels), rng));
        b_ = store.add("affhead.b", init::zeros<T>({1}));
    }

    // Full-matrix form: sigmoid(linear(ATT + ATT^T)) per (i,j). Symmetric by
    // construction because the per-pair input vector is symmetric.
    Tensor<T> predict_full(const AttentionStack<T>& att) const {
        const int n = att.tokens();
        Tensor<T> out({n, n});
        const T bias = b_->value[0];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                T z = bias;
                for (int c = 0; c < att.channels(); ++c)
                    z += w_->value[c] *
                         (att.maps[size_t(c)].at(i, j) + att.maps[size_t(c)].at(j, i));
                out.at(i, j) = T(1) / (T(1) + std::exp(-z));
            }
        return out;
    }

    // Tape form restricted to pair indices. Returns [P,1] in (0,1).
    NodeP<T> predict_pairs(const std::vector<NodeP<T>>& att,
                           const std::vector<std::pair<int, int>>& pairs) const {
        const int n = att[0]->value.dim(0);
        std::vector<int> ij, ji;
        ij.reserve(pairs.size());
        ji.reserve(pairs.size());
        for (auto& [i, j] : pairs) {
            ij.push_back(i * n + j);
            ji.push_back(j * n + i);
        }
        NodeP<T> feat;
        for (size_t c = 0; c < att.size(); ++c) {
            auto flat = ops::reshape(att[c], {n * n, 1});
            auto s = ops::add(ops::gather_rows(flat, ij),
                              ops::gather_rows(flat, ji));
            feat = c == 0 ? s : ops::concat_cols(feat, s);
        }
        return ops::sigmoid(ops::add_rowvec(ops::matmul(feat, w_), b_));
    }

    int channels() const { return channels_; }

private:
    NodeP<T> w_, b_;
    int channels_ = 0;
};

// Affinity from CNN features: exp(-mean |z_i - z_j|) per pair, in (0,1].
template <typename T>
NodeP<T> cnn_affinity_pairs(const NodeP<T>& feat,
                            const std::vector<std::pair<int, int>>& pairs) {
    std::vector<int> is, js;
    is.reserve(pairs.size());
    js.reserve(pairs.size());
    for (auto& [i, j] : pairs) {
        is.push_back(i);
        js.push_back(j);
    }
    auto zi = ops::gather_rows(feat, is);
    auto zj = ops::gather_rows(feat, js);
    auto dist = ops::row_mean(ops::abs(ops::sub(zi, zj)));
    return ops::exp(ops::affine(dist, T(-1), T(0)));
}

}  // namespace airm::encoder
