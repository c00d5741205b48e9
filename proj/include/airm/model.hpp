#pragma once

#include <string>
#include <vector>

#include "airm/affinity.hpp"
#include "airm/airmf.hpp"
#include "airm/encoder.hpp"

namespace airm::model {

enum class EncoderKind { Aee, Cnn };
enum class DecoderKind { Airmf, Sirmf };

const char* encoder_kind_name(EncoderKind k);
const char* decoder_kind_name(DecoderKind k);
EncoderKind encoder_kind_from_name(const std::string& s);
DecoderKind decoder_kind_from_name(const std::string& s);

struct ModelConfig {
    EncoderKind encoder = EncoderKind::Aee;
    DecoderKind decoder = DecoderKind::Airmf;
    bool use_affinity = true;

    encoder::AeeConfig aee;
    encoder::CnnConfig cnn;
    int hyper_ch = 48;
    int hyper_layers = 2;
    int map_depth = 5;
    int map_hidden = 64;
    int map_rank = 20;
    bool map_use_offset = true;

    int feat_dim() const {
        return encoder == EncoderKind::Aee ? aee.d_out : cnn.d_out;
    }
    int stride() const {
        return encoder == EncoderKind::Aee ? encoder::AeeConfig::kStride
                                           : cnn.stride;
    }
    // Input sizes must divide this (the AEE runs an extra stride-2 stage).
    int size_divisor() const {
        return encoder == EncoderKind::Aee ? encoder::AeeConfig::kTotalStride
                                           : cnn.stride;
    }
    airmf::MapNetConfig map_config() const {
        airmf::MapNetConfig mc;
        mc.depth = map_depth;
        mc.hidden = map_hidden;
        mc.in_dim = feat_dim() + 2;
        mc.out_dim = 1;
        mc.rank = map_rank;
        mc.use_offset = map_use_offset;
        return mc;
    }
};

// Bundles the active modules for one architecture arm. Only the modules the
// configuration uses register parameters, so checkpoints carry a manifest
// specific to the arm.
template <typename T>
class Model {
public:
    void build(const ModelConfig& cfg, uint64_t seed) {
        cfg_ = cfg;
        store_ = ParamStore<T>();
        Rng rng(Rng::derive(seed, 0x90DE1));
        if (cfg.encoder == EncoderKind::Aee) {
            aee_.build(store_, cfg.aee, rng);
            if (cfg.use_affinity)
                affhead_.build(store_, cfg.aee.attention_channels(), rng);
        } else {
            cnn_.build(store_, cfg.cnn, rng);
        }
        if (cfg.decoder == DecoderKind::Airmf) {
            airmf::HyperConfig hc;
            hc.feat_dim = cfg.feat_dim();
            hc.conv_ch = cfg.hyper_ch;
            hc.conv_layers = cfg.hyper_layers;
            hc.map = cfg.map_config();
            hyper_.build(store_, hc, rng);
        } else {
            sirmf_.build(store_, cfg.map_config(), rng);
        }
    }

    // image [3,H,W], coarse [H,W] -> feature grid (+ attention when the AEE
    // runs with retain_attention).
    encoder::EncodeResult<T> encode(const Tensor<T>& image,
                                    const Tensor<T>& coarse,
                                    bool retain_attention) const {
        const int H = image.dim(1), W = image.dim(2);
        if (coarse.dim(0) != H || coarse.dim(1) != W)
            throw ShapeError("image/coarse size mismatch");
        Tensor<T> x({4, H, W});
        std::copy(image.vec().begin(), image.vec().end(), x.vec().begin());
        std::copy(coarse.vec().begin(), coarse.vec().end(),
                  x.vec().begin() + int64_t(3) * H * W);
        auto xn = constant(std::move(x));
        if (cfg_.encoder == EncoderKind::Aee)
            return aee_.forward(xn, training, retain_attention);
        encoder::EncodeResult<T> out;
        out.feat = cnn_.forward(xn, training);
        out.h = H / cfg_.cnn.stride;
        out.w = W / cfg_.cnn.stride;
        return out;
    }

    airmf::MapParamNodes<T> map_params(const encoder::EncodeResult<T>& enc) const {
        if (cfg_.decoder == DecoderKind::Airmf)
            return hyper_.forward(enc.feat, enc.h, enc.w, training);
        return sirmf_.nodes();
    }

    // Per-pair affinity predictions in (0,1): attention head for the AEE,
    // feature-distance form for the CNN arm.
    NodeP<T> affinity_pairs(const encoder::EncodeResult<T>& enc,
                            const std::vector<std::pair<int, int>>& pairs) const {
        if (pairs.empty()) return nullptr;
        if (cfg_.encoder == EncoderKind::Aee)
            return affhead_.predict_pairs(enc.att, pairs);
        return encoder::cnn_affinity_pairs(enc.feat, pairs);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }
    const encoder::AeeEncoder<T>& aee() const { return aee_; }
    const encoder::CnnEncoder<T>& cnn() const { return cnn_; }
    const encoder::AffinityHead<T>& affinity_head() const { return affhead_; }
    const airmf::HyperNet<T>& hyper() const { return hyper_; }
    const airmf::SharedMapNet<T>& sirmf() const { return sirmf_; }

    bool training = true;

private:
    ModelConfig cfg_;
    ParamStore<T> store_;
    encoder::AeeEncoder<T> aee_;
    encoder::CnnEncoder<T> cnn_;
    encoder::AffinityHead<T> affhead_;
    airmf::HyperNet<T> hyper_;
    airmf::SharedMapNet<T> sirmf_;
};

}  // namespace airm::model
