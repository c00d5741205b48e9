#include "airm/trainer.hpp"

#include <algorithm>

namespace airm::model {

const char* encoder_kind_name(EncoderKind k) {
    return k == EncoderKind::Aee ? "aee" : "cnn";
}
const char* decoder_kind_name(DecoderKind k) {
    return k == DecoderKind::Airmf ? "airmf" : "sirmf";
}
EncoderKind encoder_kind_from_name(const std::string& s) {
    if (s == "aee") return EncoderKind::Aee;
    if (s == "cnn") return EncoderKind::Cnn;
    throw ParamError("unknown encoder kind '" + s + "' (aee|cnn)");
}
DecoderKind decoder_kind_from_name(const std::string& s) {
    if (s == "airmf") return DecoderKind::Airmf;
    if (s == "sirmf") return DecoderKind::Sirmf;
    throw ParamError("unknown decoder kind '" + s + "' (airmf|sirmf)");
}

}  // namespace airm::model

namespace airm::trainer {

TrainConfig TrainConfig::from_config(const config::Config& c) {
    TrainConfig t;
    t.profile = c.get("profile", "desk");
    if (t.profile == "paper") {
        t.lr = 2.25e-5;
        t.total_iters = 45000;
        t.decay_iters = {22500, 37500};
        t.crop = 224;
        t.radius = 14;
        t.model.map_hidden = 256;
    } else if (t.profile != "desk") {
        throw ParamError("unknown profile '" + t.profile + "' (desk|paper)");
    }
    t.lr = c.getd("lr", t.lr);
    t.total_iters = c.geti("total_iters", t.total_iters);
    {
        std::vector<double> dflt;
        for (auto v : t.decay_iters) dflt.push_back(double(v));
        t.decay_iters.clear();
        for (double v : c.get_list("decay_iters", dflt))
            t.decay_iters.push_back(int64_t(v));
    }
    t.crop = int(c.geti("crop", t.crop));
    t.iou_lo = c.getd("iou_lo", t.iou_lo);
    t.iou_hi = c.getd("iou_hi", t.iou_hi);
    t.radius = int(c.geti("radius", t.radius));
    t.max_pairs = c.geti("max_pairs", t.max_pairs);
    t.weights.l1 = c.getd("lambda1", t.weights.l1);
    t.weights.l2 = c.getd("lambda2", t.weights.l2);
    t.weights.ce = c.getd("lambda3", t.weights.ce);
    t.weights.grad = c.getd("lambda4", t.weights.grad);
    t.weights.w_airmf = c.getd("w_airmf", t.weights.w_airmf);
    t.weights.w_aff = c.getd("w_aff", t.weights.w_aff);
    t.seed = uint64_t(c.geti("seed", int64_t(t.seed)));
    t.batch_size = int(c.geti("batch_size", t.batch_size));
    t.deterministic = c.getb("deterministic", t.deterministic);
    t.data_root = c.get("data_root", t.data_root);

    t.model.encoder =
        model::encoder_kind_from_name(c.get("encoder", "aee"));
    t.model.decoder =
        model::decoder_kind_from_name(c.get("decoder", "airmf"));
    t.model.use_affinity = c.getb("affinity", t.model.use_affinity);
    const int d = int(c.geti("feat_dim", 64));
    t.model.aee.d_out = d;
    t.model.cnn.d_out = d;
    t.model.aee.c1 = int(c.geti("aee_c1", t.model.aee.c1));
    t.model.aee.c2 = int(c.geti("aee_c2", t.model.aee.c2));
    t.model.aee.blocks1 = int(c.geti("aee_blocks", t.model.aee.blocks1));
    t.model.aee.blocks2 = t.model.aee.blocks1;
    t.model.aee.heads1 = int(c.geti("aee_heads", t.model.aee.heads1));
    t.model.aee.heads2 = t.model.aee.heads1;
    t.model.cnn.kernel = int(c.geti("cnn_kernel", t.model.cnn.kernel));
    t.model.cnn.depth = int(c.geti("cnn_depth", t.model.cnn.depth));
    t.model.cnn.stride = int(c.geti("cnn_stride", t.model.cnn.stride));
    t.model.hyper_ch = int(c.geti("hyper_ch", t.model.hyper_ch));
    t.model.hyper_layers = int(c.geti("hyper_layers", t.model.hyper_layers));
    t.model.map_depth = int(c.geti("map_depth", t.model.map_depth));
    t.model.map_hidden = int(c.geti("map_hidden", t.model.map_hidden));
    t.model.map_rank = int(c.geti("map_rank", t.model.map_rank));
    t.model.map_use_offset = c.getb("map_use_offset", t.model.map_use_offset);
    t.validate();
    return t;
}

config::Config TrainConfig::to_config() const {
    config::Config c;
    c.set("profile", profile);
    c.setd("lr", lr);
    c.seti("total_iters", total_iters);
    {
        std::vector<double> d;
        for (auto v : decay_iters) d.push_back(double(v));
        c.set_list("decay_iters", d);
    }
    c.seti("crop", crop);
    c.setd("iou_lo", iou_lo);
    c.setd("iou_hi", iou_hi);
    c.seti("radius", radius);
    c.seti("max_pairs", max_pairs);
    c.setd("lambda1", weights.l1);
    c.setd("lambda2", weights.l2);
    c.setd("lambda3", weights.ce);
    c.setd("lambda4", weights.grad);
    c.setd("w_airmf", weights.w_airmf);
    c.setd("w_aff", weights.w_aff);
    c.seti("seed", int64_t(seed));
    c.seti("batch_size", batch_size);
    c.setb("deterministic", deterministic);
    if (!data_root.empty()) c.set("data_root", data_root);
    c.set("encoder", model::encoder_kind_name(model.encoder));
    c.set("decoder", model::decoder_kind_name(model.decoder));
    c.setb("affinity", model.use_affinity);
    c.seti("feat_dim", model.feat_dim());
    c.seti("aee_c1", model.aee.c1);
    c.seti("aee_c2", model.aee.c2);
    c.seti("aee_blocks", model.aee.blocks1);
    c.seti("aee_heads", model.aee.heads1);
    c.seti("cnn_kernel", model.cnn.kernel);
    c.seti("cnn_depth", model.cnn.depth);
    c.seti("cnn_stride", model.cnn.stride);
    c.seti("hyper_ch", model.hyper_ch);
    c.seti("hyper_layers", model.hyper_layers);
    c.seti("map_depth", model.map_depth);
    c.seti("map_hidden", model.map_hidden);
    c.seti("map_rank", model.map_rank);
    c.setb("map_use_offset", model.map_use_offset);
    return c;
}

void TrainConfig::validate() const {
    if (lr <= 0) throw ParamError("lr must be positive");
    if (total_iters < 0) throw ParamError("total_iters must be >= 0");
    for (size_t i = 0; i < decay_iters.size(); ++i) {
        if (decay_iters[i] >= total_iters && total_iters > 0)
            throw ParamError("decay iteration " +
                             std::to_string(decay_iters[i]) +
                             " must be < total_iters");
        if (i > 0 && decay_iters[i] <= decay_iters[i - 1])
            throw ParamError("decay_iters must be strictly increasing");
    }
    if (!(iou_lo > 0 && iou_lo <= iou_hi && iou_hi <= 1.0))
        throw ParamError("invalid IoU band");
    if (radius < 1) throw ParamError("radius must be >= 1");
    if (batch_size < 1) throw ParamError("batch_size must be >= 1");
    if (weights.l1 < 0 || weights.l2 < 0 || weights.ce < 0 ||
        weights.grad < 0 || weights.w_airmf < 0 || weights.w_aff < 0)
        throw ParamError("loss weights must be >= 0");
}

double lr_at(int64_t iter, const TrainConfig& cfg) {
    double lr = cfg.lr;
    for (int64_t d : cfg.decay_iters)
        if (iter >= d) lr *= 0.1;
    return lr;
}

}  // namespace airm::trainer
