#include "mmcse/losses.hpp"

#include "mmcse/cafd.hpp"
#include "mmcse/ops.hpp"

namespace mmcse {

namespace {

constexpr double kProbFloor = 1e-7;

void check_binary(const Tensor& t, const std::string& who) {
    const double* d = t.data();
    for (index_t i = 0; i < t.numel(); ++i) {
        if (d[i] != 0.0 && d[i] != 1.0)
            throw ValidationError(who + ": labels must be 0/1");
    }
}

Tensor mse(const Tensor& a, const Tensor& b) {
    Tensor diff = ops::sub(a, b);
    return ops::mean_all(ops::mul(diff, diff));
}

}  // namespace

void Annotations::validate(index_t t, index_t k, const std::string& who) const {
    if (!video.defined() || !seg_a.defined() || !seg_v.defined())
        throw ValidationError(who + ": missing annotation tensor");
    if (video.shape() != Shape{1, k})
        throw ValidationError(who + ": video label shape " +
                              shape_str(video.shape()) + ", expected [1," +
                              std::to_string(k) + "]");
    for (int m = 0; m < 2; ++m) {
        const Tensor& s = seg(m);
        if (s.shape() != Shape{t, k})
            throw ValidationError(who + ": segment labels " + modality_tag(m) +
                                  " shape " + shape_str(s.shape()) +
                                  ", expected [" + std::to_string(t) + "," +
                                  std::to_string(k) + "]");
        check_binary(s, who);
    }
    check_binary(video, who);
    for (index_t c = 0; c < k; ++c) {
        bool any = false;
        for (index_t ti = 0; ti < t && !any; ++ti)
            any = seg_a.at({ti, c}) == 1.0 || seg_v.at({ti, c}) == 1.0;
        const bool video_on = video.at({0, c}) == 1.0;
        if (any && !video_on)
            throw ValidationError(who + ": class " + std::to_string(c) +
                                  " active in segments but not in video label");
    }
}

Tensor bce(const Tensor& p, const Tensor& y) {
    if (p.shape() != y.shape())
        throw ShapeError("bce: shape mismatch " + shape_str(p.shape()) +
                         " vs " + shape_str(y.shape()));
    Tensor pc = ops::clamp(p, kProbFloor, 1.0 - kProbFloor);
    Tensor one = Tensor::full(p.shape(), 1.0);
    Tensor pos = ops::mul(y, ops::log(pc));
    Tensor neg = ops::mul(ops::sub(one, y), ops::log(ops::sub(one, pc)));
    return ops::scale(ops::mean_all(ops::add(pos, neg)), -1.0);
}

Tensor basic_loss(const Tensor& p_a, const Tensor& p_v, const Tensor& video_p,
                  const Annotations& ann) {
    return ops::add(ops::add(bce(p_a, ann.seg_a), bce(p_v, ann.seg_v)),
                    bce(video_p, ann.video));
}

Tensor reconstruction_loss(const ModelConfig& cfg, const DecoderParams& decoder,
                           const std::array<Tensor, 2>& decoupled,
                           const std::array<Tensor, 2>& holistic) {
    Tensor total;
    for (int m = 0; m < 2; ++m) {
        const index_t t = decoupled[m].dim(0);
        Tensor flat = ops::reshape(decoupled[m], {t, cfg.num_slices() * cfg.d2});
        Tensor hidden = ops::relu(
            ops::linear(flat, decoder.hidden[m].w, decoder.hidden[m].b));
        Tensor rec = ops::linear(hidden, decoder.out[m].w, decoder.out[m].b);
        Tensor term = mse(rec, holistic[m]);
        total = total.defined() ? ops::add(total, term) : term;
    }
    return total;
}

Tensor orthogonality_loss(const ModelConfig& cfg,
                          const std::array<Tensor, 2>& decoupled) {
    if (!cfg.background) return Tensor::scalar(0.0);
    Tensor total;
    for (int m = 0; m < 2; ++m) {
        Tensor events = ops::l2_normalize_last(event_slices(cfg, decoupled[m]));
        Tensor bg = ops::l2_normalize_last(background_slice(cfg, decoupled[m]));
        Tensor bgk = ops::broadcast_axis(bg, 1, cfg.num_classes);  // [T,K,d2]
        Tensor cos = ops::sum_axis(ops::mul(events, bgk), 2);      // [T,K]
        if (cfg.ort == OrtMode::Absolute) cos = ops::abs(cos);
        Tensor term = ops::mean_all(cos);
        total = total.defined() ? ops::add(total, term) : term;
    }
    return total;
}

Tensor cooc_target(const Tensor& y_src, const Tensor& y_dst) {
    if (y_src.shape() != y_dst.shape() || y_src.rank() != 2)
        throw ShapeError("cooc_target: label shapes " + shape_str(y_src.shape()) +
                         " vs " + shape_str(y_dst.shape()));
    check_binary(y_src, "cooc_target");
    check_binary(y_dst, "cooc_target");
    const index_t t = y_src.dim(0), k = y_src.dim(1);
    Tensor m = Tensor::zeros({t, k, k});
    double* out = m.mutable_data();
    const double* a = y_src.data();
    const double* b = y_dst.data();
    for (index_t ti = 0; ti < t; ++ti)
        for (index_t i = 0; i < k; ++i)
            for (index_t j = 0; j < k; ++j)
                out[(ti * k + i) * k + j] = a[ti * k + i] * b[ti * k + j];
    return m;
}

Tensor ec_loss(const std::vector<CoocMap>& maps, const Annotations& ann) {
    if (maps.empty()) return Tensor::scalar(0.0);
    Tensor total;
    for (const CoocMap& map : maps) {
        Tensor target = cooc_target(ann.seg(map.src), ann.seg(map.dst));
        Tensor term = mse(map.beta, target);
        total = total.defined() ? ops::add(total, term) : term;
    }
    return ops::scale(total, 1.0 / static_cast<double>(maps.size()));
}

Tensor combine_total(const Tensor& basic, const Tensor& rec, const Tensor& ort,
                     const Tensor& ec, const LossWeights& weights) {
    Tensor total = Tensor::scalar(0.0);
    if (weights.use_basic) total = ops::add(total, basic);
    if (weights.use_rec) total = ops::add(total, rec);
    if (weights.use_ort) total = ops::add(total, ops::scale(ort, weights.lambda1));
    if (weights.use_ec) total = ops::add(total, ops::scale(ec, weights.lambda2));
    return total;
}

LossBundle total_loss(const ModelConfig& cfg, const ModelParams& params,
                      const ForwardTrace& trace, const Annotations& ann,
                      const LossWeights& weights) {
    const index_t t = trace.seg_probs[kAudio].dim(0);
    ann.validate(t, cfg.num_classes, "total_loss");
    LossBundle bundle;
    bundle.basic = weights.use_basic
                       ? basic_loss(trace.seg_probs[kAudio], trace.seg_probs[kVisual],
                                    trace.video_prob, ann)
                       : Tensor::scalar(0.0);
    bundle.rec = weights.use_rec
                     ? reconstruction_loss(cfg, params.decoder, trace.decoupled,
                                           trace.holistic)
                     : Tensor::scalar(0.0);
    bundle.ort = weights.use_ort ? orthogonality_loss(cfg, trace.decoupled)
                                 : Tensor::scalar(0.0);
    bundle.ec = weights.use_ec ? ec_loss(trace.cooc, ann) : Tensor::scalar(0.0);
    bundle.total =
        combine_total(bundle.basic, bundle.rec, bundle.ort, bundle.ec, weights);
    return bundle;
}

}  // namespace mmcse
