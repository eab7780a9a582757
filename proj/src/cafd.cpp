#include "mmcse/cafd.hpp"

#include "mmcse/ops.hpp"

namespace mmcse {

std::array<Tensor, 2> encode_inputs(const ModelConfig& cfg,
                                    const CafdParams& params,
                                    const Tensor& raw_a, const Tensor& raw_v) {
    const std::array<const Tensor*, 2> raw = {&raw_a, &raw_v};
    const std::array<index_t, 2> dims = {cfg.raw_dim_a, cfg.raw_dim_v};
    std::array<Tensor, 2> holistic;
    for (int m = 0; m < 2; ++m) {
        if (raw[m]->rank() != 2 || raw[m]->dim(1) != dims[m])
            throw ShapeError(std::string("encode_inputs: ") + modality_tag(m) +
                             " features " + shape_str(raw[m]->shape()) +
                             " do not match manifest dim " +
                             std::to_string(dims[m]));
        holistic[m] = ops::relu(
            ops::linear(*raw[m], params.encoder[m].w, params.encoder[m].b));
    }
    if (raw_a.dim(0) != raw_v.dim(0))
        throw ShapeError("encode_inputs: modalities disagree on T: " +
                         shape_str(raw_a.shape()) + " vs " +
                         shape_str(raw_v.shape()));
    return holistic;
}

Tensor decouple(const ModelConfig& cfg, const CafdParams& params, int modality,
                const Tensor& holistic) {
    const auto& heads = params.heads[modality];
    if (static_cast<index_t>(heads.size()) != cfg.num_slices())
        throw ShapeError("decouple: expected " +
                         std::to_string(cfg.num_slices()) + " heads, have " +
                         std::to_string(heads.size()));
    const index_t t = holistic.dim(0);
    std::vector<Tensor> slices;
    slices.reserve(heads.size());
    for (const auto& head : heads)
        slices.push_back(ops::linear(holistic, head.w, head.b));
    Tensor flat = slices.size() == 1 ? slices[0] : ops::concat_last(slices);
    return ops::reshape(flat, {t, cfg.num_slices(), cfg.d2});
}

Tensor event_slices(const ModelConfig& cfg, const Tensor& decoupled) {
    const index_t t = decoupled.dim(0);
    if (!cfg.background) return decoupled;
    Tensor flat = ops::reshape(decoupled, {t, cfg.num_slices() * cfg.d2});
    return ops::reshape(ops::slice_last(flat, 0, cfg.num_classes * cfg.d2),
                        {t, cfg.num_classes, cfg.d2});
}

Tensor background_slice(const ModelConfig& cfg, const Tensor& decoupled) {
    if (!cfg.background)
        throw ShapeError("background_slice: configuration has no background");
    const index_t t = decoupled.dim(0);
    Tensor flat = ops::reshape(decoupled, {t, cfg.num_slices() * cfg.d2});
    return ops::slice_last(flat, cfg.num_classes * cfg.d2, cfg.d2);
}

std::pair<Tensor, Tensor> fuse_background(const ModelConfig& cfg,
                                          const CafdParams& params,
                                          int modality, const Tensor& decoupled,
                                          const Tensor& holistic) {
    const index_t t = decoupled.dim(0);
    const index_t k = cfg.num_classes;
    if (holistic.dim(0) != t)
        throw ShapeError("fuse_background: T mismatch " +
                         shape_str(decoupled.shape()) + " vs " +
                         shape_str(holistic.shape()));

    if (!cfg.decouple) {
        // Shared projection broadcast to every class slot.
        Tensor single = ops::reshape(decoupled, {t, cfg.d2});
        return {ops::broadcast_axis(single, 1, k), Tensor{}};
    }

    Tensor events = event_slices(cfg, decoupled);
    Tensor cat, alpha;
    if (cfg.background) {
        alpha = ops::sigmoid(ops::linear(holistic, params.alpha[modality].w,
                                         params.alpha[modality].b));  // [T,1]
        Tensor acol = ops::reshape(alpha, {t});
        Tensor aexp = ops::broadcast_axis(ops::broadcast_axis(acol, 1, k), 2, cfg.d2);
        Tensor inv = ops::sub(Tensor::full({t}, 1.0), acol);
        Tensor iexp = ops::broadcast_axis(ops::broadcast_axis(inv, 1, k), 2, cfg.d2);
        Tensor bg = ops::broadcast_axis(background_slice(cfg, decoupled), 1, k);
        cat = ops::concat_last({ops::mul(events, aexp), ops::mul(bg, iexp)});
    } else {
        cat = ops::concat_last({events, Tensor::zeros({t, k, cfg.d2})});
    }
    Tensor fused = ops::relu(
        ops::linear(cat, params.blend[modality].w, params.blend[modality].b));
    return {fused, alpha};
}

}  // namespace mmcse
