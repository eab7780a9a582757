#include "mmcse/heads.hpp"

#include "mmcse/ops.hpp"

namespace mmcse {

Tensor parse_events(const LinearParams& parser, const Tensor& x) {
    const index_t t = x.dim(0), k = x.dim(1);
    return ops::sigmoid(ops::reshape(ops::linear(x, parser.w, parser.b), {t, k}));
}

namespace {

// Attention scores s[t,k] = x[t,k,:] . u + c, one head per modality.
Tensor pool_scores(const LinearParams& pool, const Tensor& x) {
    const index_t t = x.dim(0), k = x.dim(1);
    return ops::reshape(ops::linear(x, pool.w, pool.b), {t, k});
}

Tensor mmil_joint(const std::array<Tensor, 2>& scores,
                  const std::array<Tensor, 2>& seg_probs) {
    const index_t k = scores[0].dim(1);
    // [K, 2T]: all (t, modality) slots side by side, then one softmax per class.
    Tensor joint = ops::concat_last({ops::transpose_last2(scores[kAudio]),
                                     ops::transpose_last2(scores[kVisual])});
    Tensor weights = ops::softmax_last(joint);
    Tensor probs = ops::concat_last({ops::transpose_last2(seg_probs[kAudio]),
                                     ops::transpose_last2(seg_probs[kVisual])});
    return ops::reshape(ops::sum_axis(ops::mul(weights, probs), 1), {1, k});
}

Tensor mmil_factorized(const std::array<Tensor, 2>& scores,
                       const std::array<Tensor, 2>& seg_probs) {
    const index_t t = scores[0].dim(0), k = scores[0].dim(1);
    // Temporal softmax within each modality.
    std::array<Tensor, 2> frame;
    for (int m = 0; m < 2; ++m)
        frame[m] = ops::transpose_last2(
            ops::softmax_last(ops::transpose_last2(scores[m])));  // [T,K]
    // Modality softmax per (t,k) slot.
    Tensor stacked = ops::concat_last({ops::reshape(scores[kAudio], {t, k, 1}),
                                       ops::reshape(scores[kVisual], {t, k, 1})});
    Tensor msm = ops::softmax_last(stacked);  // [T,K,2]
    std::vector<Tensor> mw = ops::split_last(msm, {1, 1});
    Tensor acc;
    for (int m = 0; m < 2; ++m) {
        Tensor w = ops::mul(frame[m], ops::reshape(mw[static_cast<std::size_t>(m)], {t, k}));
        Tensor term = ops::sum_axis(ops::mul(w, seg_probs[m]), 0);  // [K]
        acc = acc.defined() ? ops::add(acc, term) : term;
    }
    // Factorized weights need not sum to 1; keep the output a probability.
    return ops::clamp(ops::reshape(acc, {1, k}), 1e-7, 1.0 - 1e-7);
}

}  // namespace

Tensor mmil_pool(const ModelConfig& cfg, const HeadParams& heads,
                 const std::array<Tensor, 2>& x,
                 const std::array<Tensor, 2>& seg_probs) {
    std::array<Tensor, 2> scores;
    for (int m = 0; m < 2; ++m) scores[m] = pool_scores(heads.pool[m], x[m]);
    if (cfg.mmil == MmilMode::Factorized)
        return mmil_factorized(scores, seg_probs);
    return mmil_joint(scores, seg_probs);
}

}  // namespace mmcse
