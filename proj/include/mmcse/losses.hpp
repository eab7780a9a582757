#pragma once

#include "mmcse/model.hpp"

namespace mmcse {

// Video-level label plus per-modality segment-level labels, all binary.
struct Annotations {
    Tensor video;  // [1,K]
    Tensor seg_a;  // [T,K]
    Tensor seg_v;  // [T,K]

    const Tensor& seg(int modality) const {
        return modality == kAudio ? seg_a : seg_v;
    }
    // Binary entries, matching shapes, and video[k] set whenever any segment
    // of either modality has class k active.
    void validate(index_t t, index_t k, const std::string& who) const;
};

// Mean over elements of -[y ln p + (1-y) ln(1-p)], with p clamped into
// [1e-7, 1-1e-7] before the logs.
Tensor bce(const Tensor& p, const Tensor& y);

Tensor basic_loss(const Tensor& p_a, const Tensor& p_v, const Tensor& video_p,
                  const Annotations& ann);

// Decoder(flattened decoupled) vs the holistic feature, MSE summed over the
// two modalities. Decoder = linear -> ReLU -> linear.
Tensor reconstruction_loss(const ModelConfig& cfg, const DecoderParams& decoder,
                           const std::array<Tensor, 2>& decoupled,
                           const std::array<Tensor, 2>& holistic);

// Mean cosine between the background slice and each event slice, averaged
// over T*K and summed over modalities. Zero when the configuration has no
// background slice.
Tensor orthogonality_loss(const ModelConfig& cfg,
                          const std::array<Tensor, 2>& decoupled);

// M[t,i,j] = y_src[t,i] * y_dst[t,j]; rejects non-binary labels.
Tensor cooc_target(const Tensor& y_src, const Tensor& y_dst);

// MSE between each recorded co-occurrence map and its label-derived target,
// averaged over all maps. Zero when no maps were recorded.
Tensor ec_loss(const std::vector<CoocMap>& maps, const Annotations& ann);

struct LossWeights {
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    bool use_basic = true;
    bool use_rec = true;
    bool use_ort = true;
    bool use_ec = true;
};

struct LossBundle {
    Tensor basic, rec, ort, ec;  // scalars; disabled terms are constant zero
    Tensor total;
};

// total = basic + rec + lambda1*ort + lambda2*ec over the enabled terms.
LossBundle total_loss(const ModelConfig& cfg, const ModelParams& params,
                      const ForwardTrace& trace, const Annotations& ann,
                      const LossWeights& weights);

// The weighted-sum combination alone, for callers that average components
// over a batch first.
Tensor combine_total(const Tensor& basic, const Tensor& rec, const Tensor& ort,
                     const Tensor& ec, const LossWeights& weights);

}  // namespace mmcse
