#pragma once

#include "mmcse/model.hpp"

namespace mmcse {

// p[t,k] = sigmoid(x[t,k,:] . w + b); one probe per modality, shared across
// classes and timesteps.
Tensor parse_events(const LinearParams& parser, const Tensor& x);

// Attentive multi-modal multi-instance pooling of segment probabilities into
// a video-level prediction [1,K]. Joint mode softmaxes over all 2T (t,m)
// slots per class; factorized mode multiplies a temporal and a modality
// softmax and clamps the result into (0,1).
Tensor mmil_pool(const ModelConfig& cfg, const HeadParams& heads,
                 const std::array<Tensor, 2>& x,
                 const std::array<Tensor, 2>& seg_probs);

}  // namespace mmcse
