#pragma once

#include "mmcse/model.hpp"

// Class-aware feature decoupling: project raw per-segment features to
// holistic features, split them into per-class slices plus a background
// slice, and gate the background back into every event slice.

namespace mmcse {

// F^m = ReLU(raw^m W + b), [T, d1] per modality.
std::array<Tensor, 2> encode_inputs(const ModelConfig& cfg,
                                    const CafdParams& params,
                                    const Tensor& raw_a, const Tensor& raw_v);

// [T, d1] -> [T, S, d2]; slice k comes from head k, no activation.
Tensor decouple(const ModelConfig& cfg, const CafdParams& params, int modality,
                const Tensor& holistic);

// Blends the background slice into the event slices through the gate alpha
// and the blend map. Returns (fused [T,K,d2], alpha [T,1]); alpha is
// undefined when the configuration has no gate.
std::pair<Tensor, Tensor> fuse_background(const ModelConfig& cfg,
                                          const CafdParams& params,
                                          int modality, const Tensor& decoupled,
                                          const Tensor& holistic);

// Event-slice / background-slice views of a decoupled tensor.
Tensor event_slices(const ModelConfig& cfg, const Tensor& decoupled);   // [T,K,d2]
Tensor background_slice(const ModelConfig& cfg, const Tensor& decoupled);  // [T,d2]

}  // namespace mmcse
