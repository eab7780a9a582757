#pragma once

#include "mmcse/model.hpp"

// Fine-grained semantic enhancement: per-timestamp event co-occurrence
// attention (SECM) followed by local-global cosine fusion (LGSF), run as an
// intra-modal and a cross-modal branch whose outputs are summed, stacked L
// times.

namespace mmcse {

struct SecmOut {
    Tensor z;     // [T,K,d2]
    Tensor beta;  // [T,K,K]
};

// beta[t] = softmax_rows(Q[t] K[t]^T / sqrt(d2)); Z[t] = H[t] + beta[t] V[t].
// With projections off Q=H, K=V=H'.
SecmOut secm(const ModelConfig& cfg, const BranchParams& branch,
             const Tensor& h, const Tensor& h_other);

struct LgsfOut {
    Tensor x;      // [T,K,d2]
    Tensor gamma;  // [T,K], cosine in [-1,1]
};

// G = temporal mean of h_other; gamma = cos(Z, G) per (t,k); the residual
// source is h or z depending on cfg.lgsf_residual.
LgsfOut lgsf(const ModelConfig& cfg, const Tensor& z, const Tensor& h,
             const Tensor& h_other);

// One layer: X^m_out = phi_intra(X^m, X^m) + phi_cross(X^m, X^mbar), with
// this layer's co-occurrence maps appended to *maps when SECM runs.
std::array<Tensor, 2> fgse_layer(const ModelConfig& cfg,
                                 const FgseLayerParams& params, int layer_index,
                                 const std::array<Tensor, 2>& x,
                                 std::vector<CoocMap>* maps);

std::array<Tensor, 2> stack_forward(const ModelConfig& cfg,
                                    const ModelParams& params,
                                    const std::array<Tensor, 2>& fused,
                                    std::vector<CoocMap>* maps);

}  // namespace mmcse
