#include "mmcse/fgse.hpp"

#include <cmath>

#include "mmcse/ops.hpp"

namespace mmcse {

SecmOut secm(const ModelConfig& cfg, const BranchParams& branch,
             const Tensor& h, const Tensor& h_other) {
    if (h.shape() != h_other.shape())
        throw ShapeError("secm: shape mismatch " + shape_str(h.shape()) +
                         " vs " + shape_str(h_other.shape()));
    const index_t d2 = h.shape().back();
    Tensor q = h, k = h_other, v = h_other;
    if (cfg.secm_projections && branch.wq.defined()) {
        q = ops::linear(h, branch.wq, Tensor{});
        k = ops::linear(h_other, branch.wk, Tensor{});
        v = ops::linear(h_other, branch.wv, Tensor{});
    }
    Tensor scores = ops::scale(ops::bmm(q, ops::transpose_last2(k)),
                               1.0 / std::sqrt(static_cast<double>(d2)));
    Tensor beta = ops::softmax_last(scores);  // [T,K,K]
    Tensor z = ops::add(h, ops::bmm(beta, v));
    return {z, beta};
}

LgsfOut lgsf(const ModelConfig& cfg, const Tensor& z, const Tensor& h,
             const Tensor& h_other) {
    const index_t t = h.dim(0);
    const index_t d2 = h.shape().back();
    Tensor global = ops::mean_axis(h_other, 0);  // [K,d2]
    Tensor zn = ops::l2_normalize_last(z);
    Tensor gn = ops::broadcast_axis(ops::l2_normalize_last(global), 0, t);
    // Cosine, clamped so rounding can never push it out of [-1,1].
    Tensor gamma =
        ops::clamp(ops::sum_axis(ops::mul(zn, gn), 2), -1.0, 1.0);  // [T,K]
    Tensor gexp = ops::broadcast_axis(global, 0, t);
    Tensor update = ops::mul(ops::broadcast_axis(gamma, 2, d2), gexp);
    const Tensor& base = cfg.lgsf_residual == LgsfResidual::Hhat ? h : z;
    return {ops::add(base, update), gamma};
}

namespace {

// One branch: SECM then LGSF, with the ablation switches applied.
Tensor phi(const ModelConfig& cfg, const BranchParams& branch, const Tensor& h,
           const Tensor& h_other, int src, int dst, int layer_index,
           std::vector<CoocMap>* maps) {
    Tensor z = h;
    if (cfg.use_secm) {
        SecmOut s = secm(cfg, branch, h, h_other);
        z = s.z;
        if (maps) maps->push_back({s.beta, src, dst, layer_index});
    }
    if (cfg.use_lgsf) return lgsf(cfg, z, h, h_other).x;
    return z;
}

}  // namespace

std::array<Tensor, 2> fgse_layer(const ModelConfig& cfg,
                                 const FgseLayerParams& params, int layer_index,
                                 const std::array<Tensor, 2>& x,
                                 std::vector<CoocMap>* maps) {
    if (!cfg.use_intra && !cfg.use_cross)
        throw ValidationError("fgse_layer: both branches disabled");
    std::array<Tensor, 2> out;
    for (int m = 0; m < 2; ++m) {
        const int other = 1 - m;
        Tensor acc;
        if (cfg.use_intra)
            acc = phi(cfg, params.intra[m], x[m], x[m], m, m, layer_index, maps);
        if (cfg.use_cross) {
            Tensor c = phi(cfg, params.cross[m], x[m], x[other], m, other,
                           layer_index, maps);
            acc = acc.defined() ? ops::add(acc, c) : c;
        }
        out[m] = acc;
    }
    return out;
}

std::array<Tensor, 2> stack_forward(const ModelConfig& cfg,
                                    const ModelParams& params,
                                    const std::array<Tensor, 2>& fused,
                                    std::vector<CoocMap>* maps) {
    if (static_cast<index_t>(params.layers.size()) != cfg.num_layers)
        throw ShapeError("stack_forward: expected " +
                         std::to_string(cfg.num_layers) + " layers, have " +
                         std::to_string(params.layers.size()));
    std::array<Tensor, 2> x = fused;
    for (index_t l = 0; l < cfg.num_layers; ++l)
        x = fgse_layer(cfg, params.layers[static_cast<std::size_t>(l)],
                       static_cast<int>(l), x, maps);
    return x;
}

}  // namespace mmcse
